"""Three-stage training orchestration plus the text-only baseline.

Stage "vae" trains the discrete visual encoder; "hallucinator" pretrains
the joint text+visual model; "joint" trains translator and hallucinator
together on the combined objective; "textonly" trains the no-visual
baseline. Later stages consume the frozen codebook and cached visual
tokens produced by stage "vae".
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..engine.nn import ParamStore
from ..engine.optim import AdamState, adam_step, lr_at
from ..engine.ops import add, matmul, mul, scale
from ..engine.rng import RngHub
from ..engine.tensor import Tape, Tensor, backward, recording
from ..errors import ConfigurationError, ContractViolation, NumericFailure
from ..halluc.gumbel import (anneal_tau, gumbel_softmax_from_logits,
                             sample_gumbel)
from ..halluc.model import HallucConfig, Hallucinator
from ..textpipe.batching import EncodedSample, batch_iterator
from ..textpipe.bpe import BpeMerges, learn_bpe
from ..textpipe.vocab import RESERVED, TextCodec, Vocabulary, build_vocabulary
from ..translator.model import Translator, consistency_loss
from ..vq.model import VqModel
from ..vq.token_cache import read_token_cache, write_token_cache
from ..vq.training import train_vae
from ..world.corpus import CorpusSplits, generate_corpus, write_split
from ..world.masking import mask_entities, mask_progressive
from .checkpoint import Checkpoint, save_checkpoint
from .config import Config

logger = logging.getLogger(__name__)

STAGES = ("vae", "hallucinator", "joint", "textonly")


@dataclass
class WorldBundle:
    """Corpus, codec, and (after stage 1) visual-token caches."""

    splits: CorpusSplits
    merges: BpeMerges
    vocab: Vocabulary
    codec: TextCodec
    tokens: Dict[str, np.ndarray] = field(default_factory=dict)

    def split(self, name: str):
        return getattr(self.splits, name)


def prepare_world(cfg: Config) -> WorldBundle:
    """Generate the corpus and learn the shared BPE vocabulary."""
    splits = generate_corpus(cfg["corpus_n"], cfg["corpus_seed"])
    sentences = [" ".join(s.source) for s in splits.train] + \
                [" ".join(s.target) for s in splits.train]
    merges = learn_bpe(sentences, cfg["bpe_merges"], reserved=RESERVED)
    vocab = build_vocabulary(sentences, merges)
    codec = TextCodec(merges, vocab)
    return WorldBundle(splits=splits, merges=merges, vocab=vocab,
                       codec=codec)


def export_world(cfg: Config, world: WorldBundle) -> Path:
    out = cfg.work_dir() / "corpus"
    for name in ("train", "valid", "test"):
        write_split(out, name, world.split(name))
    return out


# --------------------------------------------------------------------------
# model assembly

def build_vq_model(cfg: Config, seed_offset: int = 0) -> VqModel:
    rng = np.random.default_rng(cfg["seed"] + seed_offset)
    return VqModel(cfg.vq_config(), rng)


def build_models(cfg: Config, vocab_size: int, hub: RngHub,
                 text_only: bool = False
                 ) -> Tuple[Translator, Optional[Hallucinator]]:
    vqc = cfg.vq_config()
    translator = Translator(
        cfg.model_config(), vocab_size, vqc.d, vqc.grid,
        hub.stream("init/translator"), visual=not text_only)
    halluc = None
    if not text_only:
        mc = cfg.model_config()
        halluc = Hallucinator(
            HallucConfig(text_vocab=vocab_size, k=vqc.k, grid=vqc.grid,
                         dim=mc.dim, ffn_dim=mc.ffn_dim, heads=mc.heads,
                         layers=cfg["halluc_layers"], dropout=mc.dropout),
            hub.stream("init/hallucinator"))
    return translator, halluc


# --------------------------------------------------------------------------
# masking + encoding

def masked_source_words(sample, mode: str, p: float, k: int,
                        rng: np.random.Generator) -> List[str]:
    if mode == "none":
        return list(sample.source)
    if mode == "entity":
        return mask_entities(sample.source, sample.entity_spans, p, rng)
    if mode == "progressive":
        return mask_progressive(sample.source, k)
    raise ConfigurationError(f"unknown mask mode {mode!r}")


def encode_epoch(world: WorldBundle, split: str, cfg: Config,
                 epoch_rng: Optional[np.random.Generator]
                 ) -> List[EncodedSample]:
    """Encode a split with the configured masking (fresh per epoch)."""
    samples = world.split(split)
    mode = cfg["mask_mode"]
    out = []
    for i, s in enumerate(samples):
        words = masked_source_words(s, mode, cfg["mask_p"], cfg["mask_k"],
                                    epoch_rng) if mode != "none" \
            else list(s.source)
        src_ids = tuple(world.codec.encode(" ".join(words)))
        tgt_ids = tuple(world.codec.encode(" ".join(s.target)))
        out.append(EncodedSample(src_ids=src_ids, tgt_ids=tgt_ids,
                                 sample_id=i, image_ref=i))
    return out


def split_token_cache(world: WorldBundle, split: str) -> np.ndarray:
    if split not in world.tokens:
        raise ContractViolation(
            f"visual tokens for split {split!r} missing; run stage 'vae'")
    return world.tokens[split]


# --------------------------------------------------------------------------
# stage 1

def run_stage_vae(cfg: Config, world: WorldBundle,
                  workdir: Optional[Path] = None) -> Tuple[VqModel, Path]:
    """Train the visual encoder, freeze it, and cache visual tokens."""
    workdir = workdir or cfg.work_dir()
    train_imgs = np.stack([s.image()
                           for s in world.split("train")[:cfg["vq_images"]]])
    model, report = train_vae(
        train_imgs, cfg.vq_config(), steps=cfg["vq_steps"],
        batch_size=cfg["vq_batch"], lr=cfg["vq_lr"], seed=cfg["seed"])
    ckpt = Checkpoint(digest=cfg.digest(), step=cfg["vq_steps"], stage="vae",
                      tensors=model.store.export_arrays())
    path = workdir / "ckpt" / "vae.ckpt"
    save_checkpoint(path, ckpt)
    for split in ("train", "valid", "test"):
        tokens = encode_split_tokens(model, world, split)
        world.tokens[split] = tokens
        write_token_cache(workdir / "ckpt" / f"tokens_{split}.bin", tokens,
                          cfg["vq_k"])
    logger.info("stage vae done: final train mse %.5f",
                report.step_mse[-1] if report.step_mse else float("nan"))
    return model, path


def encode_split_tokens(model: VqModel, world: WorldBundle, split: str,
                        batch: int = 256) -> np.ndarray:
    samples = world.split(split)
    chunks = []
    for lo in range(0, len(samples), batch):
        imgs = np.stack([s.image() for s in samples[lo:lo + batch]])
        chunks.append(model.encode_tokens(imgs))
    return np.concatenate(chunks, axis=0) if chunks else \
        np.zeros((0, model.cfg.tokens), dtype=np.int64)


def load_vq_from_checkpoint(cfg: Config, ckpt: Checkpoint) -> VqModel:
    model = build_vq_model(cfg)
    model.store.load_arrays(ckpt.params())
    return model


# --------------------------------------------------------------------------
# transformer stages

@dataclass
class StepLog:
    step: int
    total: float
    loss_mm: float = 0.0
    loss_halluc_stream: float = 0.0
    loss_h: float = 0.0
    loss_c: float = 0.0
    lr: float = 0.0
    tau: float = 0.0

    def recombined(self, gamma_h: float, lambda_c: float) -> float:
        """Total re-derived from components in the training order."""
        return ((self.loss_mm + self.loss_halluc_stream)
                + gamma_h * self.loss_h) + lambda_c * self.loss_c


@dataclass
class StageResult:
    checkpoints: List[Path]
    logs: List[StepLog]
    translator: Optional[Translator] = None
    hallucinator: Optional[Hallucinator] = None


def _all_params(stores: Sequence[ParamStore]) -> List[Tensor]:
    out: List[Tensor] = []
    for s in stores:
        out.extend(s.tensors())
    return out


def _replace_params(stores: Sequence[ParamStore],
                    tensors: List[Tensor]) -> None:
    cursor = 0
    for s in stores:
        n = len(s.names())
        s.replace_all(tensors[cursor:cursor + n])
        cursor += n


def _save_stage_checkpoint(cfg: Config, stage: str, step: int,
                           stores: Dict[str, ParamStore],
                           opt: AdamState, opt_names: List[str],
                           hub: RngHub, workdir: Path,
                           extra: Dict[str, np.ndarray]) -> Path:
    tensors: Dict[str, np.ndarray] = dict(extra)
    for store in stores.values():
        tensors.update(store.export_arrays())
    for i, name in enumerate(opt_names):
        if opt.m:
            tensors[f"opt/m/{name}"] = opt.m[i]
            tensors[f"opt/u/{name}"] = opt.u[i]
    ckpt = Checkpoint(digest=cfg.digest(), step=step, stage=stage,
                      tensors=tensors, rng_blob=hub.state_blob())
    path = workdir / "ckpt" / f"{stage}_{step:06d}.ckpt"
    save_checkpoint(path, ckpt)
    return path


def run_transformer_stage(stage: str, cfg: Config, world: WorldBundle,
                          vq_model: Optional[VqModel] = None,
                          init_from: Optional[Dict[str, np.ndarray]] = None,
                          workdir: Optional[Path] = None,
                          iters: Optional[int] = None) -> StageResult:
    """Stages "hallucinator", "joint", and "textonly"."""
    if stage not in ("hallucinator", "joint", "textonly"):
        raise ConfigurationError(f"unknown transformer stage {stage!r}")
    workdir = workdir or cfg.work_dir()
    text_only = stage == "textonly"
    if not text_only and vq_model is None:
        raise ConfigurationError(
            f"stage {stage!r} needs the stage-1 visual encoder checkpoint")
    hub = RngHub(cfg["seed"])
    translator, halluc = build_models(cfg, len(world.vocab), hub,
                                      text_only=text_only)
    if stage == "hallucinator":
        stores = {"fh": halluc.store}
    elif stage == "joint":
        stores = {"ft": translator.store, "fh": halluc.store}
    else:
        stores = {"ft": translator.store}
    if init_from:
        for store in stores.values():
            have = {n: init_from[n] for n in store.names()
                    if n in init_from}
            if len(have) == len(store.names()):
                store.load_arrays(have)
    frozen_vq = dict(vq_model.store.export_arrays()) if not text_only else {}
    codebook = vq_model.store["codebook"].data.copy() if not text_only \
        else None

    schedule = cfg.lr_schedule()
    gumbel = cfg.gumbel_config()
    gamma_h, lambda_c = cfg["gamma_h"], cfg["lambda_c"]
    total_iters = iters if iters is not None else (
        cfg["halluc_iters"] if stage == "hallucinator" else cfg["iters"])
    opt = AdamState()
    logs: List[StepLog] = []
    ckpts: List[Path] = []
    z_cache = split_token_cache(world, "train") if not text_only else None
    dropout_stream = hub.stream("dropout")
    gumbel_stream = hub.stream("gumbel")

    step = 0
    epoch = 0
    done = False
    while not done:
        mask_rng = np.random.default_rng(
            hub.derived_seed(f"mask/epoch{epoch}"))
        encoded = encode_epoch(world, "train", cfg, mask_rng)
        batches = batch_iterator(encoded, cfg["token_budget"],
                                 hub.derived_seed(f"order/epoch{epoch}"))
        for batch in batches:
            if step >= total_iters:
                done = True
                break
            step += 1
            tau = anneal_tau(step, gumbel)
            z = z_cache[batch.sample_ids] if z_cache is not None else None
            tape = Tape()
            with recording(tape):
                log = StepLog(step=step, total=0.0, tau=tau)
                if stage == "hallucinator":
                    loss, _ = halluc.hallucination_loss(
                        batch.src, batch.src_lengths, z, train=True,
                        stream=dropout_stream)
                    log.loss_h = float(loss.data)
                    total = loss
                elif stage == "textonly":
                    loss, _ = translator.translation_loss(
                        batch.src, batch.src_lengths, None, batch.tgt,
                        batch.tgt_lengths, train=True,
                        stream=dropout_stream)
                    log.loss_mm = float(loss.data)
                    total = loss
                else:
                    total, parts = joint_loss(
                        cfg, translator, halluc, codebook, batch, z, tau,
                        gumbel_stream, dropout_stream)
                    log.loss_mm = parts["loss_mm"]
                    log.loss_halluc_stream = parts["loss_halluc_stream"]
                    log.loss_h = parts["loss_h"]
                    log.loss_c = parts["loss_c"]
            value = float(total.data)
            log.total = value
            if not np.isfinite(value):
                raise NumericFailure(
                    f"non-finite loss at {stage} step {step}: "
                    f"{[l.total for l in logs[-5:]]}")
            grads = backward(total, tape)
            lr = lr_at(step, schedule)
            log.lr = lr
            params = _all_params(list(stores.values()))
            updated = adam_step(params, grads, opt, lr)
            _replace_params(list(stores.values()), updated)
            logs.append(log)
            if cfg["checkpoint_interval"] and \
                    step % cfg["checkpoint_interval"] == 0:
                ckpts.append(_save_stage_checkpoint(
                    cfg, stage, step, stores, opt,
                    _store_names(stores), hub, workdir, frozen_vq))
        epoch += 1
    ckpts.append(_save_stage_checkpoint(
        cfg, stage, step, stores, opt, _store_names(stores), hub, workdir,
        frozen_vq))
    return StageResult(checkpoints=ckpts, logs=logs, translator=translator,
                       hallucinator=halluc)


def _store_names(stores: Dict[str, ParamStore]) -> List[str]:
    names: List[str] = []
    for store in stores.values():
        names.extend(store.names())
    return names


def joint_loss(cfg: Config, translator: Translator, halluc: Hallucinator,
               codebook: np.ndarray, batch, z: np.ndarray, tau: float,
               gumbel_stream, dropout_stream) -> Tuple[Tensor, Dict]:
    """Combined objective: both translation streams, hallucination
    likelihood, and the consistency term."""
    loss_h_t, scores = halluc.hallucination_loss(
        batch.src, batch.src_lengths, z, train=True, stream=dropout_stream)
    noise = sample_gumbel(scores["visual_logits"].shape, gumbel_stream)
    zsoft = gumbel_softmax_from_logits(scores["visual_logits"], tau, noise)
    vis_soft = matmul(zsoft, Tensor(codebook))
    vis_hard = Tensor(codebook[z])
    loss_mm_t, rows_m = translator.translation_loss(
        batch.src, batch.src_lengths, vis_hard, batch.tgt,
        batch.tgt_lengths, train=True, stream=dropout_stream)
    loss_hs_t, rows_h = translator.translation_loss(
        batch.src, batch.src_lengths, vis_soft, batch.tgt,
        batch.tgt_lengths, train=True, stream=dropout_stream)
    weights = batch.tgt_weight_mask()[:, 1:]
    loss_c_t = consistency_loss(rows_m, rows_h, weights)
    total = add(add(add(loss_mm_t, loss_hs_t),
                    scale(loss_h_t, cfg["gamma_h"])),
                scale(loss_c_t, cfg["lambda_c"]))
    parts = {
        "loss_mm": float(loss_mm_t.data),
        "loss_halluc_stream": float(loss_hs_t.data),
        "loss_h": float(loss_h_t.data),
        "loss_c": float(loss_c_t.data),
    }
    return total, parts
