"""Checkpoint loading, corpus decoding, and evaluation reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..engine.rng import RngHub
from ..engine.tensor import Tensor, no_grad
from ..errors import ConfigurationError, ContractViolation
from ..halluc.model import Hallucinator
from ..translator.model import Translator
from ..vq.model import VqModel
from .beam import BeamConfig, Hypothesis, beam_search_group
from .bleu import corpus_bleu
from .checkpoint import Checkpoint
from .config import Config
from .stages import (WorldBundle, build_models, build_vq_model,
                     masked_source_words)

MODES = ("text-only", "hallucinated", "ground-truth-visual")


@dataclass
class EvalBundle:
    """Models reconstructed from a checkpoint."""

    translator: Translator
    hallucinator: Optional[Hallucinator]
    vq: Optional[VqModel]
    stage: str

    @property
    def codebook(self) -> Optional[np.ndarray]:
        if self.vq is None:
            return None
        return self.vq.store["codebook"].data


def load_bundle(cfg: Config, ckpt: Checkpoint,
                world_vocab_size: int) -> EvalBundle:
    text_only = ckpt.stage == "textonly"
    hub = RngHub(cfg["seed"])
    translator, halluc = build_models(cfg, world_vocab_size, hub,
                                      text_only=text_only)
    params = ckpt.params()
    translator.store.load_arrays(
        {n: params[n] for n in translator.store.names() if n in params}
        if text_only else params)
    vq = None
    if not text_only:
        halluc.store.load_arrays(params)
        vq = build_vq_model(cfg)
        vq.store.load_arrays(params)
    return EvalBundle(translator=translator, hallucinator=halluc, vq=vq,
                      stage=ckpt.stage)


def _group_by_length(items: Sequence[Tuple[int, Tuple[int, ...]]]
                     ) -> Dict[int, List[Tuple[int, Tuple[int, ...]]]]:
    groups: Dict[int, List] = {}
    for idx, ids in items:
        groups.setdefault(len(ids), []).append((idx, ids))
    return groups


def hallucinate_tokens(bundle: EvalBundle, src_rows: Sequence[Tuple[int, ...]]
                       ) -> np.ndarray:
    """Greedy visual decoding for a list of encoded sources."""
    if bundle.hallucinator is None:
        raise ContractViolation("checkpoint has no hallucination model")
    n = len(src_rows)
    v = bundle.hallucinator.cfg.tokens
    out = np.zeros((n, v), dtype=np.int64)
    groups = _group_by_length(list(enumerate(src_rows)))
    for length in sorted(groups):
        idxs = [i for i, _ in groups[length]]
        mat = np.array([ids for _, ids in groups[length]], dtype=np.int64)
        zhat = bundle.hallucinator.decode(
            mat, np.full(len(idxs), length, dtype=np.int64))
        out[idxs] = zhat
    return out


def translate_corpus(bundle: EvalBundle, cfg: Config, world: WorldBundle,
                     src_rows: Sequence[Tuple[int, ...]], mode: str,
                     gt_tokens: Optional[np.ndarray] = None,
                     beam_cfg: Optional[BeamConfig] = None,
                     chunk: int = 128) -> Tuple[List[List[str]], Dict]:
    """Decode every source row; returns word-token hypotheses + extras."""
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    beam_cfg = beam_cfg or BeamConfig(beam=cfg["beam"], alpha=cfg["alpha"],
                                      max_len=cfg["max_len"])
    from ..textpipe.vocab import BOS, EOS
    extras: Dict = {}
    zhat_all: Optional[np.ndarray] = None
    if mode == "hallucinated":
        zhat_all = hallucinate_tokens(bundle, src_rows)
        extras["hallucinated_tokens"] = zhat_all
    elif mode == "ground-truth-visual":
        if gt_tokens is None:
            raise ContractViolation(
                "ground-truth-visual mode needs the visual token cache")
    hyps: List[Optional[List[str]]] = [None] * len(src_rows)
    groups = _group_by_length(list(enumerate(src_rows)))
    for length in sorted(groups):
        members = groups[length]
        for lo in range(0, len(members), chunk):
            part = members[lo:lo + chunk]
            idxs = [i for i, _ in part]
            mat = np.array([ids for _, ids in part], dtype=np.int64)
            lens = np.full(len(part), length, dtype=np.int64)
            if mode == "text-only":
                vis = None
            elif mode == "hallucinated":
                vis = Tensor(bundle.codebook[zhat_all[idxs]])
            else:
                vis = Tensor(bundle.codebook[gt_tokens[idxs]])
            with no_grad():
                memory, mem_mask = bundle.translator.encode(
                    mat, lens, vis, train=False)

            def step(prefixes: np.ndarray, sent_idx: np.ndarray
                     ) -> np.ndarray:
                mem_rows = Tensor(memory.data[sent_idx])
                mask_rows = mem_mask[sent_idx]
                with no_grad():
                    rows = bundle.translator.decode_logprob_rows(
                        mem_rows, mask_rows, prefixes, train=False)
                return rows.data[:, -1, :]

            results = beam_search_group(
                step, len(part), BOS, EOS, bundle.translator.vocab_size,
                beam_cfg)
            for (idx, _), hyp in zip(part, results):
                word_text = world.codec.decode(hyp.ids)
                hyps[idx] = word_text.split()
    return [h for h in hyps], extras


def encode_sources(world: WorldBundle, split: str, mode: str, p: float,
                   k: int, mask_seed: Optional[int]
                   ) -> List[Tuple[int, ...]]:
    """Encode a split's sources with optional test-time masking."""
    samples = world.split(split)
    rng = np.random.default_rng(mask_seed if mask_seed is not None else 0)
    rows = []
    for s in samples:
        words = masked_source_words(s, mode, p, k, rng)
        rows.append(tuple(world.codec.encode(" ".join(words))))
    return rows


def agreement_rate(zhat: np.ndarray, z: np.ndarray) -> float:
    """Fraction of visual token positions where prediction equals truth."""
    if zhat.shape != z.shape:
        raise ContractViolation(
            f"token shape mismatch: {zhat.shape} vs {z.shape}")
    if zhat.size == 0:
        return 0.0
    return float((zhat == z).mean())


def bleu_on_split(hyps: Sequence[Sequence[str]], world: WorldBundle,
                  split: str) -> float:
    refs = [list(s.target) for s in world.split(split)]
    return corpus_bleu(hyps, refs)
