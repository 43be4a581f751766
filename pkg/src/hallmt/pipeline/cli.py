"""Command-line surface.

Subcommands: gen-data, train-vae, train-halluc, train-joint,
train-textonly, translate, evaluate, mask-suite, average-ckpt,
inspect-ckpt. Configuration comes from a flat key=value file plus flag
overrides (flags win). Exit codes: 0 success, 1 contract violation,
2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from ..errors import ConfigurationError, ContractViolation, NumericFailure
from .beam import BeamConfig
from .checkpoint import (Checkpoint, average_checkpoints, load_checkpoint,
                         save_checkpoint)
from .config import CONFIG_KEYS, Config, load_config
from .evaluate import (agreement_rate, bleu_on_split, encode_sources,
                       load_bundle, translate_corpus)
from .masksuite import run_masking_suite
from .reports import EvalReport, EvalRow
from .stages import (WorldBundle, export_world, load_vq_from_checkpoint,
                     prepare_world, run_stage_vae, run_transformer_stage)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hallmt",
        description="grounded translation with hallucinated visual tokens")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="flat key=value config file")
        p.add_argument("--set", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="override a config key (repeatable)")

    common(sub.add_parser("gen-data", help="generate and export the corpus"))
    common(sub.add_parser("train-vae", help="stage 1: visual encoder"))
    common(sub.add_parser("train-halluc",
                          help="stage 2: hallucination pretraining"))
    common(sub.add_parser("train-joint", help="stage 3: joint training"))
    common(sub.add_parser("train-textonly", help="text-only baseline"))

    p = sub.add_parser("translate", help="decode a source file")
    common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--mode", default="hallucinated",
                   choices=("text-only", "hallucinated",
                            "ground-truth-visual"))
    p.add_argument("--input", required=True, help="source sentences file")
    p.add_argument("--output", required=True, help="hypotheses file")
    p.add_argument("--beam", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)

    p = sub.add_parser("evaluate", help="BLEU on a split or hypothesis file")
    common(p)
    p.add_argument("--ckpt", default=None)
    p.add_argument("--mode", default="hallucinated",
                   choices=("text-only", "hallucinated",
                            "ground-truth-visual"))
    p.add_argument("--split", default="test",
                   choices=("train", "valid", "test"))
    p.add_argument("--hyp", default=None,
                   help="pre-decoded hypotheses file (skips decoding)")
    p.add_argument("--report-stem", default="evaluate")

    p = sub.add_parser("mask-suite", help="masking sweep over k and p")
    common(p)
    p.add_argument("--ckpt-text", required=True)
    p.add_argument("--ckpt-halluc", required=True)
    p.add_argument("--k", type=int, nargs="*", default=[])
    p.add_argument("--p", type=float, nargs="*", default=[])
    p.add_argument("--seeds", type=int, nargs="*", default=[0])
    p.add_argument("--report-stem", default="mask_suite")

    p = sub.add_parser("average-ckpt", help="average checkpoints")
    p.add_argument("--out", required=True)
    p.add_argument("checkpoints", nargs="+")

    p = sub.add_parser("inspect-ckpt", help="describe a checkpoint")
    p.add_argument("checkpoint")
    return parser


def _overrides(pairs: List[str]) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigurationError(
                f"--set expects KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _config(args) -> Config:
    return load_config(args.config, _overrides(args.set))


def _world(cfg: Config) -> WorldBundle:
    return prepare_world(cfg)


def _load_world_with_tokens(cfg: Config) -> WorldBundle:
    from ..vq.token_cache import read_token_cache
    world = prepare_world(cfg)
    for split in ("train", "valid", "test"):
        path = cfg.work_dir() / "ckpt" / f"tokens_{split}.bin"
        if path.exists():
            tokens, _ = read_token_cache(path)
            world.tokens[split] = tokens
    return world


def _cmd_gen_data(args) -> int:
    cfg = _config(args)
    world = _world(cfg)
    out = export_world(cfg, world)
    print(f"corpus written to {out} "
          f"(train/valid/test = {len(world.splits.train)}/"
          f"{len(world.splits.valid)}/{len(world.splits.test)})")
    return 0


def _cmd_train_vae(args) -> int:
    cfg = _config(args)
    world = _world(cfg)
    _, path = run_stage_vae(cfg, world)
    print(f"stage-1 checkpoint: {path}")
    return 0


def _run_transformer(args, stage: str) -> int:
    cfg = _config(args)
    world = _load_world_with_tokens(cfg)
    vq_model = None
    init_from = None
    if stage != "textonly":
        vae_path = cfg.work_dir() / "ckpt" / "vae.ckpt"
        if not vae_path.exists():
            raise ConfigurationError(
                f"stage '{stage}' needs {vae_path}; run train-vae first")
        vq_model = load_vq_from_checkpoint(cfg, load_checkpoint(vae_path))
        if not world.tokens:
            raise ConfigurationError(
                "visual token caches missing; rerun train-vae")
    if stage == "joint":
        cands = sorted((cfg.work_dir() / "ckpt").glob(
            "hallucinator_*.ckpt"))
        if not cands:
            raise ConfigurationError(
                "stage 'joint' needs a hallucinator checkpoint; "
                "run train-halluc first")
        init_from = load_checkpoint(cands[-1]).params()
    result = run_transformer_stage(stage, cfg, world, vq_model,
                                   init_from=init_from)
    last = result.logs[-1] if result.logs else None
    print(f"stage {stage} finished at step {last.step if last else 0}; "
          f"final loss {last.total if last else float('nan'):.6f}")
    print(f"checkpoints: {[str(p) for p in result.checkpoints]}")
    return 0


def _cmd_translate(args) -> int:
    cfg = _config(args)
    world = _load_world_with_tokens(cfg)
    ckpt = load_checkpoint(args.ckpt)
    bundle = load_bundle(cfg, ckpt, len(world.vocab))
    beam_cfg = BeamConfig(
        beam=args.beam if args.beam is not None else cfg["beam"],
        alpha=args.alpha if args.alpha is not None else cfg["alpha"],
        max_len=cfg["max_len"])
    lines = Path(args.input).read_text(encoding="utf-8").splitlines()
    rows = [tuple(world.codec.encode(line)) for line in lines if line]
    gt = world.tokens.get("test")
    hyps, _ = translate_corpus(bundle, cfg, world, rows, args.mode,
                               gt_tokens=gt, beam_cfg=beam_cfg)
    text = "\n".join(" ".join(h) for h in hyps) + "\n"
    Path(args.output).write_text(text, encoding="utf-8")
    print(f"wrote {len(hyps)} hypotheses to {args.output}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _config(args)
    world = _load_world_with_tokens(cfg)
    refs = [list(s.target) for s in world.split(args.split)]
    report = EvalReport()
    report.metadata["dataset"] = f"synthetic/{args.split}"
    report.metadata["config_digest"] = cfg.digest().hex()
    agreement = None
    if args.hyp:
        hyps = [line.split() for line in
                Path(args.hyp).read_text(encoding="utf-8").splitlines()]
        if len(hyps) != len(refs):
            raise ContractViolation(
                f"hypothesis file has {len(hyps)} lines, split has "
                f"{len(refs)}")
        model_name = "external"
        checkpoint_name = args.hyp
    else:
        if not args.ckpt:
            raise ConfigurationError("evaluate needs --ckpt or --hyp")
        ckpt = load_checkpoint(args.ckpt)
        bundle = load_bundle(cfg, ckpt, len(world.vocab))
        rows = encode_sources(world, args.split, "none", 0.0, 0, None)
        gt = world.tokens.get(args.split)
        hyps, extras = translate_corpus(bundle, cfg, world, rows, args.mode,
                                        gt_tokens=gt)
        if args.mode == "hallucinated" and gt is not None:
            agreement = agreement_rate(extras["hallucinated_tokens"], gt)
        model_name = ckpt.stage
        checkpoint_name = args.ckpt
    from .bleu import corpus_bleu
    bleu = corpus_bleu(hyps, refs)
    buckets: Dict[int, List[int]] = {}
    for i, ref in enumerate(refs):
        bucket = 4 * ((len(ref) + 3) // 4)
        buckets.setdefault(bucket, []).append(i)
    for bucket in sorted(buckets):
        idx = buckets[bucket]
        report.length_bucket_bleu[bucket] = corpus_bleu(
            [hyps[i] for i in idx], [refs[i] for i in idx])
    report.add(EvalRow(
        model=model_name, mode=args.mode, mask_kind="none", mask_param=0.0,
        seed=cfg["seed"], split=args.split, bleu=bleu, agreement=agreement,
        checkpoint=str(checkpoint_name), dataset=f"synthetic/{args.split}",
        config=cfg.digest().hex()[:12]))
    csv_path, txt_path = report.write(cfg.work_dir() / "reports",
                                      args.report_stem)
    print(f"BLEU {bleu:.4f} on {args.split}; report at {csv_path}")
    return 0


def _cmd_mask_suite(args) -> int:
    cfg = _config(args)
    world = _load_world_with_tokens(cfg)
    report = run_masking_suite(
        cfg, world, load_checkpoint(args.ckpt_text),
        load_checkpoint(args.ckpt_halluc), args.k, args.p, args.seeds,
        gt_tokens=world.tokens.get("test"))
    csv_path, _ = report.write(cfg.work_dir() / "reports", args.report_stem)
    print(f"mask suite report at {csv_path}")
    return 0


def _cmd_average(args) -> int:
    ckpts = [load_checkpoint(p) for p in args.checkpoints]
    save_checkpoint(args.out, average_checkpoints(ckpts))
    print(f"averaged {len(ckpts)} checkpoints into {args.out}")
    return 0


def _cmd_inspect(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    print(f"stage: {ckpt.stage}")
    print(f"step: {ckpt.step}")
    print(f"recipe digest: {ckpt.digest.hex()}")
    print(f"tensors: {len(ckpt.tensors)} "
          f"(params {len(ckpt.params())}, "
          f"optimizer {len(ckpt.optimizer_state())})")
    for name in sorted(ckpt.tensors):
        print(f"  {name} {tuple(ckpt.tensors[name].shape)}")
    return 0


_HANDLERS = {
    "gen-data": _cmd_gen_data,
    "train-vae": _cmd_train_vae,
    "train-halluc": lambda a: _run_transformer(a, "hallucinator"),
    "train-joint": lambda a: _run_transformer(a, "joint"),
    "train-textonly": lambda a: _run_transformer(a, "textonly"),
    "translate": _cmd_translate,
    "evaluate": _cmd_evaluate,
    "mask-suite": _cmd_mask_suite,
    "average-ckpt": _cmd_average,
    "inspect-ckpt": _cmd_inspect,
}


def cli(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, matching configuration errors
        return 2 if exc.code not in (0, None) else 0
    try:
        return _HANDLERS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ContractViolation, NumericFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli())
