"""Masking-sweep harness: paired text-only vs hallucinating evaluation."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..errors import ConfigurationError
from .checkpoint import Checkpoint
from .config import Config
from .evaluate import (EvalBundle, agreement_rate, bleu_on_split,
                       encode_sources, load_bundle, translate_corpus)
from .reports import EvalReport, EvalRow
from .stages import WorldBundle


def run_masking_suite(cfg: Config, world: WorldBundle,
                      text_ckpt: Checkpoint, halluc_ckpt: Checkpoint,
                      k_list: Sequence[int], p_list: Sequence[float],
                      seeds: Sequence[int], split: str = "test",
                      gt_tokens: Optional[np.ndarray] = None) -> EvalReport:
    """For each sweep point and seed, mask test sources and score both
    models; hallucinating rows also report prediction/ground-truth token
    agreement."""
    if p_list and any(getattr(s, "entity_spans", None) is None
                      for s in world.split(split)):
        raise ConfigurationError("entity sweep needs span annotations")
    text_bundle = load_bundle(cfg, text_ckpt, len(world.vocab))
    hall_bundle = load_bundle(cfg, halluc_ckpt, len(world.vocab))
    if hall_bundle.hallucinator is None:
        raise ConfigurationError(
            "hallucinating checkpoint lacks the hallucination model")
    report = EvalReport()
    report.metadata["dataset"] = f"synthetic/{split}"
    report.metadata["config_digest"] = cfg.digest().hex()
    report.metadata["text_checkpoint"] = text_ckpt.stage
    report.metadata["halluc_checkpoint"] = halluc_ckpt.stage

    sweep = [("progressive", float(k)) for k in k_list] + \
            [("entity", float(p)) for p in p_list]
    for seed in seeds:
        for kind, param in sweep:
            rows = encode_sources(
                world, split, kind,
                p=param if kind == "entity" else 0.0,
                k=int(param) if kind == "progressive" else 0,
                mask_seed=seed)
            for model_name, bundle in (("text-only", text_bundle),
                                       ("hallucinating", hall_bundle)):
                mode = "text-only" if model_name == "text-only" \
                    else "hallucinated"
                hyps, extras = translate_corpus(bundle, cfg, world, rows,
                                                mode, gt_tokens=gt_tokens)
                bleu = bleu_on_split(hyps, world, split)
                agreement = None
                if mode == "hallucinated" and gt_tokens is not None:
                    agreement = agreement_rate(
                        extras["hallucinated_tokens"], gt_tokens)
                report.add(EvalRow(
                    model=model_name, mode=mode, mask_kind=kind,
                    mask_param=param, seed=seed, split=split, bleu=bleu,
                    agreement=agreement, checkpoint=bundle.stage,
                    dataset=f"synthetic/{split}",
                    config=cfg.digest().hex()[:12]))
    return report
