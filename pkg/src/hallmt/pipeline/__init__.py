"""Training orchestration, inference, metrics, and the CLI."""

from .beam import BeamConfig, Hypothesis, beam_search_group, enumerate_best
from .bleu import corpus_bleu
from .checkpoint import (Checkpoint, average_checkpoints, load_checkpoint,
                         save_checkpoint)
from .config import CONFIG_KEYS, Config, build_config, load_config
from .evaluate import (EvalBundle, agreement_rate, bleu_on_split,
                       encode_sources, hallucinate_tokens, load_bundle,
                       translate_corpus)
from .masksuite import run_masking_suite
from .reports import EvalReport, EvalRow
from .stages import (StageResult, StepLog, WorldBundle, build_models,
                     export_world, joint_loss, prepare_world,
                     run_stage_vae, run_transformer_stage)

__all__ = [
    "BeamConfig", "CONFIG_KEYS", "Checkpoint", "Config", "EvalBundle",
    "EvalReport", "EvalRow", "Hypothesis", "StageResult", "StepLog",
    "WorldBundle", "agreement_rate", "average_checkpoints",
    "beam_search_group", "bleu_on_split", "build_config", "build_models",
    "corpus_bleu", "encode_sources", "enumerate_best", "export_world",
    "hallucinate_tokens", "joint_loss", "load_bundle", "load_checkpoint",
    "load_config", "prepare_world", "run_masking_suite", "run_stage_vae",
    "run_transformer_stage", "save_checkpoint", "translate_corpus",
]
