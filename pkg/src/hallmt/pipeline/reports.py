"""Evaluation report container with deterministic CSV/text rendering.

Every row records the (checkpoint, dataset, config) triple it came from;
floats are rendered with fixed precision and no timestamps so reports
are byte-identical across reruns.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

CSV_COLUMNS = ("model", "mode", "mask_kind", "mask_param", "seed", "split",
               "bleu", "agreement", "checkpoint", "dataset", "config")


@dataclass
class EvalRow:
    model: str
    mode: str
    mask_kind: str
    mask_param: float
    seed: int
    split: str
    bleu: float
    agreement: Optional[float]
    checkpoint: str
    dataset: str
    config: str

    def as_record(self) -> Dict[str, str]:
        return {
            "model": self.model,
            "mode": self.mode,
            "mask_kind": self.mask_kind,
            "mask_param": f"{self.mask_param:.4f}",
            "seed": str(self.seed),
            "split": self.split,
            "bleu": f"{self.bleu:.4f}",
            "agreement": ("" if self.agreement is None
                          else f"{self.agreement:.4f}"),
            "checkpoint": self.checkpoint,
            "dataset": self.dataset,
            "config": self.config,
        }


@dataclass
class EvalReport:
    rows: List[EvalRow] = field(default_factory=list)
    length_bucket_bleu: Dict[int, float] = field(default_factory=dict)
    metadata: Dict[str, str] = field(default_factory=dict)

    def add(self, row: EvalRow) -> None:
        self.rows.append(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS,
                                lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row.as_record())
        return buf.getvalue()

    def to_text(self) -> str:
        lines = ["evaluation summary", "=================="]
        for key in sorted(self.metadata):
            lines.append(f"{key}: {self.metadata[key]}")
        if self.length_bucket_bleu:
            lines.append("per-length-bucket BLEU:")
            for bucket in sorted(self.length_bucket_bleu):
                lines.append(
                    f"  len<={bucket}: "
                    f"{self.length_bucket_bleu[bucket]:.4f}")
        for row in self.rows:
            rec = row.as_record()
            agreement = f" agreement={rec['agreement']}" \
                if rec["agreement"] else ""
            lines.append(
                f"{rec['model']} mode={rec['mode']} "
                f"{rec['mask_kind']}={rec['mask_param']} "
                f"seed={rec['seed']} split={rec['split']} "
                f"BLEU={rec['bleu']}{agreement}")
        return "\n".join(lines) + "\n"

    def write(self, directory: Path, stem: str) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        csv_path = directory / f"{stem}.csv"
        txt_path = directory / f"{stem}.txt"
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        txt_path.write_text(self.to_text(), encoding="utf-8")
        return csv_path, txt_path
