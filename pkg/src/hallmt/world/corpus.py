"""Grounded corpus generation, splitting, and on-disk interchange formats.

Corpus files follow the text-pipeline line format (UTF-8, one sentence
per line, parallel files aligned by line number). Images are flat binary
float arrays with a small header, plus a manifest mapping line number to
image file. Entity spans ride in a sidecar file.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..errors import ContractViolation
from .language import Span, describe_source, translate_gold
from .render import render
from .scenes import SceneSpec, sample_scene

IMAGE_MAGIC = b"HMIMG1\x00\x00"


@dataclass(frozen=True)
class GroundedSample:
    """A (source sentence, image, target sentence) triplet with spans."""

    source: Tuple[str, ...]
    target: Tuple[str, ...]
    entity_spans: Tuple[Span, ...]
    scene: SceneSpec
    sample_id: int

    def image(self) -> np.ndarray:
        return render(self.scene)


@dataclass
class CorpusSplits:
    train: List[GroundedSample]
    valid: List[GroundedSample]
    test: List[GroundedSample]

    def all_samples(self) -> List[GroundedSample]:
        return self.train + self.valid + self.test


def _split_bucket(source_words: Sequence[str]) -> float:
    """Deterministic position in [0, 1) from the source sentence hash."""
    text = " ".join(source_words).encode("utf-8")
    digest = hashlib.sha256(text).digest()
    return int.from_bytes(digest[:8], "big") / 2.0 ** 64


def generate_corpus(n: int, seed: int) -> CorpusSplits:
    """n grounded samples split 80/10/10 by source-sentence hash.

    Hash-based splitting guarantees that no source sentence (hence no
    scene description) appears in more than one split.
    """
    if n < 10:
        raise ContractViolation(f"corpus size must be >= 10, got {n}")
    rng = np.random.default_rng(seed)
    splits = CorpusSplits([], [], [])
    for i in range(n):
        scene = sample_scene(rng)
        words, spans = describe_source(scene)
        sample = GroundedSample(
            source=tuple(words), target=tuple(translate_gold(scene)),
            entity_spans=tuple(spans), scene=scene, sample_id=i)
        bucket = _split_bucket(words)
        if bucket < 0.8:
            splits.train.append(sample)
        elif bucket < 0.9:
            splits.valid.append(sample)
        else:
            splits.test.append(sample)
    return splits


def write_image(path: Path, image: np.ndarray) -> None:
    h, w, c = image.shape
    with open(path, "wb") as fh:
        fh.write(IMAGE_MAGIC)
        fh.write(struct.pack("<III", h, w, c))
        fh.write(np.ascontiguousarray(image, dtype=np.float64).tobytes())


def read_image(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(IMAGE_MAGIC))
        if magic != IMAGE_MAGIC:
            raise ContractViolation(f"{path}: bad image magic {magic!r}")
        h, w, c = struct.unpack("<III", fh.read(12))
        data = np.frombuffer(fh.read(h * w * c * 8), dtype=np.float64)
    return data.reshape(h, w, c)


def write_split(directory: Path, name: str,
                samples: Sequence[GroundedSample]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    img_dir = directory / f"{name}_images"
    img_dir.mkdir(exist_ok=True)
    src_lines, tgt_lines, span_lines, manifest = [], [], [], []
    for line_no, sample in enumerate(samples):
        src_lines.append(" ".join(sample.source))
        tgt_lines.append(" ".join(sample.target))
        span_lines.append(",".join(f"{lo}:{hi}"
                                   for lo, hi in sample.entity_spans))
        img_name = f"{line_no:06d}.img"
        write_image(img_dir / img_name, sample.image())
        manifest.append(f"{line_no}\t{name}_images/{img_name}")
    (directory / f"{name}.src").write_text("\n".join(src_lines) + "\n",
                                           encoding="utf-8")
    (directory / f"{name}.tgt").write_text("\n".join(tgt_lines) + "\n",
                                           encoding="utf-8")
    (directory / f"{name}.spans").write_text("\n".join(span_lines) + "\n",
                                             encoding="utf-8")
    (directory / f"{name}.manifest").write_text("\n".join(manifest) + "\n",
                                                encoding="utf-8")


@dataclass(frozen=True)
class DiskSample:
    """A sample reloaded from the interchange files (no SceneSpec)."""

    source: Tuple[str, ...]
    target: Tuple[str, ...]
    entity_spans: Tuple[Span, ...]
    image_path: Path
    sample_id: int

    def image(self) -> np.ndarray:
        return read_image(self.image_path)


def read_split(directory: Path, name: str) -> List[DiskSample]:
    directory = Path(directory)
    src = (directory / f"{name}.src").read_text(encoding="utf-8").splitlines()
    tgt = (directory / f"{name}.tgt").read_text(encoding="utf-8").splitlines()
    spans = (directory / f"{name}.spans").read_text(
        encoding="utf-8").splitlines()
    manifest: Dict[int, str] = {}
    for line in (directory / f"{name}.manifest").read_text(
            encoding="utf-8").splitlines():
        idx, rel = line.split("\t")
        manifest[int(idx)] = rel
    if not (len(src) == len(tgt) == len(spans) == len(manifest)):
        raise ContractViolation(
            f"split {name}: inconsistent line counts "
            f"({len(src)}/{len(tgt)}/{len(spans)}/{len(manifest)})")
    samples = []
    for i, (s, t, sp) in enumerate(zip(src, tgt, spans)):
        parsed = tuple(tuple(map(int, chunk.split(":")))
                       for chunk in sp.split(",") if chunk)
        samples.append(DiskSample(
            source=tuple(s.split()), target=tuple(t.split()),
            entity_spans=parsed, image_path=directory / manifest[i],
            sample_id=i))
    return samples
