"""Synthetic grounded-translation world."""

from .corpus import (CorpusSplits, DiskSample, GroundedSample,
                     generate_corpus, read_image, read_split, write_image,
                     write_split)
from .language import describe_source, target_noun, translate_gold
from .masking import mask_entities, mask_progressive
from .render import CELL, IMAGE_SIZE, render
from .scenes import (COLORS, GRID, RELATIONS, SHAPES, SceneObject, SceneSpec,
                     enumerate_scenes, sample_scene)

__all__ = [
    "CELL", "COLORS", "CorpusSplits", "DiskSample", "GRID", "GroundedSample",
    "IMAGE_SIZE", "RELATIONS", "SHAPES", "SceneObject", "SceneSpec",
    "describe_source", "enumerate_scenes", "generate_corpus",
    "mask_entities", "mask_progressive", "read_image", "read_split",
    "render", "sample_scene", "target_noun", "translate_gold", "write_image",
    "write_split",
]
