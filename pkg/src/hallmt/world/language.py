"""Source templates and the deterministic synthetic target language.

Source: "a red circle left-of a blue square" -- article, color word,
shape word per object, one relation word between consecutive objects.
Each color word and each shape word is one visual-entity span.

Target: frame words around object phrases in reversed order with reversed
relations. An object phrase is an article agreeing with the color plus a
fused noun built from a shape stem and a color suffix, so the noun is a
joint function of both attributes and any two scenes differing in one
attribute differ in the target.
"""

from __future__ import annotations

from typing import List, Tuple

from .scenes import SceneObject, SceneSpec

Span = Tuple[int, int]

TARGET_FRAME_OPEN = "dek"
TARGET_FRAME_CLOSE = "yo"

_TARGET_RELATION = {"left-of": "navel", "above": "supra"}
_ARTICLE_BY_COLOR = {"red": "pa", "green": "po", "blue": "pu"}
_STEM_BY_SHAPE = {"circle": "krul", "square": "kvad", "triangle": "trin"}
_SUFFIX_BY_COLOR = {"red": "or", "green": "es", "blue": "ab"}


def describe_source(scene: SceneSpec) -> Tuple[List[str], List[Span]]:
    """Source words and the visual-entity spans (one span per color word
    and one per shape word)."""
    words: List[str] = []
    spans: List[Span] = []
    for i, obj in enumerate(scene.objects):
        if i > 0:
            words.append(scene.relations[i - 1])
        words.append("a")
        spans.append((len(words), len(words) + 1))
        words.append(obj.color)
        spans.append((len(words), len(words) + 1))
        words.append(obj.shape)
    return words, spans


def target_noun(obj: SceneObject) -> str:
    return _STEM_BY_SHAPE[obj.shape] + _SUFFIX_BY_COLOR[obj.color]


def translate_gold(scene: SceneSpec) -> List[str]:
    """Deterministic target: frame + reversed object phrases/relations."""
    words: List[str] = [TARGET_FRAME_OPEN]
    n = len(scene.objects)
    for j, obj in enumerate(reversed(scene.objects)):
        if j > 0:
            rel = scene.relations[n - 1 - j]
            words.append(_TARGET_RELATION[rel])
        words.append(_ARTICLE_BY_COLOR[obj.color])
        words.append(target_noun(obj))
    words.append(TARGET_FRAME_CLOSE)
    return words
