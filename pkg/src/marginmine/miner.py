"""Bidirectional global mining with a margin threshold."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

from .embed_store import SegmentManifest
from .errors import ConfigError, ParseError, ValidationError
from .margin import MarginParams, margin_passes

DEFAULT_K = 16
DEFAULT_THRESHOLD = 1.06
ALIGNMENT_HEADER = "score\tsrc_segment_id\ttgt_segment_id"


@dataclass(frozen=True)
class MiningConfig:
    params: MarginParams = field(default_factory=lambda: MarginParams(DEFAULT_K))
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if not math.isfinite(self.threshold):
            raise ConfigError(f"threshold must be finite, got {self.threshold}")


class Alignment(NamedTuple):
    src_index: int
    tgt_index: int
    score: float


def sort_key(a: Alignment):
    return (-a.score, a.src_index, a.tgt_index)


@dataclass
class AlignmentSet:
    alignments: list[Alignment] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for a in self.alignments:
            pair = (a.src_index, a.tgt_index)
            if pair in seen:
                raise ValidationError(f"duplicate alignment pair {pair}")
            seen.add(pair)

    def __len__(self) -> int:
        return len(self.alignments)

    def __iter__(self) -> Iterator[Alignment]:
        return iter(self.alignments)

    def sorted(self) -> "AlignmentSet":
        return AlignmentSet(sorted(self.alignments, key=sort_key))

    def at_least(self, threshold: float) -> "AlignmentSet":
        return AlignmentSet([a for a in self.alignments if a.score >= threshold])


def merge_directions(forward: Iterable[Alignment], backward: Iterable[Alignment],
                     threshold: float) -> AlignmentSet:
    """Union of both directions keeping the max score per pair, thresholded and sorted."""
    best: dict[tuple[int, int], float] = {}
    for a in (*forward, *backward):
        pair = (a.src_index, a.tgt_index)
        if pair not in best or a.score > best[pair]:
            best[pair] = a.score
    kept = [Alignment(s, t, sc) for (s, t), sc in best.items() if sc >= threshold]
    kept.sort(key=sort_key)
    return AlignmentSet(kept)


def mine(src, tgt, cfg: MiningConfig = MiningConfig(), *, block_size: int | None = None,
         workers: int | None = None, backend: str | None = None) -> AlignmentSet:
    passes = margin_passes(src, tgt, cfg.params, backward=True,
                           block_size=block_size, workers=workers, backend=backend)
    fwd = passes.forward
    back = passes.backward
    forward = (Alignment(i, int(j), float(s)) for i, (j, s) in enumerate(zip(fwd.best_index, fwd.margin)))
    backward = (Alignment(int(i), j, float(s)) for j, (i, s) in enumerate(zip(back.best_index, back.margin)))
    return merge_directions(forward, backward, cfg.threshold)


def format_alignments(aset: AlignmentSet, src: SegmentManifest, tgt: SegmentManifest) -> str:
    lines = [ALIGNMENT_HEADER]
    for a in aset:
        lines.append(f"{a.score:.6f}\t{src.resolve(a.src_index).segment_id}\t{tgt.resolve(a.tgt_index).segment_id}")
    return "\n".join(lines) + "\n"


def parse_alignments(text: str, src: SegmentManifest, tgt: SegmentManifest) -> AlignmentSet:
    """Read an alignment TSV back into indices; scores keep their printed precision."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].rstrip("\r") != ALIGNMENT_HEADER:
        raise ParseError(f"expected header {ALIGNMENT_HEADER!r}", line=1)
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"expected 3 fields, got {len(parts)}", line=lineno)
        try:
            score = float(parts[0])
        except ValueError:
            raise ParseError(f"score {parts[0]!r} is not a number", line=lineno) from None
        if not math.isfinite(score):
            raise ParseError("score is not finite", line=lineno)
        try:
            out.append(Alignment(src.index_of(parts[1]), tgt.index_of(parts[2]), score))
        except ValidationError as exc:
            raise ParseError(str(exc), line=lineno) from None
    try:
        return AlignmentSet(out)
    except ValidationError as exc:
        raise ParseError(str(exc)) from None
