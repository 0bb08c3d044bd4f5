"""Post-processing of mined alignments: overlap removal, duration statistics,
threshold selection, eval-set curation and session exclusion."""

from __future__ import annotations

import bisect
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .embed_store import SegmentManifest
from .errors import ConfigError
from .miner import Alignment, AlignmentSet, sort_key

MS_PER_HOUR = 3_600_000
DEFAULT_GRID = (1.06, 1.07, 1.08, 1.09)


@dataclass(frozen=True)
class OverlapPolicy:
    mutual_fraction: float = 0.20

    def __post_init__(self):
        if not 0 < self.mutual_fraction <= 1:
            raise ConfigError(f"mutual_fraction must be in (0, 1], got {self.mutual_fraction}")

    @property
    def ratio(self) -> Fraction:
        # repr round-trip so 0.2 means exactly 1/5
        return Fraction(repr(float(self.mutual_fraction)))


def overlap_ms(a_start: int, a_end: int, b_start: int, b_end: int) -> int:
    return max(0, min(a_end, b_end) - max(a_start, b_start))


def conflicts(a: tuple[int, int], b: tuple[int, int], ratio: Fraction) -> bool:
    """True when the overlap exceeds ``ratio`` of both spans' durations."""
    ov = overlap_ms(a[0], a[1], b[0], b[1])
    if ov == 0:
        return False
    num, den = ratio.numerator, ratio.denominator
    return ov * den > num * (a[1] - a[0]) and ov * den > num * (b[1] - b[0])


class _KeptSpans:
    """Kept spans of one recording, sorted by start, for range lookups."""

    def __init__(self):
        self.starts: list[int] = []
        self.spans: list[tuple[int, int]] = []
        self.longest = 0

    def conflicts_with(self, span: tuple[int, int], ratio: Fraction) -> bool:
        lo = bisect.bisect_right(self.starts, span[0] - self.longest)
        hi = bisect.bisect_left(self.starts, span[1])
        return any(conflicts(self.spans[i], span, ratio) for i in range(lo, hi))

    def add(self, span: tuple[int, int]) -> None:
        pos = bisect.bisect_right(self.starts, span[0])
        self.starts.insert(pos, span[0])
        self.spans.insert(pos, span)
        self.longest = max(self.longest, span[1] - span[0])


def remove_overlaps(a: AlignmentSet, manifest: SegmentManifest,
                    p: OverlapPolicy = OverlapPolicy()) -> AlignmentSet:
    """Greedy by descending score: drop an alignment whose source span conflicts
    with an already kept span of the same recording."""
    ratio = p.ratio
    kept_by_rec: dict[str, _KeptSpans] = defaultdict(_KeptSpans)
    kept = []
    for al in sorted(a, key=sort_key):
        seg = manifest.resolve(al.src_index)
        span = (seg.start_ms, seg.end_ms)
        spans = kept_by_rec[seg.recording_id]
        if spans.conflicts_with(span, ratio):
            continue
        spans.add(span)
        kept.append(al)
    return AlignmentSet(kept)


def source_ms(a: Iterable[Alignment], manifest: SegmentManifest) -> int:
    return sum(manifest.resolve(al.src_index).duration_ms for al in a)


def duration_stats(a: Iterable[Alignment], manifest: SegmentManifest) -> float:
    """Total source speech in hours."""
    return source_ms(a, manifest) / MS_PER_HOUR


@dataclass(frozen=True)
class ThresholdChoice:
    threshold: float
    hours: float
    shortfall: bool


def select_threshold(a: AlignmentSet, manifest: SegmentManifest, target_hours: float,
                     grid: Sequence[float] = DEFAULT_GRID) -> ThresholdChoice:
    """Largest grid threshold whose retained source hours still reach ``target_hours``."""
    grid = [float(t) for t in grid]
    if not grid:
        raise ConfigError("threshold grid is empty")
    if any(b < a_ for a_, b in zip(grid, grid[1:])):
        raise ConfigError("threshold grid must be sorted ascending")
    durations = [(al.score, manifest.resolve(al.src_index).duration_ms) for al in a]
    target_ms = target_hours * MS_PER_HOUR
    for t in reversed(grid):
        ms = sum(d for s, d in durations if s >= t)
        if ms >= target_ms:
            return ThresholdChoice(t, ms / MS_PER_HOUR, False)
    ms = sum(d for s, d in durations if s >= grid[0])
    return ThresholdChoice(grid[0], ms / MS_PER_HOUR, True)


def hours_by_threshold(a: AlignmentSet, manifest: SegmentManifest,
                       grid: Sequence[float] = DEFAULT_GRID) -> list[tuple[float, float]]:
    return [(t, duration_stats(a.at_least(t), manifest)) for t in grid]


@dataclass(frozen=True)
class SessionScore:
    session_id: str
    mean_score: float
    members: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if self.sample_count < 1:
            raise ConfigError(f"session {self.session_id!r} has no samples")

    @property
    def sample_count(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class Curation:
    selected: list[str]
    sessions: list[str]
    shortfall: bool


def curate_eval_set(sessions: Sequence[SessionScore], target_size: int) -> Curation:
    """Add whole sessions by decreasing mean score until the sample count reaches the target."""
    if target_size < 1:
        raise ConfigError(f"target_size must be >= 1, got {target_size}")
    selected: list[str] = []
    chosen: list[str] = []
    for sess in sorted(sessions, key=lambda s: (-s.mean_score, s.session_id)):
        if len(selected) >= target_size:
            break
        selected.extend(sess.members)
        chosen.append(sess.session_id)
    return Curation(selected, chosen, len(selected) < target_size)


def sessions_from_samples(samples: Iterable[tuple[str, str, float]]) -> list[SessionScore]:
    """Group ``(sample_id, session_id, score)`` rows into sessions with mean scores."""
    members: dict[str, list[str]] = {}
    scores: dict[str, list[float]] = {}
    for sample_id, session_id, score in samples:
        members.setdefault(session_id, []).append(sample_id)
        scores.setdefault(session_id, []).append(float(score))
    return [SessionScore(sid, sum(scores[sid]) / len(scores[sid]), tuple(members[sid])) for sid in members]


def exclude_sessions(a: AlignmentSet, manifest: SegmentManifest, session_ids: Iterable[str]) -> AlignmentSet:
    """Drop alignments whose source segment belongs to one of ``session_ids`` (matched on recording_id)."""
    banned = set(session_ids)
    return AlignmentSet([al for al in a if manifest.resolve(al.src_index).recording_id not in banned])


def alignment_metrics(a: AlignmentSet, src: SegmentManifest) -> list[tuple[str, str]]:
    scores = [al.score for al in a]
    total_ms = source_ms(a, src)
    rows = [
        ("alignments", str(len(scores))),
        ("source_ms", str(total_ms)),
        ("source_hours", f"{total_ms / MS_PER_HOUR:.6f}"),
    ]
    if scores:
        rows += [
            ("min_score", f"{min(scores):.6f}"),
            ("max_score", f"{max(scores):.6f}"),
            ("mean_score", f"{sum(scores) / len(scores):.6f}"),
        ]
    return rows


def hours_matrix(pairs: Iterable[tuple[AlignmentSet, SegmentManifest, SegmentManifest]]) -> dict[tuple[str, str], int]:
    """Source milliseconds per (source lang, target lang)."""
    cells: dict[tuple[str, str], int] = defaultdict(int)
    for aset, src, tgt in pairs:
        for al in aset:
            s = src.resolve(al.src_index)
            t = tgt.resolve(al.tgt_index)
            cells[(s.lang, t.lang)] += s.duration_ms
    return dict(cells)


def format_hours_matrix(cells: dict[tuple[str, str], int]) -> str:
    """Source languages as rows, target languages as columns, hours in cells."""
    langs = sorted({l for pair in cells for l in pair})
    lines = ["src\\tgt\t" + "\t".join(langs)]
    for s in langs:
        row = [s]
        for t in langs:
            row.append("-" if (s, t) not in cells else f"{cells[(s, t)] / MS_PER_HOUR:.3f}")
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def format_metrics(rows: list[tuple[str, str]]) -> str:
    return "metric\tvalue\n" + "".join(f"{k}\t{v}\n" for k, v in rows)
