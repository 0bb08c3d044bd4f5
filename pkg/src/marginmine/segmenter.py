"""Over-segmentation of VAD timelines into candidate spans.

Every contiguous run of speech intervals whose wall-clock span (first start
to last end, interior silences included) lies within the duration bounds
becomes a candidate; the miner later decides which granularity aligns.
"""

from __future__ import annotations

from dataclasses import dataclass

from .embed_store import Segment, SegmentManifest
from .errors import ConfigError, ParseError, ValidationError

TIMELINE_HEADER = "recording_id\tstart_ms\tend_ms"


@dataclass(frozen=True)
class DurationBounds:
    min_ms: int = 1000
    max_ms: int = 20000

    def __post_init__(self):
        if not 0 < self.min_ms < self.max_ms:
            raise ConfigError(f"need 0 < min_ms < max_ms, got {self.min_ms}, {self.max_ms}")


@dataclass(frozen=True)
class VadTimeline:
    recording_id: str
    intervals: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple((int(s), int(e)) for s, e in self.intervals))
        prev_end = None
        for i, (s, e) in enumerate(self.intervals):
            if e <= s:
                raise ValidationError(f"{self.recording_id}: interval {i} ({s}-{e}) is empty")
            if prev_end is not None and s < prev_end:
                raise ValidationError(f"{self.recording_id}: interval {i} starts before interval {i - 1} ends")
            prev_end = e


@dataclass(frozen=True)
class CandidateSegment:
    recording_id: str
    first_interval: int
    last_interval: int
    start_ms: int
    end_ms: int

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms

    @property
    def segment_id(self) -> str:
        return f"{self.recording_id}:{self.first_interval}:{self.last_interval}"


def generate_candidates(t: VadTimeline, b: DurationBounds = DurationBounds()) -> list[CandidateSegment]:
    out = []
    iv = t.intervals
    for i, (start, _) in enumerate(iv):
        for j in range(i, len(iv)):
            span = iv[j][1] - start
            if span > b.max_ms:
                # spans only grow with j
                break
            if span >= b.min_ms:
                out.append(CandidateSegment(t.recording_id, i, j, start, iv[j][1]))
    return out


def parse_timelines(text: str) -> list[VadTimeline]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].rstrip("\r") != TIMELINE_HEADER:
        raise ParseError(f"expected header {TIMELINE_HEADER!r}", line=1)
    groups: dict[str, list[tuple[int, int]]] = {}
    order: list[str] = []
    last = None
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 3 or not parts[0]:
            raise ParseError("expected recording_id, start_ms, end_ms", line=lineno)
        rec = parts[0]
        try:
            s, e = int(parts[1]), int(parts[2])
        except ValueError:
            raise ParseError("start_ms/end_ms must be integers", line=lineno) from None
        if rec != last:
            if rec in groups:
                raise ParseError(f"recording {rec!r} is not contiguous", line=lineno)
            groups[rec] = []
            order.append(rec)
            last = rec
        groups[rec].append((s, e))
    return [VadTimeline(rec, tuple(groups[rec])) for rec in order]


def candidates_manifest(timelines: list[VadTimeline], lang: str,
                        b: DurationBounds = DurationBounds()) -> SegmentManifest:
    entries = []
    for t in timelines:
        for c in generate_candidates(t, b):
            entries.append(Segment(c.segment_id, c.recording_id, lang, c.start_ms, c.end_ms))
    return SegmentManifest(entries)
