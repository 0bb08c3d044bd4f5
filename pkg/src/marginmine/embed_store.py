"""Embedding matrices and segment manifests: loading, saving, validation.

Binary layout (little-endian throughout)::

    0..3    b"EMB1"
    4..7    uint32 dim
    8..15   uint64 rows
    16..    rows * dim float32, row-major

Manifests are UTF-8 TSV files with the header
``segment_id recording_id lang start_ms end_ms``.
"""

from __future__ import annotations

import os
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    DegenerateInputError,
    FormatError,
    ParseError,
    TruncationError,
    ValidationError,
)
from .fileio import atomic_write_bytes, atomic_write_text

MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sIQ")
MANIFEST_COLUMNS = ("segment_id", "recording_id", "lang", "start_ms", "end_ms")
MANIFEST_HEADER = "\t".join(MANIFEST_COLUMNS)

ZERO_NORM = 1e-12
UNIT_TOLERANCE = 1e-4
_LANG_RE = re.compile(r"^[a-z]{2}$")


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Read-only ``rows x dim`` float32 matrix."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise DataError(f"embedding matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[1] < 1:
            raise DataError("embedding dim must be >= 1")
        if not np.isfinite(arr).all():
            bad = int(np.argwhere(~np.isfinite(arr))[0, 0])
            raise DataError(f"non-finite value in row {bad}")
        if arr is self.data and arr.flags.writeable:
            arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.rows


class UnitEmbeddingMatrix(EmbeddingMatrix):
    """Embedding matrix whose rows all have unit L2 norm."""

    def __post_init__(self):
        super().__post_init__()
        if self.rows:
            norms = np.sqrt(np.einsum("ij,ij->i", self.data, self.data, dtype=np.float64))
            off = np.abs(norms - 1.0) > UNIT_TOLERANCE
            if off.any():
                row = int(np.flatnonzero(off)[0])
                raise DataError(f"row {row} has norm {norms[row]:.6g}, expected 1")


def as_array(m) -> np.ndarray:
    """Return the float32 payload of a matrix object or array-like."""
    if isinstance(m, EmbeddingMatrix):
        return m.data
    return EmbeddingMatrix(np.asarray(m)).data


def load_embeddings(path: str | os.PathLike) -> EmbeddingMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        if raw[:4] != MAGIC[: len(raw)]:
            raise FormatError(f"{path}: bad magic {raw[:4]!r}")
        raise TruncationError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    magic, dim, rows = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if dim < 1:
        raise FormatError(f"{path}: dim must be >= 1")
    expected = _HEADER.size + rows * dim * 4
    if len(raw) != expected:
        raise TruncationError(
            f"{path}: header declares {rows}x{dim} ({expected} bytes) but file has {len(raw)} bytes"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(rows, dim)
    return EmbeddingMatrix(data)


def embeddings_to_bytes(m) -> bytes:
    arr = as_array(m)
    header = _HEADER.pack(MAGIC, arr.shape[1], arr.shape[0])
    return header + arr.astype("<f4", copy=False).tobytes(order="C")


def save_embeddings(m, path: str | os.PathLike) -> None:
    atomic_write_bytes(path, embeddings_to_bytes(m))


def l2_normalize(m) -> UnitEmbeddingMatrix:
    arr = as_array(m)
    norms = np.sqrt(np.einsum("ij,ij->i", arr, arr, dtype=np.float64))
    zero = norms < ZERO_NORM
    if zero.any():
        row = int(np.flatnonzero(zero)[0])
        raise DegenerateInputError(f"row {row} is a zero vector and cannot be normalized", row=row)
    out = (arr.astype(np.float64) / norms[:, None]).astype(np.float32)
    return UnitEmbeddingMatrix(out)


@dataclass(frozen=True)
class Segment:
    segment_id: str
    recording_id: str
    lang: str
    start_ms: int
    end_ms: int

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms


@dataclass
class SegmentManifest:
    entries: list[Segment] = field(default_factory=list)

    def __post_init__(self):
        self._index: dict[str, int] = {}
        for i, seg in enumerate(self.entries):
            if seg.end_ms <= seg.start_ms:
                raise ValidationError(
                    f"segment {seg.segment_id!r}: end_ms {seg.end_ms} <= start_ms {seg.start_ms}"
                )
            if seg.segment_id in self._index:
                raise ValidationError(f"duplicate segment_id {seg.segment_id!r}")
            self._index[seg.segment_id] = i

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> Segment:
        return self.entries[i]

    def __iter__(self):
        return iter(self.entries)

    def index_of(self, segment_id: str) -> int:
        try:
            return self._index[segment_id]
        except KeyError:
            raise ValidationError(f"unknown segment_id {segment_id!r}") from None

    def resolve(self, i: int) -> Segment:
        if not 0 <= i < len(self.entries):
            raise ValidationError(f"index {i} does not resolve in a manifest of {len(self.entries)}")
        return self.entries[i]


def is_lang_code(code: str) -> bool:
    return bool(_LANG_RE.match(code))


def check_pairing(manifest: SegmentManifest, m) -> None:
    rows = as_array(m).shape[0]
    if len(manifest) != rows:
        raise ValidationError(f"manifest has {len(manifest)} entries but matrix has {rows} rows")


def _parse_ms(value: str, name: str, lineno: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"{name} {value!r} is not an integer", line=lineno) from None


def parse_manifest(text: str) -> SegmentManifest:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].rstrip("\r") != MANIFEST_HEADER:
        raise ParseError(f"expected header {MANIFEST_HEADER!r}", line=1)
    entries: list[Segment] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != len(MANIFEST_COLUMNS):
            raise ParseError(f"expected {len(MANIFEST_COLUMNS)} fields, got {len(parts)}", line=lineno)
        seg_id, rec_id, lang, start, end = parts
        if not seg_id or not rec_id:
            raise ParseError("empty segment_id or recording_id", line=lineno)
        if not _LANG_RE.match(lang):
            raise ParseError(f"lang {lang!r} is not an ISO-639-1 code", line=lineno)
        start_ms = _parse_ms(start, "start_ms", lineno)
        end_ms = _parse_ms(end, "end_ms", lineno)
        if end_ms <= start_ms:
            raise ValidationError(f"line {lineno}: end_ms {end_ms} <= start_ms {start_ms}")
        if seg_id in seen:
            raise ValidationError(
                f"duplicate segment_id {seg_id!r} on lines {seen[seg_id]} and {lineno}"
            )
        seen[seg_id] = lineno
        entries.append(Segment(seg_id, rec_id, lang, start_ms, end_ms))
    return SegmentManifest(entries)


def load_manifest(path: str | os.PathLike) -> SegmentManifest:
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 ({exc.reason})") from None
    return parse_manifest(text)


def format_manifest(manifest: SegmentManifest) -> str:
    rows = [MANIFEST_HEADER]
    for s in manifest:
        rows.append(f"{s.segment_id}\t{s.recording_id}\t{s.lang}\t{s.start_ms}\t{s.end_ms}")
    return "\n".join(rows) + "\n"


def save_manifest(manifest: SegmentManifest, path: str | os.PathLike) -> None:
    atomic_write_text(path, format_manifest(manifest))
