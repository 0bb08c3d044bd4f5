"""Command-line front end: segment, mine, postprocess, evaluate, stats,
select-threshold, curate.

Exit status is 0 on success, 2 on invalid input or configuration (one
``error<TAB>kind<TAB>message`` line on stderr) and 1 on I/O failure.
Outputs are written atomically.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from . import _backend
from .embed_store import (
    check_pairing,
    format_manifest,
    is_lang_code,
    l2_normalize,
    load_embeddings,
    load_manifest,
)
from .errors import ConfigError, MinerError, ParseError, ValidationError
from .fileio import atomic_write_text
from .margin import MarginParams, similarity_search_error
from .miner import DEFAULT_K, DEFAULT_THRESHOLD, MiningConfig, format_alignments, mine, parse_alignments
from .postprocess import (
    DEFAULT_GRID,
    OverlapPolicy,
    alignment_metrics,
    curate_eval_set,
    exclude_sessions,
    format_hours_matrix,
    format_metrics,
    hours_matrix,
    remove_overlaps,
    select_threshold,
    sessions_from_samples,
)
from .segmenter import DurationBounds, candidates_manifest, parse_timelines

SAMPLES_HEADER = "sample_id\tsession_id\tscore"


def _compute_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (default: $MINER_WORKERS or 1)")
    p.add_argument("--block-size", type=int, default=None, help="query rows per task")
    p.add_argument("--backend", choices=["auto", "compiled", "python"], default="auto")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="marginmine", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="expand VAD timelines into candidate segments")
    p.add_argument("--timeline", required=True)
    p.add_argument("--lang", required=True, help="ISO-639-1 code written to every candidate")
    p.add_argument("--min-ms", type=int, default=1000)
    p.add_argument("--max-ms", type=int, default=20000)
    p.add_argument("--out", required=True)

    p = sub.add_parser("mine", help="bidirectional margin mining")
    p.add_argument("--src", required=True)
    p.add_argument("--src-manifest", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--tgt-manifest", required=True)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", required=True)
    _compute_opts(p)

    p = sub.add_parser("postprocess", help="session exclusion, score floor and overlap removal")
    p.add_argument("--alignments", required=True)
    p.add_argument("--src-manifest", required=True)
    p.add_argument("--tgt-manifest", required=True)
    p.add_argument("--overlap", type=float, default=0.20)
    p.add_argument("--min-score", type=float, default=None)
    p.add_argument("--exclude-sessions", default=None, help="file with one recording_id per line")
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="margin similarity-search error rate")
    p.add_argument("--src", required=True)
    p.add_argument("--refs", required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--out", default=None)
    _compute_opts(p)

    p = sub.add_parser("stats", help="duration statistics")
    p.add_argument("--alignments", action="append", required=True)
    p.add_argument("--src-manifest", action="append", required=True)
    p.add_argument("--tgt-manifest", action="append", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--matrix-out", default=None)

    p = sub.add_parser("select-threshold", help="highest grid threshold keeping enough hours")
    p.add_argument("--alignments", required=True)
    p.add_argument("--src-manifest", required=True)
    p.add_argument("--tgt-manifest", required=True)
    p.add_argument("--target-hours", type=float, default=1000.0)
    p.add_argument("--grid", default=",".join(str(t) for t in DEFAULT_GRID))
    p.add_argument("--out", default=None)

    p = sub.add_parser("curate", help="pick whole sessions by mean score for an eval set")
    p.add_argument("--samples", required=True, help=f"TSV with header {SAMPLES_HEADER!r}")
    p.add_argument("--target-size", type=int, default=1000)
    p.add_argument("--out", required=True)
    return parser


_INPUT_FLAGS = ("timeline", "src", "src_manifest", "tgt", "tgt_manifest", "refs",
                "alignments", "exclude_sessions", "samples")


def _check_inputs(args: argparse.Namespace) -> None:
    for name in _INPUT_FLAGS:
        value = getattr(args, name, None)
        for path in value if isinstance(value, list) else [value]:
            if path is not None and not Path(path).is_file():
                raise ValidationError(f"--{name.replace('_', '-')}: no such file {path!r}")


def _read(path: str) -> str:
    try:
        return Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 ({exc.reason})") from None


def _compute_kw(args) -> dict:
    backend = None if args.backend == "auto" else args.backend
    if backend is not None:
        _backend.get(backend)
    return {"workers": args.workers, "block_size": args.block_size, "backend": backend}


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


def cmd_segment(args) -> None:
    bounds = DurationBounds(args.min_ms, args.max_ms)
    timelines = parse_timelines(_read(args.timeline))
    if not is_lang_code(args.lang):
        raise ConfigError(f"--lang {args.lang!r} is not an ISO-639-1 code")
    manifest = candidates_manifest(timelines, args.lang, bounds)
    atomic_write_text(args.out, format_manifest(manifest))


def _load_pool(emb: str, manifest: str):
    m = load_manifest(manifest)
    e = load_embeddings(emb)
    check_pairing(m, e)
    return l2_normalize(e), m


def cmd_mine(args) -> None:
    src, src_m = _load_pool(args.src, args.src_manifest)
    tgt, tgt_m = _load_pool(args.tgt, args.tgt_manifest)
    cfg = MiningConfig(MarginParams(args.k), args.threshold)
    aset = mine(src, tgt, cfg, **_compute_kw(args))
    atomic_write_text(args.out, format_alignments(aset, src_m, tgt_m))


def cmd_postprocess(args) -> None:
    src_m = load_manifest(args.src_manifest)
    tgt_m = load_manifest(args.tgt_manifest)
    aset = parse_alignments(_read(args.alignments), src_m, tgt_m)
    if args.exclude_sessions:
        banned = [line.strip() for line in _read(args.exclude_sessions).splitlines() if line.strip()]
        aset = exclude_sessions(aset, src_m, banned)
    if args.min_score is not None:
        aset = aset.at_least(args.min_score)
    aset = remove_overlaps(aset, src_m, OverlapPolicy(args.overlap))
    atomic_write_text(args.out, format_alignments(aset, src_m, tgt_m))


def cmd_evaluate(args) -> None:
    src = l2_normalize(load_embeddings(args.src))
    refs = l2_normalize(load_embeddings(args.refs))
    err = similarity_search_error(src, refs, MarginParams(args.k), **_compute_kw(args))
    _emit(f"error_rate\t{err:.6f}\n", args.out)


def cmd_stats(args) -> None:
    n = len(args.alignments)
    if len(args.src_manifest) != n or len(args.tgt_manifest) != n:
        raise ConfigError("--alignments, --src-manifest and --tgt-manifest must be given the same number of times")
    pairs = []
    for ali, sm, tm in zip(args.alignments, args.src_manifest, args.tgt_manifest):
        src_m, tgt_m = load_manifest(sm), load_manifest(tm)
        pairs.append((parse_alignments(_read(ali), src_m, tgt_m), src_m, tgt_m))
    rows = []
    for aset, src_m, _ in pairs:
        rows.extend(alignment_metrics(aset, src_m))
    if n > 1:
        merged = {}
        for key, value in rows:
            if key in ("alignments", "source_ms"):
                merged[key] = merged.get(key, 0) + int(value)
        rows = [("alignments", str(merged["alignments"])), ("source_ms", str(merged["source_ms"])),
                ("source_hours", f"{merged['source_ms'] / 3_600_000:.6f}"), ("inputs", str(n))]
    text = format_metrics(rows)
    matrix = format_hours_matrix(hours_matrix(pairs)) if args.matrix_out else None
    atomic_write_text(args.out, text)
    if matrix is not None:
        atomic_write_text(args.matrix_out, matrix)


def _parse_grid(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"--grid: cannot parse {text!r}") from None


def cmd_select_threshold(args) -> None:
    src_m = load_manifest(args.src_manifest)
    tgt_m = load_manifest(args.tgt_manifest)
    aset = parse_alignments(_read(args.alignments), src_m, tgt_m)
    choice = select_threshold(aset, src_m, args.target_hours, _parse_grid(args.grid))
    text = format_metrics([
        ("threshold", f"{choice.threshold:g}"),
        ("source_hours", f"{choice.hours:.6f}"),
        ("shortfall", str(int(choice.shortfall))),
    ])
    _emit(text, args.out)


def _parse_samples(text: str) -> list[tuple[str, str, float]]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].rstrip("\r") != SAMPLES_HEADER:
        raise ParseError(f"expected header {SAMPLES_HEADER!r}", line=1)
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError("expected sample_id, session_id, score", line=lineno)
        try:
            out.append((parts[0], parts[1], float(parts[2])))
        except ValueError:
            raise ParseError(f"score {parts[2]!r} is not a number", line=lineno) from None
    return out


def cmd_curate(args) -> None:
    samples = _parse_samples(_read(args.samples))
    session_of = {sid: sess for sid, sess, _ in samples}
    result = curate_eval_set(sessions_from_samples(samples), args.target_size)
    body = "sample_id\tsession_id\n" + "".join(f"{s}\t{session_of[s]}\n" for s in result.selected)
    atomic_write_text(args.out, body)
    sys.stdout.write(format_metrics([
        ("selected", str(len(result.selected))),
        ("sessions", str(len(result.sessions))),
        ("shortfall", str(int(result.shortfall))),
    ]))


COMMANDS = {
    "segment": cmd_segment,
    "mine": cmd_mine,
    "postprocess": cmd_postprocess,
    "evaluate": cmd_evaluate,
    "stats": cmd_stats,
    "select-threshold": cmd_select_threshold,
    "curate": cmd_curate,
}


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _check_inputs(args)
        COMMANDS[args.command](args)
    except MinerError as exc:
        print(f"error\t{exc.kind}\t{exc}", file=sys.stderr)
        return 2
    except ImportError as exc:
        print(f"error\tconfig\t{exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error\tio\t{exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())
