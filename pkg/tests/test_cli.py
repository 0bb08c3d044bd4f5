import numpy as np
import pytest

from marginmine.cli import run
from marginmine.embed_store import load_manifest, save_embeddings

from .clidata import build_corpus


def mine_args(p, out, *extra):
    return ["mine", "--src", str(p["src"]), "--src-manifest", str(p["src_manifest"]),
            "--tgt", str(p["tgt"]), "--tgt-manifest", str(p["tgt_manifest"]), "--out", str(out), *extra]


@pytest.fixture
def corpus(tmp_path):
    return build_corpus(tmp_path)


def test_segment(tmp_path):
    tl = tmp_path / "vad.tsv"
    tl.write_text("recording_id\tstart_ms\tend_ms\nr1\t0\t2000\nr1\t3000\t5000\nr1\t6000\t30000\n")
    out = tmp_path / "cand.tsv"
    assert run(["segment", "--timeline", str(tl), "--lang", "hr", "--out", str(out)]) == 0
    assert out.read_text() == (
        "segment_id\trecording_id\tlang\tstart_ms\tend_ms\n"
        "r1:0:0\tr1\thr\t0\t2000\nr1:0:1\tr1\thr\t0\t5000\nr1:1:1\tr1\thr\t3000\t5000\n"
    )
    assert len(load_manifest(out)) == 3


def test_segment_bad_lang(tmp_path, capsys):
    tl = tmp_path / "vad.tsv"
    tl.write_text("recording_id\tstart_ms\tend_ms\nr1\t0\t2000\n")
    assert run(["segment", "--timeline", str(tl), "--lang", "english", "--out", str(tmp_path / "o")]) == 2
    assert capsys.readouterr().err.startswith("error\tconfig\t")


def test_mine_defaults_and_format(corpus, tmp_path):
    out = tmp_path / "ali.tsv"
    assert run(mine_args(corpus, out, "--k", "16", "--threshold", "1.06")) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "score\tsrc_segment_id\ttgt_segment_id"
    out2 = tmp_path / "ali_low.tsv"
    assert run(mine_args(corpus, out2, "--threshold", "0.1")) == 0
    rows = [l.split("\t") for l in out2.read_text().splitlines()[1:]]
    assert rows, "expected planted pairs above 0.1"
    for score, s, t in rows:
        assert len(score.split(".")[1]) == 6
        assert s.startswith("es") and t.startswith("en")
    scores = [float(r[0]) for r in rows]
    assert scores == sorted(scores, reverse=True)


def test_mine_dim_mismatch_leaves_no_output(corpus, tmp_path, capsys):
    save_embeddings(np.ones((48, 7), dtype=np.float32), corpus["tgt"])
    out = tmp_path / "ali.tsv"
    assert run(mine_args(corpus, out)) == 2
    assert not out.exists()
    err = capsys.readouterr().err.strip().split("\t")
    assert err[:2] == ["error", "config"]
    assert list(tmp_path.glob(".ali.tsv*")) == []


def test_mine_manifest_count_mismatch(corpus, tmp_path):
    corpus["tgt_manifest"].write_text(corpus["tgt_manifest"].read_text().rsplit("\n", 2)[0] + "\n")
    assert run(mine_args(corpus, tmp_path / "ali.tsv")) == 2


def test_unknown_flag(corpus, tmp_path):
    assert run(mine_args(corpus, tmp_path / "a.tsv", "--bogus")) == 2


def test_missing_input(tmp_path):
    assert run(["evaluate", "--src", str(tmp_path / "nope.emb"), "--refs", str(tmp_path / "nope.emb")]) == 2


def test_unwritable_output_is_io_error(corpus, tmp_path, capsys):
    assert run(mine_args(corpus, tmp_path / "no_such_dir" / "ali.tsv")) == 1
    assert capsys.readouterr().err.startswith("error\tio\t")


def test_evaluate_prints_one_line(corpus, capsys):
    assert run(["evaluate", "--src", str(corpus["src"]), "--refs", str(corpus["src"]), "--k", "4"]) == 0
    assert capsys.readouterr().out == "error_rate\t0.000000\n"


def test_evaluate_to_file(tmp_path):
    refs = np.eye(4, dtype=np.float32)
    src = refs.copy()
    src[2] = refs[1]
    save_embeddings(src, tmp_path / "s.emb")
    save_embeddings(refs, tmp_path / "r.emb")
    out = tmp_path / "err.tsv"
    assert run(["evaluate", "--src", str(tmp_path / "s.emb"), "--refs", str(tmp_path / "r.emb"),
                "--out", str(out)]) == 0
    assert out.read_text() == "error_rate\t0.250000\n"


def test_evaluate_zero_row(tmp_path, capsys):
    save_embeddings(np.zeros((2, 3), dtype=np.float32), tmp_path / "z.emb")
    assert run(["evaluate", "--src", str(tmp_path / "z.emb"), "--refs", str(tmp_path / "z.emb")]) == 2
    assert capsys.readouterr().err.startswith("error\tdegenerate\t")


def test_pipeline_tail(corpus, tmp_path, capsys):
    ali = tmp_path / "ali.tsv"
    assert run(mine_args(corpus, ali, "--threshold", "0.0")) == 0
    excl = tmp_path / "excl.txt"
    excl.write_text("sess0\n")
    post = tmp_path / "post.tsv"
    common = ["--src-manifest", str(corpus["src_manifest"]), "--tgt-manifest", str(corpus["tgt_manifest"])]
    assert run(["postprocess", "--alignments", str(ali), *common, "--exclude-sessions", str(excl),
                "--out", str(post)]) == 0
    kept = post.read_text().splitlines()[1:]
    src_m = load_manifest(corpus["src_manifest"])
    assert kept and all(src_m[src_m.index_of(l.split("\t")[1])].recording_id != "sess0" for l in kept)

    stats, matrix = tmp_path / "stats.tsv", tmp_path / "matrix.tsv"
    assert run(["stats", "--alignments", str(post), *common, "--out", str(stats),
                "--matrix-out", str(matrix)]) == 0
    metrics = dict(l.split("\t") for l in stats.read_text().splitlines()[1:])
    assert int(metrics["source_ms"]) == 4000 * len(kept)
    assert matrix.read_text().splitlines()[0] == "src\\tgt\ten\tes"

    assert run(["select-threshold", "--alignments", str(post), *common, "--target-hours", "0"]) == 0
    assert "threshold\t1.09\n" in capsys.readouterr().out


def test_curate(tmp_path, capsys):
    samples = tmp_path / "samples.tsv"
    rows = ["sample_id\tsession_id\tscore"]
    for sess, n, score in (("A", 600, 1.10), ("B", 600, 1.09), ("C", 600, 1.08)):
        rows += [f"{sess}{i}\t{sess}\t{score}" for i in range(n)]
    samples.write_text("\n".join(rows) + "\n")
    out = tmp_path / "eval.tsv"
    assert run(["curate", "--samples", str(samples), "--target-size", "1000", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1201 and {l.split("\t")[1] for l in lines[1:]} == {"A", "B"}
    assert "shortfall\t0" in capsys.readouterr().out


def test_workers_env_fallback(corpus, tmp_path, monkeypatch):
    monkeypatch.setenv("MINER_WORKERS", "3")
    a = tmp_path / "a.tsv"
    assert run(mine_args(corpus, a, "--threshold", "0")) == 0
    monkeypatch.delenv("MINER_WORKERS")
    b = tmp_path / "b.tsv"
    assert run(mine_args(corpus, b, "--threshold", "0")) == 0
    assert a.read_bytes() == b.read_bytes()


def test_module_entry_point(corpus, tmp_path):
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "marginmine", "evaluate", "--src", str(corpus["src"]),
                        "--refs", str(corpus["src"])], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout == "error_rate\t0.000000\n"
