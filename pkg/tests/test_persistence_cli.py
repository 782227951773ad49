import io
import json

import numpy as np
import pytest

from conftest import populate
from tensormemory import (
    EpisodicModel,
    ModelConfig,
    SemanticModel,
    bind_engram,
    ingest,
    load_checkpoint,
    marginalize_time,
    save_checkpoint,
)
from tensormemory.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from tensormemory.errors import CheckpointError, CheckpointVersionError, ParseError
from tensormemory.persistence import checkpoint_bytes, checkpoint_from_bytes, parse_facts
from tensormemory.query_engine import FREE, Fixed, SlotPattern, conditional_distribution

TOY = """# toy episodic facts
jack\tlikes\tmary\tt0
jack\tlikes\tmary\tt1
ann\tknows\tjack\tt2
bob\tknows\tjack\tt3
jack\tlikes\tmary\tt2
"""


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def toy_file(tmp_path):
    path = tmp_path / "toy.tsv"
    path.write_text(TOY, encoding="utf-8")
    return path


# --- ingest ---------------------------------------------------------------------

def test_ingest_single_triple(tmp_path):
    path = tmp_path / "f.tsv"
    path.write_text("jack\tknows\tmary\n", encoding="utf-8")
    store = ingest(path)
    assert store.triple_names() == [("jack", "knows", "mary")]
    assert len(store.entities) == 2 and len(store.predicates) == 1


def test_ingest_duplicates_and_mixed_columns():
    store = parse_facts(["a\tr\tb\n", "a\tr\tb\n", "a\tr\tb\tt0\n", "\n", "# c\n"])
    assert store.triples == [(0, 0, 1)]
    assert store.quadruple_names() == [("a", "r", "b", "t0")]


def test_ingest_bad_line_names_line(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("a\tr\tb\nonly\ttwo\n", encoding="utf-8")
    with pytest.raises(ParseError, match=r"bad.tsv:2") as err:
        ingest(path)
    assert err.value.lineno == 2


def test_ingest_idempotent(toy_file):
    assert ingest(toy_file) == ingest(toy_file)


# --- checkpoints ----------------------------------------------------------------

def _episodic():
    m = populate(EpisodicModel(ModelConfig(rank=3, seed=4)), 4, 2, 3)
    bind_engram(m, np.array([0.1, -0.2, 0.3]), label="lunch")
    return m


def test_save_load_save_identical(tmp_path):
    m = _episodic()
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(m, a)
    save_checkpoint(load_checkpoint(a), b)
    assert a.read_bytes() == b.read_bytes()


def test_scores_bit_exact_after_load(tmp_path):
    m = _episodic()
    save_checkpoint(m, tmp_path / "m.ckpt")
    back = load_checkpoint(tmp_path / "m.ckpt")
    for s, p, o, t in np.ndindex(4, 2, 4, 4):
        assert back.score(s, p, o, t) == m.score(s, p, o, t)
    assert [e.label for e in back.engrams] == [e.label for e in m.engrams]
    assert back.times.row(3).tobytes() == m.times.row(3).tobytes()


def test_loaded_rng_continues_stream():
    m = populate(SemanticModel(ModelConfig(rank=2, seed=1)), 3, 1)
    back = checkpoint_from_bytes(checkpoint_bytes(m))
    m.entities.register("new")
    back.entities.register("new")
    assert back.entities.row(3).tobytes() == m.entities.row(3).tobytes()


def test_truncated_checkpoint():
    data = checkpoint_bytes(_episodic())
    with pytest.raises(CheckpointError, match="bytes"):
        checkpoint_from_bytes(data[:-8])
    with pytest.raises(CheckpointError):
        checkpoint_from_bytes(b"garbage")


def test_version_mismatch_names_both():
    data = checkpoint_bytes(_episodic())
    head, _, body = data.partition(b"\n")
    header = json.loads(head)
    header["version"] = 99
    patched = json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n" + body
    with pytest.raises(CheckpointVersionError, match=r"99.*1"):
        checkpoint_from_bytes(patched)


def test_semantic_roundtrip():
    m = populate(SemanticModel(ModelConfig(rank=2, seed=0, nonnegative=True)), 3, 2)
    back = checkpoint_from_bytes(checkpoint_bytes(m))
    assert isinstance(back, SemanticModel) and back.nonnegative
    assert checkpoint_bytes(back) == checkpoint_bytes(m)


# --- CLI ------------------------------------------------------------------------

def _train(toy_file, out, *extra):
    return run("train", "--facts", toy_file, "--rank", 4, "--epochs", 200, "--seed", 1, "--out", out, *extra)


def test_cli_ingest(toy_file):
    code, out, _ = run("ingest", "--facts", toy_file)
    assert code == EXIT_OK
    assert out == "4\t2\t4\t0\t5\n"
    code, out, _ = run("ingest", "--facts", toy_file, "--format", "json")
    assert json.loads(out) == {"entities": 4, "predicates": 2, "times": 4, "triples": 0, "quadruples": 5}


def test_cli_train_deterministic(toy_file, tmp_path):
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    assert _train(toy_file, a)[0] == EXIT_OK
    assert _train(toy_file, b)[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_cli_train_report(toy_file, tmp_path):
    report = tmp_path / "r.jsonl"
    code, _, _ = _train(toy_file, tmp_path / "m.ckpt", "--report", report)
    assert code == EXIT_OK
    lines = [json.loads(x) for x in report.read_text().splitlines()]
    assert len(lines) == 200 and lines[0]["epoch"] == 1


def test_cli_query_top3(toy_file, tmp_path):
    ckpt = tmp_path / "m.ckpt"
    _train(toy_file, ckpt)
    code, out, err = run("query", "--model", ckpt, "--fix", "s=jack", "--fix", "p=likes",
                         "--fix", "t=t0", "--free", "o", "--beta", 5, "--top", 3)
    assert code == EXIT_OK, err
    rows = [line.split("\t") for line in out.splitlines()]
    assert len(rows) == 3
    probs = [float(r[1]) for r in rows]
    assert probs == sorted(probs, reverse=True)


def test_cli_query_json(toy_file, tmp_path):
    ckpt = tmp_path / "m.ckpt"
    _train(toy_file, ckpt)
    code, out, _ = run("query", "--model", ckpt, "--fix", "s=jack", "--fix", "p=likes",
                       "--fix", "t=t0", "--free", "o", "--top", 2, "--format", "json")
    rows = [json.loads(x) for x in out.splitlines()]
    assert code == EXIT_OK and len(rows) == 2
    assert set(rows[0]) == {"name", "probability", "score"}


def test_cli_consolidate_matches_library(toy_file, tmp_path):
    ep_ckpt, sem_ckpt = tmp_path / "ep.ckpt", tmp_path / "sem.ckpt"
    # zero epochs: a seeded random nonnegative model over the file's vocabulary
    code = run("train", "--facts", toy_file, "--rank", 4, "--epochs", 0, "--nonnegative", "--out", ep_ckpt)[0]
    assert code == EXIT_OK
    code, _, err = run("consolidate", "--model", ep_ckpt, "--mode", "marginalize", "--out", sem_ckpt)
    assert code == EXIT_OK, err
    code, out, _ = run("query", "--model", sem_ckpt, "--fix", "s=jack", "--fix", "p=likes",
                       "--free", "o", "--beta", "linear", "--top", 4, "--format", "json")
    assert code == EXIT_OK
    cli = [(r["name"], r["probability"]) for r in map(json.loads, out.splitlines())]

    sem = marginalize_time(load_checkpoint(ep_ckpt))
    res = conditional_distribution(sem, SlotPattern(Fixed(sem.entities.id("jack")),
                                                    Fixed(sem.predicates.id("likes")), FREE), "linear")
    lib = [(sem.entities.name(i), p) for i, p in res.top(4)]
    assert cli == lib


def test_cli_recall_profile_associate(toy_file, tmp_path):
    ckpt = tmp_path / "m.ckpt"
    _train(toy_file, ckpt, "--corrupt", "s,p,o", "--max-corrupt", 3)
    code, out, _ = run("recall", "--model", ckpt, "--time", "t1", "--top", 1)
    assert code == EXIT_OK
    assert out.split("\t")[:3] == ["jack", "likes", "mary"]
    code, out, _ = run("associate", "--model", ckpt, "--name", "ann", "--k", 2)
    assert code == EXIT_OK and len(out.splitlines()) == 2
    sem = tmp_path / "sem.ckpt"
    run("consolidate", "--model", ckpt, "--mode", "replay", "--out", sem, "--epochs", 20, "--seed", 2)
    code, out, _ = run("profile", "--model", sem, "--entity", "jack", "--top", 3)
    assert code == EXIT_OK and len(out.splitlines()) == 3


def test_cli_perceive_memorable(toy_file, tmp_path):
    ckpt, out_ckpt = tmp_path / "m.ckpt", tmp_path / "m2.ckpt"
    _train(toy_file, ckpt)
    sens = tmp_path / "u.csv"
    sens.write_text("0.1,0.2,0.3,0.4\n", encoding="utf-8")
    code, out, err = run("perceive", "--model", ckpt, "--input", sens, "--memorable", "--out", out_ckpt, "--top", 2)
    assert code == EXIT_OK, err
    assert len(out.splitlines()) == 2
    assert len(load_checkpoint(out_ckpt).engrams) == len(load_checkpoint(ckpt).engrams) + 1


def test_cli_distill_and_export(toy_file, tmp_path):
    ckpt, kg = tmp_path / "m.ckpt", tmp_path / "kg.tsv"
    _train(toy_file, ckpt)
    code, out, _ = run("distill", "--model", ckpt, "--kg", kg, "--time", "t0", "--threshold", 0.5)
    assert code == EXIT_OK
    code2, exported, _ = run("export-kg", "--kg", kg)
    assert code2 == EXIT_OK
    assert exported == kg.read_text()
    assert sorted(out.splitlines()) == sorted(exported.splitlines())
    assert all(len(line.split("\t")) == 4 for line in exported.splitlines())


def test_cli_env_seed(toy_file, tmp_path, monkeypatch):
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    monkeypatch.setenv("ENGRAM_SEED", "1")
    run("train", "--facts", toy_file, "--rank", 2, "--epochs", 5, "--out", a)
    monkeypatch.delenv("ENGRAM_SEED")
    run("train", "--facts", toy_file, "--rank", 2, "--epochs", 5, "--out", b, "--seed", 1)
    assert a.read_bytes() == b.read_bytes()
    monkeypatch.setenv("ENGRAM_SEED", "x")
    assert run("train", "--facts", toy_file, "--out", a)[0] == EXIT_USAGE


def test_cli_exit_codes(toy_file, tmp_path):
    assert run()[0] == EXIT_USAGE
    assert run("bogus")[0] == EXIT_USAGE
    assert run("train", "--facts", toy_file)[0] == EXIT_USAGE
    bad = tmp_path / "bad.tsv"
    bad.write_text("a\tb\n", encoding="utf-8")
    code, _, err = run("ingest", "--facts", bad)
    assert code == EXIT_DATA and "bad.tsv:1" in err
    assert run("ingest", "--facts", tmp_path / "missing.tsv")[0] == EXIT_DATA
    ckpt = tmp_path / "m.ckpt"
    _train(toy_file, ckpt)
    assert run("query", "--model", ckpt, "--fix", "s=nobody", "--fix", "p=likes", "--fix", "t=t0",
               "--free", "o")[0] == EXIT_DATA
    assert run("query", "--model", ckpt, "--fix", "s=jack", "--free", "o")[0] == EXIT_USAGE
    assert run("query", "--model", ckpt, "--free", "o", "--beta", "-1")[0] == EXIT_USAGE
    code = run("train", "--facts", toy_file, "--out", ckpt, "--lr", 1e4, "--epochs", 50)[0]
    assert code == EXIT_NUMERIC
