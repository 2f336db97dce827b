import os

import pytest

from ctrlrec.cli import run
from ctrlrec.synth import SynthSpec, write_corpus


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "corpus.tsv"
    names = root / "names.tsv"
    spec = SynthSpec(n_users=30, n_items=80, n_groups=6, min_len=14,
                     max_len=24, seed=11)
    write_corpus(spec, data, names)
    return root, data, names


TINY = [
    "--set", "embedding_dim=12", "--set", "max_len=12",
    "--set", "epochs=8", "--set", "eval_every=4",
    "--set", "batch_size=16", "--set", "learning_rate=0.01",
    "--set", "min_user_interactions=5", "--set", "min_item_interactions=1",
    "--set", "sim_set_size=3", "--set", "relax_steps=40",
    "--set", "sample_size=6", "--set", "k=4",
]


@pytest.fixture(scope="module")
def trained(corpus):
    root, data, _ = corpus
    out = root / "run"
    code = run(["train", "--data", str(data), "--out", str(out),
                "--seed", "3", *TINY])
    assert code == 0
    model = out / "model.crsm"
    assert model.exists()
    assert (out / "users.idmap").exists()
    assert (out / "split.jsonl").exists()
    return out / "model.crsm"


def test_unknown_subcommand_is_usage_error(capsys):
    assert run(["frobnicate"]) == 1
    captured = capsys.readouterr()
    assert "usage" in captured.err.lower()


def test_unknown_flag_rejected(corpus):
    _, data, _ = corpus
    assert run(["train", "--data", str(data), "--no-such-flag", "x"]) == 1


def test_missing_model_is_runtime_failure(corpus, capsys):
    root, data, _ = corpus
    code = run(["recommend", "--model", str(root / "absent.crsm"),
                "--data", str(data), "--user", "u0", *TINY])
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_recommend_prints_k_rows(trained, corpus, capsys):
    _, data, _ = corpus
    code = run(["recommend", "--model", str(trained), "--data", str(data),
                "--user", "u1", *TINY])
    assert code == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 4
    assert out[0].lstrip().startswith("1.")


def test_recommend_unknown_user(trained, corpus, capsys):
    _, data, _ = corpus
    code = run(["recommend", "--model", str(trained), "--data", str(data),
                "--user", "nobody", *TINY])
    assert code == 2


def test_explain_retro_prints_template(trained, corpus, capsys):
    _, data, _ = corpus
    code = run(["recommend", "--model", str(trained), "--data", str(data),
                "--user", "u2", *TINY])
    first = capsys.readouterr().out.strip().splitlines()[0]
    item_token = first.split()[1]
    code = run(["explain-retro", "--model", str(trained), "--data", str(data),
                "--user", "u2", "--item", item_token, *TINY])
    assert code == 0
    text = capsys.readouterr().out
    assert ("Revoke these behaviors to stop its recommendation." in text
            or "No sufficient set" in text)


def test_explain_pro_prints_template(trained, corpus, capsys):
    _, data, _ = corpus
    code = run(["explain-pro", "--model", str(trained), "--data", str(data),
                "--user", "u2", "--item", "i3", *TINY])
    assert code == 0
    text = capsys.readouterr().out
    assert ("will be added to future recommendations" in text
            or "no change to future recommendations" in text)


def test_eval_retro_writes_reports_deterministically(trained, corpus, tmp_path, capsys):
    _, data, _ = corpus
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    for out in (out1, out2):
        code = run(["eval-retro", "--model", str(trained), "--data", str(data),
                    "--out", str(out), "--seed", "5", *TINY])
        assert code == 0
    for name in ("retro_summary.csv", "retro_rows.csv", "records.tsv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    grid = capsys.readouterr().out
    assert "search" in grid
    summary = (out1 / "retro_summary.csv").read_text()
    assert summary.startswith("method,k,attempts,")


def test_eval_pro_writes_reports(trained, corpus, tmp_path, capsys):
    _, data, _ = corpus
    out = tmp_path / "pro"
    code = run(["eval-pro", "--model", str(trained), "--data", str(data),
                "--out", str(out), "--m", "3", *TINY])
    assert code == 0
    assert (out / "pro_summary.csv").exists()
    assert (out / "pro_rows.csv").exists()
    text = capsys.readouterr().out
    assert "all (keep)" in text
    assert "base model NDCG" in text


def test_ablate_writes_sweep(trained, corpus, tmp_path, capsys):
    _, data, _ = corpus
    out = tmp_path / "sweep"
    code = run(["ablate", "--model", str(trained), "--data", str(data),
                "--param", "greedy_retention_weight", "--values", "0,1",
                "--out", str(out), *TINY])
    assert code == 0
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    assert lines[0].startswith("param,value,")
    assert len(lines) == 3


def test_ablate_bad_values_usage_error(trained, corpus):
    _, data, _ = corpus
    code = run(["ablate", "--model", str(trained), "--data", str(data),
                "--param", "greedy_retention_weight", "--values", "x,y",
                "--out", "/tmp/nowhere", *TINY])
    assert code == 1
