import pytest

from ctrlrec.errors import DataError
from ctrlrec.ingest import FORMAT_MOVIELENS, FORMAT_TSV, filter_log, ingest
from ctrlrec.splits import load_split_manifest, save_split_manifest, split
from ctrlrec.synth import SynthSpec, write_corpus


def write(tmp_path, name, lines):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_movielens_line_parsing(tmp_path):
    path = write(tmp_path, "ml.dat", [
        "1::1193::5::978300760",
        "1::661::3::978302109",
        "2::1193::4::978300000",
    ])
    log = ingest(path, FORMAT_MOVIELENS)
    assert log.n_users == 2
    assert log.n_items == 2
    # rating ignored; ids densified in first-seen order
    assert log.records[0] == (0, 0, 978300760)
    assert log.user_tokens == ["1", "2"]
    assert log.item_tokens == ["1193", "661"]


def test_tsv_three_and_four_columns(tmp_path):
    p3 = write(tmp_path, "a.tsv", ["u1\ti1\t100", "u1\ti2\t200"])
    p4 = write(tmp_path, "b.tsv", ["u1\ti1\t5\t100", "u1\ti2\t4\t200"])
    a, b = ingest(p3, FORMAT_TSV), ingest(p4, FORMAT_TSV)
    assert [r[2] for r in a.records] == [100, 200]
    assert [r[2] for r in b.records] == [100, 200]


def test_duplicate_triples_deduplicated(tmp_path):
    path = write(tmp_path, "dup.tsv", ["u1\ti1\t100", "u1\ti1\t100", "u1\ti2\t50"])
    log = ingest(path, FORMAT_TSV)
    assert len(log.records) == 2
    assert log.dedup_count == 1


def test_malformed_line_reports_number(tmp_path):
    path = write(tmp_path, "bad.tsv", ["u1\ti1\t100", "nonsense line"])
    with pytest.raises(DataError, match="line 2"):
        ingest(path, FORMAT_TSV)


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "empty.tsv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(DataError):
        ingest(path, FORMAT_TSV)


def test_timestamp_ties_keep_input_order(tmp_path):
    path = write(tmp_path, "tie.tsv", ["u1\ti9\t100", "u1\ti3\t100", "u1\ti5\t50"])
    log = ingest(path, FORMAT_TSV)
    seqs = log.user_sequences()
    # i5 first (earlier ts), then i9 and i3 in input order
    assert seqs[0] == [log.item_tokens.index("i5"),
                       log.item_tokens.index("i9"),
                       log.item_tokens.index("i3")]


def make_log(tmp_path, rows):
    return ingest(write(tmp_path, "log.tsv", rows), FORMAT_TSV)


def test_filter_identity_at_zero_thresholds(tmp_path):
    log = make_log(tmp_path, ["u1\ti1\t1", "u1\ti2\t2", "u2\ti1\t3"])
    out = filter_log(log, 0, 0)
    assert len(out.records) == 3


def test_filter_removes_light_user(tmp_path):
    rows = [f"u1\ti{j}\t{j}" for j in range(25)] + ["u2\ti0\t99", "u2\ti1\t100", "u2\ti2\t101"]
    rows += [f"u3\ti{j}\t{200+j}" for j in range(25)]
    log = make_log(tmp_path, rows)
    out = filter_log(log, 20, 0)
    assert "u2" not in out.user_tokens
    assert set(out.user_tokens) == {"u1", "u3"}


def test_filter_chained_removal_reaches_fixed_point(tmp_path):
    # dropping user u2 (only 1 interaction) pushes item iX below its floor,
    # so iX disappears from u1's history too at the fixed point
    rows = (
        [f"u1\ti{j}\t{j}" for j in range(3)]
        + ["u1\tiX\t50", "u2\tiX\t60"]
        + [f"u3\ti{j}\t{100 + j}" for j in range(3)]
    )
    log = make_log(tmp_path, rows)
    # manual fixed point with floors (2, 2): i0..i2 have support 2 (u1, u3);
    # iX starts at 2 but loses u2, then falls to 1 and goes as well
    out = filter_log(log, min_user_interactions=2, min_item_interactions=2)
    assert "u2" not in out.user_tokens
    assert "iX" not in out.item_tokens
    assert set(out.item_tokens) == {"i0", "i1", "i2"}
    assert set(out.user_tokens) == {"u1", "u3"}


def test_filter_everything_gone_is_an_error(tmp_path):
    log = make_log(tmp_path, ["u1\ti1\t1"])
    with pytest.raises(DataError):
        filter_log(log, 5, 5)


def test_filter_idempotent(tmp_path):
    rows = [f"u{u}\ti{j}\t{u * 100 + j}" for u in range(4) for j in range(6)]
    log = make_log(tmp_path, rows)
    once = filter_log(log, 3, 2)
    twice = filter_log(once, 3, 2)
    assert once.records == twice.records
    assert once.user_tokens == twice.user_tokens


def test_split_boundaries_and_reconstruction(tmp_path):
    m = 4
    rows = [f"u1\ti{j}\t{j}" for j in range(m + 3)]
    log = make_log(tmp_path, rows)
    ds = split(log, m=m, max_len=10)
    span = ds.train_spans[0]
    # minimal user: train span of 2 = one training step (input -> validation)
    assert len(span) == 2
    assert len(ds.sim_sets[0]) == m
    assert ds.validation_item(0) == span[-1]
    seq = log.user_sequences()[0]
    assert ds.full_sequence(0) == seq


def test_split_excludes_short_users(tmp_path):
    rows = [f"u1\ti{j}\t{j}" for j in range(10)] + ["u2\ti0\t999"]
    log = make_log(tmp_path, rows)
    ds = split(log, m=2, max_len=10)
    assert ds.excluded_users == 1
    assert list(ds.train_spans) == [0]


def test_split_m_zero_is_leave_one_out(tmp_path):
    rows = [f"u1\ti{j}\t{j}" for j in range(5)]
    log = make_log(tmp_path, rows)
    ds = split(log, m=0, max_len=10)
    assert ds.sim_sets[0] == []
    assert len(ds.train_spans[0]) == 4
    assert ds.full_sequence(0) == log.user_sequences()[0]


def test_no_simulation_or_test_leakage_into_training_windows(tmp_path):
    spec = SynthSpec(n_users=15, n_items=60, n_groups=5, min_len=12,
                     max_len=20, seed=3)
    data = tmp_path / "synth.tsv"
    write_corpus(spec, data)
    log = ingest(data, FORMAT_TSV)
    ds = split(log, m=4, max_len=10)
    for user in ds.users:
        span_items = set(ds.train_spans[user])
        forbidden = set(ds.sim_sets[user]) | {ds.test_items[user]}
        assert not (span_items & forbidden)


def test_split_manifest_round_trip(tmp_path):
    rows = [f"u{u}\ti{j}\t{u*100+j}" for u in range(3) for j in range(8)]
    log = make_log(tmp_path, rows)
    ds = split(log, m=2, max_len=6)
    path = tmp_path / "split.jsonl"
    save_split_manifest(ds, path)
    manifest = load_split_manifest(path)
    assert manifest["header"]["m"] == 2
    assert len(manifest["rows"]) == len(ds.users)
    assert manifest["rows"][0]["train_len"] == len(ds.train_spans[ds.users[0]])


def test_synth_corpus_has_no_user_repeats(tmp_path):
    spec = SynthSpec(n_users=10, n_items=50, n_groups=5, min_len=10, max_len=15, seed=1)
    data = tmp_path / "c.tsv"
    names = tmp_path / "names.tsv"
    n = write_corpus(spec, data, names)
    log = ingest(data, FORMAT_TSV)
    assert len(log.records) == n
    for user, seq in log.user_sequences().items():
        assert len(seq) == len(set(seq))
    assert names.read_text(encoding="utf-8").count("\n") == spec.n_items
