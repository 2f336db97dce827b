import numpy as np
import pytest

from ctrlrec import scorers
from ctrlrec.config import Config
from ctrlrec.errors import DataError
from ctrlrec.ingest import InteractionLog
from ctrlrec.splits import split
from ctrlrec.training import train, validation_ndcg
from ctrlrec.windows import PAD, MaskVector, SequenceWindow


def cycle_log(n_users=12, cycle=(0, 1, 2), reps=6, n_items=6):
    """Users repeatedly walk a fixed item cycle: a perfectly learnable chain."""
    records = []
    for u in range(n_users):
        phase = u % len(cycle)
        ts = 0
        for r in range(reps * len(cycle)):
            item = cycle[(phase + r) % len(cycle)]
            records.append((u, item, ts))
            ts += 1
    return InteractionLog(
        records=records,
        user_tokens=[f"u{u}" for u in range(n_users)],
        item_tokens=[f"i{i}" for i in range(n_items)],
    )


def tiny_config(**overrides):
    base = dict(
        scorer=scorers.GRU, embedding_dim=8, max_len=10, batch_size=8,
        dropout=0.1, learning_rate=0.01, epochs=30, eval_every=5, seed=1,
    )
    base.update(overrides)
    return Config(**base)


def held_out_preference_rate(params, dataset, rng):
    """How often the true next item outscores a random negative on held-out
    steps (the per-user validation transition)."""
    wins = trials = 0
    for user in dataset.users:
        span = dataset.train_spans[user]
        inputs = span[:-1][-params.max_len:]
        window = SequenceWindow(tuple(inputs), params.max_len)
        mask = MaskVector.zeros(params.max_len)
        true_next = span[-1]
        choices = [i for i in range(params.n_items) if i != true_next]
        neg = int(rng.choice(choices))
        s_true = scorers.score(params, window, mask, true_next)
        s_neg = scorers.score(params, window, mask, neg)
        wins += 1 if s_true > s_neg else 0
        trials += 1
    return wins / trials


@pytest.mark.parametrize("kind", [scorers.GRU, scorers.ATTENTION])
def test_learns_cyclic_sequence(kind):
    dataset = split(cycle_log(), m=0, max_len=10)
    # the recurrent scorer needs a bigger optimization budget on this fixture
    config = (tiny_config(embedding_dim=16, batch_size=4, epochs=150,
                          learning_rate=0.02)
              if kind == scorers.GRU else tiny_config(scorer=kind))
    config.scorer = kind
    params, history = train(dataset, config)
    rate = held_out_preference_rate(params, dataset, np.random.default_rng(0))
    assert rate >= 0.9
    assert history.best_epoch >= 0


def test_fixed_seed_is_bit_deterministic():
    dataset = split(cycle_log(), m=0, max_len=10)
    config = tiny_config(epochs=6)
    a, _ = train(dataset, config)
    b, _ = train(dataset, config)
    for name in a.weights:
        assert a.weights[name].tobytes() == b.weights[name].tobytes()


def test_validation_metric_reported():
    dataset = split(cycle_log(), m=0, max_len=10)
    params, history = train(dataset, tiny_config(epochs=10, eval_every=2))
    vals = [v for _, _, v in history.epochs if v is not None]
    assert vals
    assert history.best_val_ndcg == max(vals)
    assert validation_ndcg(params, dataset) == pytest.approx(
        history.best_val_ndcg, abs=1e-9
    )


def test_short_span_users_are_skipped_with_warning(caplog):
    log = cycle_log(n_users=6)
    dataset = split(log, m=0, max_len=10)
    # fabricate one user with a span too short to train on
    dataset.train_spans[0] = dataset.train_spans[0][:1]
    with caplog.at_level("WARNING"):
        params, history = train(dataset, tiny_config(epochs=2))
    assert history.skipped_users == 1
    assert any("skipped" in r.message for r in caplog.records)


def test_empty_dataset_is_an_error():
    log = cycle_log(n_users=2)
    dataset = split(log, m=0, max_len=10)
    dataset.train_spans = {u: s[:1] for u, s in dataset.train_spans.items()}
    with pytest.raises(DataError):
        train(dataset, tiny_config(epochs=1))
