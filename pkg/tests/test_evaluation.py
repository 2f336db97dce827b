import numpy as np
import pytest

from conftest import small_params
from ctrlrec import scorers
from ctrlrec.config import Config
from ctrlrec.errors import ContractViolation
from ctrlrec.evaluation import (
    ablation_sweep,
    model_test_metrics,
    popularity_test_metrics,
    pro_rows_csv,
    pro_summary_csv,
    prospective_simulation,
    retro_rows_csv,
    retro_summary_csv,
    retro_summary_text,
    retrospective_eval,
    sweep_csv,
    window_of,
)
from ctrlrec.ingest import InteractionLog
from ctrlrec.records import METHODS, SUCCESS
from ctrlrec.splits import SplitDataset, split
from ctrlrec.windows import MaskVector, SequenceWindow
from test_training import cycle_log, tiny_config


def hand_dataset(params, spans, m=0):
    """SplitDataset wrapper around explicit train spans (no sim/test use)."""
    users = list(range(len(spans)))
    return SplitDataset(
        users=users,
        train_spans={u: list(s) for u, s in enumerate(spans)},
        sim_sets={u: [] for u in users},
        test_items={u: s[-1] for u, s in enumerate(spans)},
        m=m,
        max_len=params.max_len,
        n_items=params.n_items,
        n_users=len(users),
    )


def single_cause_eval_params():
    """Linear scorer, one user, hand-checkable numbers."""
    params = small_params(scorers.LINEAR, n_items=6, dim=4, max_len=4, seed=0)
    emb = np.zeros((6, 4))
    emb[0] = (1.0, 0.0, 0.0, 0.0)   # history
    emb[1] = (0.0, 1.0, 0.0, 0.0)   # history
    emb[2] = (0.9, 0.0, 0.0, 0.0)   # recommended via item 0
    emb[3] = (0.0, 0.8, 0.0, 0.0)   # recommended via item 1
    emb[4] = (0.3, 0.3, 0.0, 0.0)   # weak third candidate
    params.weights["emb"] = emb
    return params


def test_single_user_rows_match_hand_computation():
    params = single_cause_eval_params()
    dataset = hand_dataset(params, [[0, 1]])
    report = retrospective_eval(
        params, dataset, methods=("search",), k_values=(2,),
        sample_size=1, seed=0,
        request_kwargs={"relax_steps": 50},
    )
    # original top-2 is [2 (0.9), 3 (0.8)]; each explanation revokes exactly
    # the single causal slot, so complexity = 1/2 and accuracy = 1
    assert len(report.rows) == 2
    for row in report.rows:
        assert row.status == SUCCESS
        assert row.n_revoked == 1
        assert row.complexity == 0.5
        assert row.accuracy == 1.0
    by_rank = {r.target_rank: r.target for r in report.rows}
    assert by_rank == {1: 2, 2: 3}


def test_summary_equals_mean_of_rows():
    params = single_cause_eval_params()
    dataset = hand_dataset(params, [[0, 1], [1, 0], [0, 1, 4]])
    report = retrospective_eval(
        params, dataset, methods=("search", "random"), k_values=(2,),
        sample_size=3, seed=1, request_kwargs={},
    )
    summary = report.summary()
    for (method, k), s in summary.items():
        rows = [r for r in report.rows if r.method == method and r.k == k]
        succ = [r for r in rows if r.status == SUCCESS]
        assert s["attempts"] == len(rows)
        assert s["successes"] == len(succ)
        if succ:
            assert s["complexity_mean"] == pytest.approx(
                sum(r.complexity for r in succ) / len(succ)
            )
            assert s["accuracy_mean"] == pytest.approx(
                sum(r.accuracy for r in succ) / len(succ)
            )
        assert s["fidelity"] == len(succ) / len(rows)


def test_jobs_parallelism_is_order_invariant():
    params = single_cause_eval_params()
    dataset = hand_dataset(params, [[0, 1], [1, 0], [0, 1, 4], [1, 4]])
    kwargs = dict(methods=("search",), k_values=(2,), sample_size=4, seed=3,
                  request_kwargs={})
    serial = retrospective_eval(params, dataset, jobs=1, **kwargs)
    parallel = retrospective_eval(params, dataset, jobs=2, **kwargs)
    assert retro_rows_csv(serial) == retro_rows_csv(parallel)
    assert serial.report_lines == parallel.report_lines


def test_csv_outputs_have_documented_headers():
    params = single_cause_eval_params()
    dataset = hand_dataset(params, [[0, 1]])
    report = retrospective_eval(params, dataset, methods=METHODS, k_values=(2,),
                                sample_size=1, seed=0,
                                request_kwargs={"relax_steps": 40})
    rows_csv = retro_rows_csv(report)
    summary_csv = retro_summary_csv(report)
    assert rows_csv.startswith("user,k,method,target,")
    assert summary_csv.startswith("method,k,attempts,")
    grid = retro_summary_text(report)
    assert "search" in grid and "relax" in grid
    assert len(report.report_lines) == len(report.rows)


def test_greedy_fidelity_is_one_when_any_subset_works():
    from oracles import minimal_subset_size

    params = small_params(scorers.LINEAR, n_items=12, dim=5, max_len=6, seed=5)
    rng = np.random.default_rng(2)
    spans = [
        [int(i) for i in rng.choice(12, size=4, replace=False)] for _ in range(6)
    ]
    dataset = hand_dataset(params, spans)
    report = retrospective_eval(params, dataset, methods=("search",),
                                k_values=(3,), sample_size=6, seed=0,
                                request_kwargs={})
    for row in report.rows:
        window = window_of(dataset, row.user, params.max_len)
        optimal = minimal_subset_size(params, window, row.target, row.k)
        if optimal is not None and row.status != SUCCESS:
            # greedy must only fail when brute force also finds nothing
            # (on this simple additive fixture greedy always succeeds)
            pytest.fail(f"greedy failed though a subset of size {optimal} works")


# ------------------------------------------------------------- prospective

def markov_dataset(params_kind=scorers.GRU, m=2):
    log = cycle_log(n_users=12, cycle=(0, 1, 2), reps=6)
    return split(log, m=m, max_len=10)


def test_prospective_cohort_logic_recomputable():
    dataset = markov_dataset(m=2)
    config = tiny_config(epochs=20)
    from ctrlrec.training import train

    params, _ = train(dataset, config)
    report = prospective_simulation(params, dataset, k=3)
    from ctrlrec.prospective import prospective_explanation

    for row in report.rows:
        user = row.user
        window = window_of(dataset, user, params.max_len)
        record = prospective_explanation(
            params, window, dataset.sim_sets[user][0], k=3
        )
        expected = not (set(record.added_items) & set(dataset.sim_sets[user]))
        assert row.is_target == expected
        assert row.added_count == len(record.added_items)


def test_prospective_m_zero_collapses_conditions():
    dataset = markov_dataset(m=0)
    params = small_params(scorers.LINEAR, n_items=6, dim=4, max_len=10, seed=0)
    report = prospective_simulation(params, dataset, k=3)
    assert all(not r.is_target for r in report.rows)
    for r in report.rows:
        assert r.keep_ndcg == r.revoke_ndcg
        assert r.keep_rank == r.revoke_rank
    summary = report.cohort_summary()
    assert summary[("target", "keep")]["users"] == 0
    assert pro_summary_csv(report).startswith("cohort,condition,users,")
    assert pro_rows_csv(report).startswith("user,is_target,")


# ---------------------------------------------------------------- ablation

def test_single_value_sweep_equals_one_eval():
    params = single_cause_eval_params()
    dataset = hand_dataset(params, [[0, 1], [1, 0]])
    points = ablation_sweep(params, dataset, "greedy_retention_weight", [1.0],
                            k=2, sample_size=2, seed=0, request_kwargs={})
    report = retrospective_eval(params, dataset, methods=("search",),
                                k_values=(2,), sample_size=2, seed=0,
                                request_kwargs={"greedy_retention_weight": 1.0})
    s = report.summary()[("search", 2)]
    assert len(points) == 1
    assert points[0].fidelity == s["fidelity"]
    assert points[0].complexity_mean == s["complexity_mean"]
    assert points[0].accuracy_mean == s["accuracy_mean"]
    assert sweep_csv(points).startswith("param,value,method,k,")


def test_sweep_rejects_unknown_parameter():
    params = single_cause_eval_params()
    dataset = hand_dataset(params, [[0, 1]])
    with pytest.raises(ContractViolation):
        ablation_sweep(params, dataset, "dropout", [0.1], sample_size=1)


def test_untrained_params_rejected():
    params = scorers.ScorerParams(kind="linear", n_items=3, dim=2, max_len=4)
    dataset = hand_dataset(small_params(scorers.LINEAR), [[0, 1]])
    with pytest.raises(ContractViolation):
        retrospective_eval(params, dataset, sample_size=1)


def test_popularity_oracle_on_skewed_fixture():
    params = small_params(scorers.LINEAR, n_items=6, dim=4, max_len=6)
    # counts over train spans: items 1,2,3 appear once each; 0,4,5 never.
    # eligible candidates for the test item are catalog minus the history.
    dataset = hand_dataset(params, [[1, 2, 3]])
    dataset.test_items = {0: 5}
    ndcg, hr = popularity_test_metrics(dataset, 1)
    # eligible = {0, 4, 5}, all unseen: ties break by ascending id, so item 0
    # outranks the held-out item 5
    assert hr == 0.0
    dataset.test_items = {0: 0}
    ndcg, hr = popularity_test_metrics(dataset, 1)
    assert (ndcg, hr) == (1.0, 1.0)
