"""Evaluation protocols: controllability tables, prospective simulation,
hyperparameter sweeps, and base-model ranking sanity checks."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import scorers
from .baselines import baseline_random, baseline_similarity
from .errors import ContractViolation
from .metrics import complexity as complexity_metric
from .metrics import control_accuracy, ndcg_from_rank
from .records import (
    METHOD_RANDOM,
    METHOD_RELAX,
    METHOD_SEARCH,
    METHOD_SIMILARITY,
    METHODS,
    SUCCESS,
    to_report_line,
)
from .recommend import (
    eligible_mask,
    rank_from_scores,
    recommend_top_k,
    topk_from_scores,
)
from .retrospective import RetroRequest, greedy_retrospective, relax_many
from .splits import SplitDataset
from .windows import PAD, MaskVector, SequenceWindow

log = logging.getLogger(__name__)


def window_of(dataset: SplitDataset, user, capacity: int) -> SequenceWindow:
    span = dataset.train_spans[user]
    return SequenceWindow(tuple(span[-capacity:]), capacity)


# ------------------------------------------------------- retrospective eval

@dataclass
class RetroRow:
    user: int
    k: int
    method: str
    target: int
    target_rank: int
    status: str
    n_revoked: int
    effective_length: int
    complexity: float | None
    accuracy: float | None
    iterations: int


@dataclass
class RetroReport:
    rows: list
    methods: tuple
    k_values: tuple
    sample_users: list
    report_lines: list = field(default_factory=list)
    records: list = field(default_factory=list)  # aligned with rows when kept

    def summary(self) -> dict:
        """(method, k) -> attempts/successes/fidelity/mean complexity/accuracy."""
        out = {}
        for method in self.methods:
            for k in self.k_values:
                rows = [r for r in self.rows if r.method == method and r.k == k]
                succ = [r for r in rows if r.status == SUCCESS]
                out[(method, k)] = {
                    "attempts": len(rows),
                    "successes": len(succ),
                    "fidelity": len(succ) / len(rows) if rows else 0.0,
                    "complexity_mean": (
                        sum(r.complexity for r in succ) / len(succ) if succ else None
                    ),
                    "accuracy_mean": (
                        sum(r.accuracy for r in succ) / len(succ) if succ else None
                    ),
                }
        return out


def _user_rows(params, dataset, user, methods, k_values, req_kwargs, root_seed):
    capacity = params.max_len
    window = window_of(dataset, user, capacity)
    eff = window.effective_length
    if eff == 0:
        return [], [], []
    zero = MaskVector.zeros(capacity)
    rows = []
    lines = []
    records = []
    exclude = req_kwargs.get("exclude_history", True)
    for k in k_values:
        original = recommend_top_k(params, window, zero, k, exclude)
        targets = original.item_ids()
        if not targets:
            continue
        per_method_records = {}
        for method in methods:
            if method == METHOD_RELAX:
                req = RetroRequest(window=window, target_item=targets[0],
                                   **{**req_kwargs, "k": k})
                per_method_records[method] = relax_many(params, window, targets, req)
            else:
                recs = []
                for target in targets:
                    req = RetroRequest(window=window, target_item=target,
                                       **{**req_kwargs, "k": k})
                    if method == METHOD_SEARCH:
                        recs.append(greedy_retrospective(params, req))
                    elif method == METHOD_RANDOM:
                        recs.append(baseline_random(params, req, seed=root_seed + user))
                    elif method == METHOD_SIMILARITY:
                        recs.append(baseline_similarity(params, req))
                    else:
                        raise ContractViolation(f"unknown method {method!r}")
                per_method_records[method] = recs
        for method in methods:
            for rank, target in enumerate(targets, start=1):
                record = per_method_records[method][rank - 1]
                record.user_id = user
                comp = acc = None
                if record.status == SUCCESS:
                    counterfactual = recommend_top_k(
                        params, window, record.final_mask, k, exclude
                    )
                    comp = complexity_metric(record.final_mask, eff)
                    acc = control_accuracy(original, counterfactual, {target})
                rows.append(RetroRow(
                    user=user, k=k, method=method, target=target,
                    target_rank=rank, status=record.status,
                    n_revoked=len(record.revoked),
                    effective_length=eff,
                    complexity=comp, accuracy=acc,
                    iterations=record.iterations,
                ))
                lines.append(to_report_line(record))
                records.append(record)
    return rows, lines, records


def _user_rows_payload(payload):
    return _user_rows(*payload)


def retrospective_eval(
    params,
    dataset: SplitDataset,
    methods=METHODS,
    k_values=(3, 5, 10),
    sample_size: int = 1000,
    seed: int = 0,
    request_kwargs: dict | None = None,
    jobs: int = 1,
    keep_records: bool = False,
) -> RetroReport:
    """Sample users, explain every currently recommended item per method and
    K, revoke by masking, and aggregate the controllability metrics."""
    if not params.weights:
        raise ContractViolation("scorer has no trained weights")
    req_kwargs = dict(request_kwargs or {})
    req_kwargs.pop("k", None)
    rng = np.random.default_rng(seed)
    pool = list(dataset.users)
    size = min(sample_size, len(pool))
    sample = sorted(rng.choice(len(pool), size=size, replace=False).tolist())
    users = [pool[i] for i in sample]

    payloads = [
        (params, dataset, user, tuple(methods), tuple(k_values), req_kwargs, seed)
        for user in users
    ]
    rows, lines, records = [], [], []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool_exec:
            for user_rows, user_lines, user_records in pool_exec.map(
                    _user_rows_payload, payloads):
                rows.extend(user_rows)
                lines.extend(user_lines)
                if keep_records:
                    records.extend(user_records)
    else:
        for payload in payloads:
            user_rows, user_lines, user_records = _user_rows_payload(payload)
            rows.extend(user_rows)
            lines.extend(user_lines)
            if keep_records:
                records.extend(user_records)
    return RetroReport(
        rows=rows,
        methods=tuple(methods),
        k_values=tuple(k_values),
        sample_users=users,
        report_lines=lines,
        records=records,
    )


RETRO_ROWS_HEADER = ("user,k,method,target,target_rank,status,n_revoked,"
                     "effective_length,complexity,accuracy,iterations")
RETRO_SUMMARY_HEADER = ("method,k,attempts,successes,fidelity,"
                        "complexity_mean,accuracy_mean")


def _fmt(x):
    return "" if x is None else f"{x:.6f}"


def retro_rows_csv(report: RetroReport) -> str:
    out = [RETRO_ROWS_HEADER]
    for r in report.rows:
        out.append(
            f"{r.user},{r.k},{r.method},{r.target},{r.target_rank},{r.status},"
            f"{r.n_revoked},{r.effective_length},{_fmt(r.complexity)},"
            f"{_fmt(r.accuracy)},{r.iterations}"
        )
    return "\n".join(out) + "\n"


def retro_summary_csv(report: RetroReport) -> str:
    summary = report.summary()
    out = [RETRO_SUMMARY_HEADER]
    for method in report.methods:
        for k in report.k_values:
            s = summary[(method, k)]
            out.append(
                f"{method},{k},{s['attempts']},{s['successes']},"
                f"{s['fidelity']:.6f},{_fmt(s['complexity_mean'])},"
                f"{_fmt(s['accuracy_mean'])}"
            )
    return "\n".join(out) + "\n"


def retro_summary_text(report: RetroReport) -> str:
    """Controllability grid: complexity / accuracy (percent) per method and K."""
    summary = report.summary()
    ks = report.k_values
    head = ["method".ljust(12)]
    for metric in ("complexity %", "accuracy %", "fidelity %"):
        for k in ks:
            head.append(f"{metric.split()[0][:4]}@{k}".rjust(9))
    lines = ["".join(head)]
    for method in report.methods:
        cells = [method.ljust(12)]
        for key in ("complexity_mean", "accuracy_mean", "fidelity"):
            for k in ks:
                v = summary[(method, k)][key]
                cells.append(("     -".rjust(9) if v is None else f"{100*v:9.2f}"))
        lines.append("".join(cells))
    return "\n".join(lines) + "\n"


# --------------------------------------------------- prospective simulation

@dataclass
class ProRow:
    user: int
    is_target: bool
    added_count: int
    keep_rank: int
    keep_ndcg: float
    keep_hit: float
    revoke_rank: int
    revoke_ndcg: float
    revoke_hit: float


@dataclass
class ProReport:
    rows: list
    m: int
    k: int
    excluded_users: int

    def cohort_summary(self) -> dict:
        """(cohort, condition) -> {users, ndcg, hit_rate}."""
        out = {}
        cohorts = {"all": self.rows,
                   "target": [r for r in self.rows if r.is_target]}
        for cohort, rows in cohorts.items():
            for condition in ("keep", "revoke"):
                if condition == "keep":
                    vals = [(r.keep_ndcg, r.keep_hit) for r in rows]
                else:
                    vals = [(r.revoke_ndcg, r.revoke_hit) for r in rows]
                n = len(vals)
                out[(cohort, condition)] = {
                    "users": n,
                    "ndcg": sum(v[0] for v in vals) / n if n else 0.0,
                    "hit_rate": sum(v[1] for v in vals) / n if n else 0.0,
                }
        return out


def _batched_catalog_scores(params, sequences, chunk=256):
    """Full-catalog scores for a list of item sequences (last max_len kept)."""
    cap = params.max_len
    out = np.empty((len(sequences), params.n_items))
    for start in range(0, len(sequences), chunk):
        part = sequences[start : start + chunk]
        ids = np.full((len(part), cap), PAD, dtype=np.int64)
        lengths = np.empty(len(part), dtype=np.int64)
        for b, seq in enumerate(part):
            tail = seq[-cap:]
            ids[b, : len(tail)] = tail
            lengths[b] = len(tail)
        inv = (ids != PAD).astype(np.float64)
        final = scorers.forward_final(params, ids, inv, lengths).data
        out[start : start + len(part)] = final @ params.embeddings.T
    return out


def _held_out_metrics(params, scores_row, history, held, k):
    eligible = np.ones(params.n_items, dtype=bool)
    eligible[np.asarray(list(set(history)), dtype=np.int64)] = False
    eligible[held] = True
    rank = rank_from_scores(scores_row, eligible, held)
    return rank, ndcg_from_rank(rank, k), 1.0 if 0 < rank <= k else 0.0


def prospective_simulation(params, dataset: SplitDataset, k: int = 10,
                           exclude_history: bool = True) -> ProReport:
    """Simulate accepting vs revoking the current interaction.

    The current interaction is the first simulation-span item; the remaining
    simulation items are always concatenated before predicting the held-out
    test item. Users whose newly added recommendations miss their simulation
    set entirely form the "target" cohort (they would plausibly revoke).
    """
    m = dataset.m
    users = list(dataset.users)
    cap = params.max_len

    spans = {u: list(dataset.train_spans[u]) for u in users}
    seq_base = [spans[u][-cap:] for u in users]
    seq_appended = [
        (spans[u] + [dataset.sim_sets[u][0]])[-cap:] if m > 0 else spans[u][-cap:]
        for u in users
    ]
    seq_keep = [(spans[u] + list(dataset.sim_sets[u]))[-cap:] for u in users]
    seq_revoke = [(spans[u] + list(dataset.sim_sets[u])[1:])[-cap:] for u in users]

    s_base = _batched_catalog_scores(params, seq_base)
    s_appended = _batched_catalog_scores(params, seq_appended)
    s_keep = _batched_catalog_scores(params, seq_keep)
    s_revoke = _batched_catalog_scores(params, seq_revoke)

    rows = []
    for i, user in enumerate(users):
        before_window = SequenceWindow(tuple(seq_base[i]), cap)
        after_window = SequenceWindow(tuple(seq_appended[i]), cap)
        zero = MaskVector.zeros(cap)
        before = topk_from_scores(
            s_base[i], eligible_mask(params.n_items, before_window, zero, exclude_history), k
        )
        after = topk_from_scores(
            s_appended[i], eligible_mask(params.n_items, after_window, zero, exclude_history), k
        )
        added = after.item_set() - before.item_set()
        is_target = m > 0 and not (added & set(dataset.sim_sets[user]))

        held = dataset.test_items[user]
        keep_rank, keep_ndcg, keep_hit = _held_out_metrics(
            params, s_keep[i], spans[user] + list(dataset.sim_sets[user]), held, k
        )
        revoke_hist = spans[user] + list(dataset.sim_sets[user])[1:]
        revoke_rank, revoke_ndcg, revoke_hit = _held_out_metrics(
            params, s_revoke[i], revoke_hist, held, k
        )
        rows.append(ProRow(
            user=user, is_target=is_target, added_count=len(added),
            keep_rank=keep_rank, keep_ndcg=keep_ndcg, keep_hit=keep_hit,
            revoke_rank=revoke_rank, revoke_ndcg=revoke_ndcg, revoke_hit=revoke_hit,
        ))
    return ProReport(rows=rows, m=m, k=k, excluded_users=dataset.excluded_users)


PRO_ROWS_HEADER = ("user,is_target,added_count,keep_rank,keep_ndcg,keep_hit,"
                   "revoke_rank,revoke_ndcg,revoke_hit")
PRO_SUMMARY_HEADER = "cohort,condition,users,ndcg,hit_rate"


def pro_rows_csv(report: ProReport) -> str:
    out = [PRO_ROWS_HEADER]
    for r in report.rows:
        out.append(
            f"{r.user},{int(r.is_target)},{r.added_count},"
            f"{r.keep_rank},{r.keep_ndcg:.6f},{r.keep_hit:.0f},"
            f"{r.revoke_rank},{r.revoke_ndcg:.6f},{r.revoke_hit:.0f}"
        )
    return "\n".join(out) + "\n"


def pro_summary_csv(report: ProReport) -> str:
    summary = report.cohort_summary()
    out = [PRO_SUMMARY_HEADER]
    for cohort in ("all", "target"):
        for condition in ("keep", "revoke"):
            s = summary[(cohort, condition)]
            out.append(f"{cohort},{condition},{s['users']},"
                       f"{s['ndcg']:.6f},{s['hit_rate']:.6f}")
    return "\n".join(out) + "\n"


def pro_summary_text(report: ProReport) -> str:
    summary = report.cohort_summary()
    lines = [f"cohort          NDCG@{report.k}   HitRate@{report.k}"]
    for cohort in ("all", "target"):
        for condition in ("keep", "revoke"):
            s = summary[(cohort, condition)]
            label = f"{cohort} ({condition})".ljust(16)
            lines.append(f"{label}{s['ndcg']:.4f}   {s['hit_rate']:.4f}"
                         f"   [{s['users']} users]")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------ ablation

SWEEPABLE = {
    "greedy_retention_weight": (METHOD_SEARCH,),
    "relax_constraint_weight": (METHOD_RELAX,),
    "relax_retention_weight": (METHOD_RELAX,),
}


@dataclass
class SweepPoint:
    param: str
    value: float
    method: str
    k: int
    fidelity: float
    complexity_mean: float | None
    accuracy_mean: float | None


def ablation_sweep(params, dataset, param_name, values, k=10, sample_size=200,
                   seed=0, request_kwargs=None, jobs=1):
    """Rerun the retrospective evaluation at each hyperparameter value."""
    if param_name not in SWEEPABLE:
        raise ContractViolation(f"cannot sweep {param_name!r}")
    methods = SWEEPABLE[param_name]
    points = []
    for value in values:
        kwargs = dict(request_kwargs or {})
        kwargs[param_name] = value
        report = retrospective_eval(
            params, dataset, methods=methods, k_values=(k,),
            sample_size=sample_size, seed=seed, request_kwargs=kwargs, jobs=jobs,
        )
        summary = report.summary()
        for method in methods:
            s = summary[(method, k)]
            points.append(SweepPoint(
                param=param_name, value=value, method=method, k=k,
                fidelity=s["fidelity"],
                complexity_mean=s["complexity_mean"],
                accuracy_mean=s["accuracy_mean"],
            ))
    return points


SWEEP_HEADER = "param,value,method,k,fidelity,complexity_mean,accuracy_mean"


def sweep_csv(points) -> str:
    out = [SWEEP_HEADER]
    for p in points:
        out.append(f"{p.param},{p.value},{p.method},{p.k},{p.fidelity:.6f},"
                   f"{_fmt(p.complexity_mean)},{_fmt(p.accuracy_mean)}")
    return "\n".join(out) + "\n"


# ------------------------------------------------- base-model sanity checks

def popularity_counts(dataset: SplitDataset) -> np.ndarray:
    counts = np.zeros(dataset.n_items)
    for user in dataset.users:
        for item in dataset.train_spans[user]:
            counts[item] += 1
    return counts


def popularity_test_metrics(dataset: SplitDataset, k: int = 10):
    """NDCG/HitRate@k of the popularity ranking on held-out test items."""
    counts = popularity_counts(dataset)
    total_ndcg, total_hit, n = 0.0, 0.0, 0
    for user in dataset.users:
        history = dataset.history_before_test(user)
        held = dataset.test_items[user]
        eligible = np.ones(dataset.n_items, dtype=bool)
        eligible[np.asarray(list(set(history)), dtype=np.int64)] = False
        eligible[held] = True
        rank = rank_from_scores(counts, eligible, held)
        total_ndcg += ndcg_from_rank(rank, k)
        total_hit += 1.0 if 0 < rank <= k else 0.0
        n += 1
    return total_ndcg / n, total_hit / n


def model_test_metrics(params, dataset: SplitDataset, k: int = 10):
    """Model NDCG/HitRate@k on held-out test items (full pre-test history)."""
    users = list(dataset.users)
    sequences = [dataset.history_before_test(u) for u in users]
    scores = _batched_catalog_scores(params, sequences)
    total_ndcg, total_hit = 0.0, 0.0
    for i, user in enumerate(users):
        held = dataset.test_items[user]
        _, ndcg, hit = _held_out_metrics(params, scores[i], sequences[i], held, k)
        total_ndcg += ndcg
        total_hit += hit
    return total_ndcg / len(users), total_hit / len(users)
