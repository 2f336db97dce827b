import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctrlrec.errors import ContractViolation
from ctrlrec.metrics import (
    complexity,
    control_accuracy,
    hit_rate_at_k,
    ndcg_at_k,
    ndcg_from_rank,
)
from ctrlrec.windows import BINARY, RELAXED, MaskVector


def test_complexity_direct_ratios():
    values = np.zeros(120)
    values[:5] = 1.0
    assert complexity(MaskVector(values, BINARY), 100) == 0.05
    assert complexity(MaskVector.zeros(10), 10) == 0.0
    short = np.zeros(50)
    short[(3, 7),] = 1.0
    assert complexity(MaskVector(short, BINARY), 10) == 0.2


def test_complexity_rejects_relaxed_masks():
    with pytest.raises(ContractViolation):
        complexity(MaskVector(np.array([0.4]), RELAXED), 1)
    with pytest.raises(ContractViolation):
        complexity(MaskVector.zeros(3), 0)


@settings(max_examples=300, deadline=None)
@given(
    ones=st.lists(st.integers(0, 59), max_size=40),
    effective=st.integers(1, 60),
)
def test_complexity_matches_set_count(ones, effective):
    values = np.zeros(60)
    for p in ones:
        values[p] = 1.0
    mask = MaskVector(values, BINARY)
    assert complexity(mask, effective) == len(set(ones)) / effective


def test_control_accuracy_examples():
    # removed exactly the undesired item
    assert control_accuracy({"A", "B"}, {"B", "X"}, {"A"}) == 1.0
    # removed one extra item alongside the undesired one
    assert control_accuracy({"A", "B", "C"}, {"C", "X", "Y"}, {"A"}) == 0.5
    # removed nothing
    assert control_accuracy({"A", "B"}, {"A", "B"}, {"A"}) == 0.0


def test_control_accuracy_precondition():
    with pytest.raises(ContractViolation):
        control_accuracy({"A"}, {"A"}, {"Z"})


@settings(max_examples=300, deadline=None)
@given(
    original=st.frozensets(st.integers(0, 30), min_size=1, max_size=10),
    counterfactual=st.frozensets(st.integers(0, 30), max_size=10),
    data=st.data(),
)
def test_control_accuracy_matches_set_arithmetic(original, counterfactual, data):
    undesired = data.draw(
        st.frozensets(st.sampled_from(sorted(original)), min_size=1)
    )
    got = control_accuracy(original, counterfactual, undesired)
    removed = set(original) - set(counterfactual)
    union = removed | set(undesired)
    expected = len(removed & set(undesired)) / len(union)
    assert got == expected
    assert 0.0 <= got <= 1.0


def test_ndcg_closed_forms():
    assert ndcg_at_k([7, 3, 5], 7, 10) == 1.0
    assert abs(ndcg_at_k([3, 7, 5], 7, 10) - 1.0 / math.log2(3)) <= 1e-12
    assert ndcg_at_k([3, 5, 9], 7, 3) == 0.0
    assert ndcg_at_k([3, 5, 7], 7, 2) == 0.0  # relevant outside the cutoff


def test_hit_rate():
    assert hit_rate_at_k([7, 3], 7, 10) == 1.0
    assert hit_rate_at_k([3, 5], 7, 10) == 0.0


@settings(max_examples=200, deadline=None)
@given(rank=st.integers(0, 30), k=st.integers(1, 20))
def test_ndcg_from_rank_consistent_with_list_form(rank, k):
    ids = list(range(1, 31))
    held = ids[rank - 1] if rank >= 1 else 0  # 0 never appears in ids
    expected = ndcg_at_k(ids, held, k) if rank >= 1 else 0.0
    assert ndcg_from_rank(rank, k) == expected
