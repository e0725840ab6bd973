"""Paired DeLong test against the O(n^2) structural-components oracle."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from densaug.delong import (
    DelongInput,
    build_delong_input,
    delong_compare,
    paired_variance,
    rank_auc,
)
from densaug.detection import ScoredBox
from densaug.records import MassBox

from oracles import oracle_delong, oracle_roc_auc, random_detection_instance


def _paired_case(rng, n=80, signal_a=1.5, signal_b=1.0):
    labels = np.array([1] * (n // 2) + [0] * (n // 2))
    base = rng.normal(0, 1, size=n)
    scores_a = base + signal_a * labels + rng.normal(0, 0.6, size=n)
    scores_b = base + signal_b * labels + rng.normal(0, 0.6, size=n)
    return scores_a, scores_b, labels


def test_identical_inputs_give_p_one(rng):
    scores, _, labels = _paired_case(rng)
    result = delong_compare(scores, scores, labels)
    assert result.auc_a == result.auc_b
    assert result.z == 0.0
    assert result.p_value == 1.0


def test_separating_vs_random_significant(rng):
    n = 50
    labels = np.array([1] * 25 + [0] * 25)
    separating = labels * 1.0 + np.linspace(0, 0.01, n)  # perfect separation
    random_scores = rng.uniform(0, 1, size=n)
    result = delong_compare(separating, random_scores, labels)
    assert result.auc_a == pytest.approx(1.0)
    assert result.p_value < 0.01
    # oracle agrees on the conclusion
    _, _, _, p_oracle = oracle_delong(separating, random_scores, labels)
    assert p_oracle < 0.01


def test_fast_variance_matches_oracle(rng):
    for n in (10, 40, 200):
        scores_a, scores_b, labels = _paired_case(rng, n=n)
        # inject ties to exercise midranks
        scores_a = np.round(scores_a, 1)
        scores_b = np.round(scores_b, 1)
        pos = np.stack([scores_a[labels == 1], scores_b[labels == 1]], axis=1)
        neg = np.stack([scores_a[labels == 0], scores_b[labels == 0]], axis=1)
        aucs, cov, _ = paired_variance(pos, neg)
        var_fast = cov[0, 0] + cov[1, 1] - 2 * cov[0, 1]
        auc_a, auc_b, var_naive, _ = oracle_delong(scores_a, scores_b, labels)
        assert aucs[0] == pytest.approx(auc_a, abs=1e-10)
        assert aucs[1] == pytest.approx(auc_b, abs=1e-10)
        assert var_fast == pytest.approx(var_naive, abs=1e-10)


def test_p_symmetric(rng):
    scores_a, scores_b, labels = _paired_case(rng)
    ab = delong_compare(scores_a, scores_b, labels)
    ba = delong_compare(scores_b, scores_a, labels)
    assert ab.p_value == pytest.approx(ba.p_value, abs=1e-12)
    assert ab.z == pytest.approx(-ba.z, abs=1e-12)


def test_degenerate_all_tied_flagged():
    labels = np.array([1, 1, 0, 0])
    tied = np.ones(4)
    result = delong_compare(tied, tied, labels)
    assert result.degenerate
    assert result.p_value == 1.0


def test_auc_invariant_under_monotone_transform(rng):
    scores_a, scores_b, labels = _paired_case(rng)
    r1 = delong_compare(scores_a, scores_b, labels)
    r2 = delong_compare(np.exp(scores_a), np.exp(scores_b), labels)
    assert r1.auc_a == pytest.approx(r2.auc_a, abs=1e-12)
    assert r1.auc_b == pytest.approx(r2.auc_b, abs=1e-12)


def test_rank_auc_matches_pair_counting(rng):
    pos = rng.normal(1, 1, size=30).round(1)
    neg = rng.normal(0, 1, size=40).round(1)
    assert rank_auc(pos, neg) == pytest.approx(oracle_roc_auc(pos, neg), abs=1e-12)


def test_input_validation():
    with pytest.raises(ValueError):
        DelongInput(scores_a=[1, 2], scores_b=[1.0], labels=[1, 0], case_ids=["a", "b"])
    with pytest.raises(ValueError):
        delong_compare(np.ones(3), np.ones(3), np.ones(3, dtype=int))  # no negatives


def test_build_delong_input_pairing(rng):
    preds_a, gt = random_detection_instance(rng)
    preds_b, _ = random_detection_instance(rng)
    preds_b = {k: preds_b.get(k, []) for k in gt}
    pair = build_delong_input(preds_a, preds_b, gt)
    n_lesions = sum(len(v) for v in gt.values())
    assert (pair.labels == 1).sum() == n_lesions
    assert len(pair.scores_a) == len(pair.scores_b) == len(pair.case_ids)
    assert len(set(pair.case_ids)) == len(pair.case_ids)


def test_build_delong_input_caps_fps():
    gt = {"a": [MassBox(0, 0, 5, 5)]}
    far = [ScoredBox(box=MassBox(50 + 7 * i, 50, 5, 5), score=0.9 - 0.01 * i) for i in range(15)]
    preds_a = {"a": far}
    preds_b = {"a": far[:2]}
    pair = build_delong_input(preds_a, preds_b, gt, fppi_cap=10)
    assert (pair.labels == 0).sum() == 10  # truncated to the cap, padded for model b
    assert (pair.scores_b[pair.labels == 0] == 0.0).sum() == 8


def test_missed_lesion_scores_zero():
    gt = {"a": [MassBox(0, 0, 5, 5)]}
    pair = build_delong_input({"a": []}, {"a": []}, gt)
    assert pair.scores_a[0] == 0.0 and pair.labels[0] == 1


def test_pad_to_cap_aligns_case_lists(rng):
    preds_a, gt = random_detection_instance(rng)
    preds_b, _ = random_detection_instance(rng)
    preds_b = {k: preds_b.get(k, []) for k in gt}
    pair1 = build_delong_input(preds_a, preds_b, gt, pad_to_cap=True)
    pair2 = build_delong_input(preds_b, preds_a, gt, pad_to_cap=True)
    assert pair1.case_ids == pair2.case_ids
    assert (pair1.labels == 0).sum() == 10 * len(gt)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 99_999))
def test_variance_oracle_property(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    n = int(rng.integers(6, 60)) * 2
    scores_a, scores_b, labels = _paired_case(rng, n=n)
    scores_a = np.round(scores_a, 1)
    scores_b = np.round(scores_b, 1)
    result = delong_compare(scores_a, scores_b, labels)
    auc_a, auc_b, var_naive, p_naive = oracle_delong(scores_a, scores_b, labels)
    assert result.auc_a == pytest.approx(auc_a, abs=1e-10)
    assert result.p_value == pytest.approx(p_naive, abs=1e-9)
