import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxvad.datamodel import CATEGORIES, UsageError, ValidationError
from ctxvad.metrics import (
    ConfusionMatrix,
    ScoredTrack,
    UndefinedAUCError,
    accuracy,
    binarize,
    confusion,
    roc_auc,
    save_roc_curve,
)

from oracles import auc_pairwise


def track(scores, labels, vid="v"):
    return ScoredTrack(vid, np.asarray(scores, dtype=float), np.asarray(labels))


def test_perfect_separation():
    t = track([0, 0, 1, 1], [0, 0, 1, 1])
    assert roc_auc([t]).auc == pytest.approx(1.0)


def test_constant_scores_give_half():
    t = track([0.3] * 10, [0, 1] * 5)
    assert roc_auc([t]).auc == 0.5


def test_single_class_raises():
    with pytest.raises(UndefinedAUCError):
        roc_auc([track([0.1, 0.9], [1, 1])])
    with pytest.raises(UndefinedAUCError):
        roc_auc([track([0.1, 0.9], [0, 0])])


def test_matches_pairwise_oracle_random():
    rng = np.random.default_rng(0)
    for _ in range(30):
        n = int(rng.integers(5, 60))
        scores = rng.choice([0.1, 0.25, 0.5, 0.8], size=n)  # force ties
        labels = rng.integers(0, 2, size=n)
        if labels.sum() in (0, n):
            continue
        got = roc_auc([track(scores, labels)]).auc
        assert got == pytest.approx(auc_pairwise(scores, labels), abs=1e-12)


def test_micro_average_over_tracks():
    a = track([0.9, 0.1], [1, 0], "a")
    b = track([0.6, 0.7], [0, 1], "b")
    scores = np.r_[a.scores, b.scores]
    labels = np.r_[a.labels, b.labels]
    assert roc_auc([a, b]).auc == pytest.approx(auc_pairwise(scores, labels))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1, width=32), st.integers(0, 1)),
                min_size=4, max_size=80))
def test_auc_properties(pairs):
    scores = np.array([p[0] for p in pairs])
    labels = np.array([p[1] for p in pairs])
    if labels.sum() in (0, labels.size):
        return
    t = track(scores, labels)
    auc = roc_auc([t]).auc
    assert auc == pytest.approx(auc_pairwise(scores, labels), abs=1e-12)
    # invariance under strictly increasing transform
    warped = track(scores**3 / 3 + scores, labels)
    assert roc_auc([warped]).auc == pytest.approx(auc, abs=1e-12)
    # complement symmetry when no ties
    # complement can introduce ties of its own near the float precision limit
    if len(np.unique(scores)) == scores.size and \
            len(np.unique(1 - scores)) == scores.size:
        flipped = track(1 - scores, labels)
        assert roc_auc([flipped]).auc == pytest.approx(1 - auc, abs=1e-12)


def test_roc_curve_endpoints(tmp_path):
    rng = np.random.default_rng(1)
    t = track(rng.uniform(0, 1, 50), rng.integers(0, 2, 50))
    result = roc_auc([t])
    assert result.fpr[0] == 0 and result.tpr[0] == 0
    assert result.fpr[-1] == 1 and result.tpr[-1] == 1
    assert (np.diff(result.fpr) >= 0).all() and (np.diff(result.tpr) >= 0).all()
    # trapezoidal integral of the curve equals the rank statistic
    assert np.trapezoid(result.tpr, result.fpr) == pytest.approx(result.auc, abs=1e-12)
    out = tmp_path / "roc.tsv"
    save_roc_curve(result, out)
    data = np.loadtxt(out)
    assert data.shape == (result.fpr.size, 2)


def test_binarize():
    assert binarize([0.2, 0.5, 0.9]).tolist() == [0, 1, 1]
    assert binarize([0.0, 0.0]).tolist() == [0, 0]
    assert binarize([0.0, 0.3], threshold=0.0).tolist() == [1, 1]


def test_accuracy():
    assert accuracy(["Crash", "Fire"], ["Crash", "Fire"]) == 1.0
    assert accuracy(["Crash", "Fire"], ["Fire", "Crash"]) == 0.0
    assert accuracy(["a", "b", "c", "d", "e"], ["a", "b", "c", "x", "y"]) == 0.6
    with pytest.raises(UsageError):
        accuracy([], [])


def test_confusion_diagonal_and_row_sums():
    preds = ["Crash", "Fire", "Fire", "Crash"]
    cm = confusion(preds, preds)
    assert cm.counts.sum() == 4
    assert np.array_equal(cm.counts, np.diag(np.diag(cm.counts)))


def test_confusion_hand_case(tmp_path):
    true = ["Crash", "Crash", "Fire", "Fire"]
    pred = ["Crash", "Fire", "Fire", "Fire"]
    cm = confusion(pred, true)
    i_crash = CATEGORIES.index("Crash")
    i_fire = CATEGORIES.index("Fire")
    assert cm.counts[i_crash, i_crash] == 1
    assert cm.counts[i_crash, i_fire] == 1
    assert cm.counts[i_fire, i_fire] == 2
    assert cm.counts.sum() == 4
    # accuracy = trace / total
    assert np.trace(cm.counts) / cm.counts.sum() == pytest.approx(
        accuracy(pred, true)
    )
    norm = cm.normalized()
    assert norm[i_crash].sum() == pytest.approx(1.0)
    cm.save(tmp_path / "cm.tsv")
    assert (tmp_path / "cm.tsv").read_text().count("\n") == 15


def test_confusion_unknown_category():
    with pytest.raises(ValidationError):
        confusion(["NotACategory"], ["Crash"])


def test_scored_track_validation():
    with pytest.raises(ValidationError):
        ScoredTrack("v", np.array([0.1, np.nan]), np.array([0, 1]))
    with pytest.raises(ValidationError):
        ScoredTrack("v", np.array([0.1]), np.array([0, 1]))
    with pytest.raises(ValidationError):
        ScoredTrack("v", np.array([0.1, 0.2]), np.array([0, 2]))
