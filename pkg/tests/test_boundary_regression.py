import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adsilence.ad_grouping import GroupingParams
from adsilence.boundary_regression import (
    LabelledExample,
    Programme,
    RegressionModel,
    classify_silences,
    cross_validate,
    design_matrix,
    fit_arrays,
    fit_ols,
    label_events,
    load_model,
    predict,
    save_model,
)
from adsilence.energy_analysis import SilenceEvent
from adsilence.errors import DegenerateLabels, InsufficientData, ModelFormatError
from adsilence.evaluation import AnnotationTrack
from adsilence.silence_features import FeatureVector
from oracles import normal_equations


def random_examples(rng, n, pid="p"):
    feats = rng.normal(0, 1, (n, 7)) * [10, 10, 10, 3, 3, 1, 2] + [-10, -30, -80, 10, 8, 0, 1]
    labels = (rng.random(n) < 0.4).astype(float)
    labels[0], labels[1] = 0.0, 1.0
    return [LabelledExample(FeatureVector.from_array(f), y, pid, i)
            for i, (f, y) in enumerate(zip(feats, labels))]


def coef(model):
    return np.array([model.intercept, *model.weights])


def sse(X, y, c):
    r = y - X @ c
    return float(r @ r)


def test_exact_linear_recovery():
    rng = np.random.default_rng(0)
    F = rng.normal(-40, 10, (50, 7))
    y = 0.3 * F[:, 1] + 0.1
    m = fit_arrays(F, y)
    expected = np.zeros(8)
    expected[0], expected[2] = 0.1, 0.3
    np.testing.assert_allclose(coef(m), expected, atol=1e-8)
    oracle = normal_equations(np.column_stack((np.ones(50), F)).tolist(), y.tolist())
    np.testing.assert_allclose(coef(m), oracle, atol=1e-8)


def test_constant_labels_give_constant_model():
    rng = np.random.default_rng(1)
    ex = [LabelledExample(e.features, 1.0, "p", i) for i, e in enumerate(random_examples(rng, 30))]
    with pytest.warns(DegenerateLabels):
        m = fit_ols(ex)
    assert m.intercept == pytest.approx(1.0, abs=1e-8)
    np.testing.assert_allclose(m.weights, 0.0, atol=1e-8)


def test_constant_target_through_solver():
    rng = np.random.default_rng(2)
    m = fit_arrays(rng.normal(0, 1, (40, 7)), np.ones(40))
    assert m.intercept == pytest.approx(1.0, abs=1e-8)
    np.testing.assert_allclose(m.weights, 0.0, atol=1e-8)


@pytest.mark.parametrize("n", [0, 5, 8])
def test_insufficient_data(n):
    rng = np.random.default_rng(3)
    with pytest.raises(InsufficientData):
        fit_ols(random_examples(rng, max(n, 2))[:n])


def test_nine_examples_suffice():
    rng = np.random.default_rng(4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fit_ols(random_examples(rng, 9))


def test_rank_deficient_uses_minimum_norm():
    rng = np.random.default_rng(5)
    F = rng.normal(0, 1, (30, 7))
    F[:, 3] = F[:, 0]  # duplicated column
    y = (rng.random(30) < 0.5).astype(float)
    m = fit_arrays(F, y)
    X = np.column_stack((np.ones(30), F))
    np.testing.assert_allclose(coef(m), np.linalg.pinv(X) @ y, atol=1e-8)
    assert m.weights[0] == pytest.approx(m.weights[3], abs=1e-10)


def test_matches_normal_equation_oracle_and_is_optimal():
    rng = np.random.default_rng(6)
    for _ in range(20):
        ex = random_examples(rng, 50)
        m = fit_ols(ex)
        X, y = design_matrix(ex)
        c = coef(m)
        np.testing.assert_allclose(c, normal_equations(X.tolist(), y.tolist()), atol=1e-8)
        base = sse(X, y, c)
        for j in range(8):
            for d in (-1e-3, 1e-3):
                c2 = c.copy()
                c2[j] += d
                assert sse(X, y, c2) >= base
        cols = X / np.linalg.norm(X, axis=0)
        assert np.max(np.abs(cols.T @ (y - X @ c))) < 1e-6


def test_predict_constant_model():
    m = RegressionModel((0.0,) * 7, 0.5)
    assert predict(m, FeatureVector(-3, 1, 2, 3, 4, 5, 6)) == 0.5


def test_predict_single_term():
    m = RegressionModel((1.0, 0, 0, 0, 0, 0, 0), 0.0)
    assert predict(m, FeatureVector(-10, -30, -90, 1, 1, 1, 1)) == -10


def test_predict_matches_explicit_sum():
    rng = np.random.default_rng(7)
    for _ in range(200):
        w = rng.normal(0, 1, 7)
        f = rng.normal(-30, 20, 7)
        b = float(rng.normal())
        m = RegressionModel(tuple(w), b)
        explicit = math.fsum([b, *(wi * fi for wi, fi in zip(w, f))])
        assert abs(predict(m, FeatureVector.from_array(f)) - explicit) < 1e-12


def _event(i):
    return SilenceEvent(i * 10, i * 10 + 2, i * 10 + 1, -70.0)


def _scored(scores):
    # a single-weight model on max_db makes the score equal to max_db
    m = RegressionModel((1.0, 0, 0, 0, 0, 0, 0), 0.0)
    pairs = [(_event(i), FeatureVector(s, 0, 0, 0, 0, 0, 0)) for i, s in enumerate(scores)]
    return m, pairs


def test_score_equal_to_beta_is_rejected():
    m, pairs = _scored([0.25])
    assert classify_silences(m, pairs) == []


def test_score_just_above_beta_is_kept():
    m, pairs = _scored([0.2500001])
    assert len(classify_silences(m, pairs)) == 1


def test_mixed_batch():
    m, pairs = _scored([0.9, 0.1, 0.3])
    assert classify_silences(m, pairs) == [pairs[0][0], pairs[2][0]]


@given(st.lists(st.floats(-2, 2), max_size=40), st.floats(0.01, 0.98), st.floats(0.0, 0.01))
def test_classify_subsequence_and_monotone(scores, beta, bump):
    m, pairs = _scored(scores)
    lo = classify_silences(RegressionModel(m.weights, 0.0, beta=beta), pairs)
    hi = classify_silences(RegressionModel(m.weights, 0.0, beta=beta + bump), pairs)
    events = [e for e, _ in pairs]
    assert [e for e in events if e in lo] == lo
    assert set(hi) <= set(lo)


def _ann(bounds, total=1000):
    return AnnotationTrack(((0, total - 1),), tuple(bounds), total)


@pytest.mark.parametrize("boundary, label", [(101, 1.0), (120, 0.0), (114, 1.0), (115, 1.0),
                                             (116, 0.0), (88, 1.0), (87, 0.0)])
def test_label_tolerance(boundary, label):
    ev = SilenceEvent(100, 103, 101, -80.0)
    (ex,) = label_events([ev], _ann([boundary]), tolerance_frames=12)
    assert ex.label == label


def test_label_events_carries_identity():
    fv = FeatureVector(1, 2, 3, 4, 5, 6, 7)
    (ex,) = label_events([SilenceEvent(5, 6, 6, -70)], _ann([]), programme_id="X", features=[fv])
    assert (ex.programme_id, ex.anchor_frame, ex.features, ex.label) == ("X", 6, fv, 0.0)


def test_label_must_be_binary():
    with pytest.raises(ValueError):
        LabelledExample(FeatureVector(0, 0, 0, 0, 0, 0, 0), 0.5, "p", 0)


# --- cross-validation -------------------------------------------------------

def toy_programme(pid, rng, total=12000):
    """Two well separated ads blocks of boundary silences plus scattered pauses."""
    events, feats, bounds = [], [], []
    for start in (2000, 8000):
        for k in range(5):
            f = start + k * 400
            events.append(SilenceEvent(f, f + 3, f + 1, -80.0))
            feats.append(FeatureVector(-10 + rng.normal(), -20, -80, 15, 12, -2, 3))
            bounds.append(f + 1)
    for f in (500, 5500, 11000):
        events.append(SilenceEvent(f, f + 2, f + 1, -65.0))
        feats.append(FeatureVector(-25 + rng.normal(), -35, -65, 5, 4, -1, 1))
    order = np.argsort([e.start_frame for e in events])
    blocks = ((2000, 2000 + 4 * 400 + 3), (8000, 8000 + 4 * 400 + 3))
    ann = AnnotationTrack(blocks, tuple(sorted(bounds)), total)
    return Programme(pid, [events[i] for i in order], [feats[i] for i in order], ann)


def instrumented_fit(log):
    def fit(examples, **kw):
        log.append({ex.programme_id for ex in examples})
        return fit_ols(examples, **kw)
    return fit


def test_two_programmes_two_folds():
    rng = np.random.default_rng(8)
    corpus = [toy_programme("A", rng), toy_programme("B", rng)]
    log = []
    rep = cross_validate(corpus, fit=instrumented_fit(log))
    assert [f[0] for f in rep.folds] == ["A", "B"]
    assert log == [{"B"}, {"A"}]


def test_folds_are_by_programme():
    rng = np.random.default_rng(9)
    corpus = [toy_programme(p, rng) for p in ("A", "A", "B", "C")]
    log = []
    rep = cross_validate(corpus, fit=instrumented_fit(log))
    assert [f[0] for f in rep.folds] == ["A", "B", "C"]
    assert log == [{"B", "C"}, {"A", "C"}, {"A", "B"}]
    # the two "A" entries are both scored in the "A" fold
    assert rep.folds[0][1].total == 2 * 12000


def test_pooled_counts_are_fold_sums():
    rng = np.random.default_rng(10)
    corpus = [toy_programme(p, rng) for p in "WXYZ"]
    rep = cross_validate(corpus)
    for field in ("tp", "tn", "fp", "fn"):
        assert getattr(rep.pooled, field) == sum(getattr(c, field) for _, c, _ in rep.folds)
    assert rep.pooled.total == 4 * 12000
    assert rep.pooled_mcc > 0.99


def test_cross_validation_needs_two_programmes():
    rng = np.random.default_rng(11)
    with pytest.raises(InsufficientData):
        cross_validate([toy_programme("A", rng), toy_programme("A", rng)])


def test_cross_validation_respects_grouping_params():
    rng = np.random.default_rng(12)
    corpus = [toy_programme(p, rng) for p in "AB"]
    rep = cross_validate(corpus, params=GroupingParams(min_region_frames=5000))
    assert rep.pooled.tp == 0 and rep.pooled.fp == 0


# --- persistence -----------------------------------------------------------

def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(13)
    for i in range(20):
        m = RegressionModel(tuple(rng.normal(0, 10, 7) * 10.0 ** rng.integers(-20, 20)),
                            float(rng.normal() * 1e-7), beta=float(rng.uniform(0.01, 0.99)),
                            eta=float(-rng.uniform(1, 100)), half_width_frames=int(rng.integers(1, 500)))
        save_model(m, tmp_path / f"m{i}.json")
        back = load_model(tmp_path / f"m{i}.json")
        assert back == m
        assert [v.hex() for v in back.weights] == [v.hex() for v in m.weights]


def _doc(tmp_path, **changes):
    save_model(RegressionModel((0.1,) * 7, 0.2), tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    doc.update(changes)
    return doc


def _write(tmp_path, text):
    p = tmp_path / "bad.json"
    p.write_text(text)
    return p


def test_bad_version(tmp_path):
    p = _write(tmp_path, json.dumps(_doc(tmp_path, format_version=99)))
    with pytest.raises(ModelFormatError):
        load_model(p)


def test_nan_weight(tmp_path):
    text = json.dumps(_doc(tmp_path)).replace('"weights": [0.1', '"weights": [NaN')
    with pytest.raises(ModelFormatError):
        load_model(_write(tmp_path, text))


@pytest.mark.parametrize("changes", [
    {"weights": [0.1] * 6},
    {"weights": ["0.1"] * 7},
    {"intercept": "Infinity"},
    {"beta": 0.0},
    {"beta": 1.5},
    {"eta": 3.0},
    {"half_width_frames": 1.5},
    {"stat_conventions": "sample-moments"},
])
def test_invalid_fields(tmp_path, changes):
    with pytest.raises(ModelFormatError):
        load_model(_write(tmp_path, json.dumps(_doc(tmp_path, **changes))))


def test_missing_field(tmp_path):
    doc = _doc(tmp_path)
    del doc["intercept"]
    with pytest.raises(ModelFormatError):
        load_model(_write(tmp_path, json.dumps(doc)))


def test_missing_file(tmp_path):
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "absent.json")


def test_not_json(tmp_path):
    with pytest.raises(ModelFormatError):
        load_model(_write(tmp_path, "weights=1"))
