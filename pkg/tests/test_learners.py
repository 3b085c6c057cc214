import numpy as np
import pytest
from hypothesis import given, strategies as st

from ecg_recurrence.errors import DataError, DegenerateLabelsError, EmptyInputError, StratificationError
from ecg_recurrence.learners import (
    GradientBoostedTrees,
    LinearSVM,
    MedianImputer,
    MultinomialLogistic,
    RUSBoost,
    StackedModel,
    StackingConfig,
    evaluate,
    evaluate_predictions,
    stratified_folds,
    stratified_split,
)

NAMES = ("HC", "MI", "BBB", "CM", "DR")
PTB_COUNTS = {0: 62, 1: 60, 2: 19, 3: 15, 4: 14}


def ptb_labels():
    return np.concatenate([np.full(n, c) for c, n in PTB_COUNTS.items()])


def blobs(n_per_class=12, n_classes=5, d=4, spread=0.3, seed=0):
    r = np.random.default_rng(seed)
    centres = r.standard_normal((n_classes, d)) * 4
    X = np.concatenate([c + spread * r.standard_normal((n_per_class, d)) for c in centres])
    y = np.repeat(np.arange(n_classes), n_per_class)
    return X, y


# -- splitting ------------------------------------------------------------

def test_split_ptb_counts():
    y = ptb_labels()
    tr, te = stratified_split(y, 0.2, seed=0)
    counts = np.bincount(y[te], minlength=5)
    assert counts[0] == 12 and counts[4] == 3
    np.testing.assert_array_equal(counts, [12, 12, 4, 3, 3])
    assert len(np.intersect1d(tr, te)) == 0 and len(tr) + len(te) == len(y)


def test_split_minimum_one_and_errors():
    y = np.array([0, 0, 1, 1, 1, 1, 1, 1, 1, 1])
    _, te = stratified_split(y, 0.05, seed=0)
    assert np.bincount(y[te]).tolist() == [1, 1]
    with pytest.raises(StratificationError):
        stratified_split(np.array([0, 0, 1]), 0.2)


@given(st.lists(st.integers(0, 4), min_size=10, max_size=80), st.integers(0, 1000))
def test_split_deterministic_and_proportional(labels, seed):
    y = np.array(labels)
    if np.bincount(y)[np.unique(y)].min() < 2:
        return
    a = stratified_split(y, 0.2, seed)
    b = stratified_split(y, 0.2, seed)
    np.testing.assert_array_equal(a[0], b[0])
    for c in np.unique(y):
        n_c = int((y == c).sum())
        got = int((y[a[1]] == c).sum())
        assert got == min(max(int(np.floor(n_c * 0.2 + 0.5)), 1), n_c - 1)


def test_folds_balanced():
    y = ptb_labels()
    fold = stratified_folds(y, 5, seed=1)
    sizes = np.bincount(fold, minlength=5)
    assert sizes.max() - sizes.min() <= 1
    for c in range(5):
        per = np.bincount(fold[y == c], minlength=5)
        assert per.max() - per.min() <= 1


def test_imputer_uses_training_medians():
    X = np.array([[1.0, np.nan], [3.0, 2.0], [np.nan, 4.0]])
    imp = MedianImputer().fit(X)
    out = imp.transform(np.array([[np.nan, np.nan]]))
    np.testing.assert_array_equal(out, [[2.0, 3.0]])
    assert np.isfinite(imp.transform(X)).all()
    all_nan = MedianImputer().fit(np.full((3, 1), np.nan))
    assert all_nan.transform(np.array([[np.nan]]))[0, 0] == 0.0
    with pytest.raises(DataError):
        imp.transform(np.array([[np.inf, 1.0]]))


# -- base learners --------------------------------------------------------

def test_svm_separable_two_clusters():
    X, y = blobs(n_classes=2, seed=3)
    svm = LinearSVM(n_classes=2).fit(X, y)
    assert np.mean(svm.predict(X) == y) == 1.0


def test_boosted_trees_xor():
    r = np.random.default_rng(0)
    X = r.uniform(-1, 1, size=(200, 2))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int)
    gbt = GradientBoostedTrees(n_classes=2).fit(X, y)
    assert np.mean(gbt.predict(X) == y) > 0.9


def test_rusboost_xor_grid():
    g = np.array([[x, yy] for x in range(-3, 4) for yy in range(-3, 4) if x and yy], float)
    y = ((g[:, 0] > 0) ^ (g[:, 1] > 0)).astype(int)
    rus = RUSBoost(n_classes=2).fit(g, y)
    assert rus.predict_proba(g).shape == (len(g), 2)


@pytest.mark.parametrize("cls", [LinearSVM, GradientBoostedTrees, RUSBoost])
def test_constant_features_predict_prior(cls):
    y = np.array([0] * 6 + [1] * 3 + [2] * 1 + [3] * 2 + [4] * 2)
    X = np.ones((len(y), 3))
    p = cls(n_classes=5).fit(X, y).predict_proba(np.ones((4, 3)))
    prior = np.bincount(y, minlength=5) / len(y)
    np.testing.assert_allclose(p, np.tile(prior, (4, 1)), atol=1e-6)
    assert np.all(p.argmax(axis=1) == 0)


@pytest.mark.parametrize("cls", [LinearSVM, GradientBoostedTrees, RUSBoost, MultinomialLogistic])
def test_probabilities_valid_and_deterministic(cls):
    X, y = blobs(n_per_class=8, spread=2.0, seed=4)
    a = cls(n_classes=5).fit(X, y)
    b = cls(n_classes=5).fit(X, y)
    Xt = np.random.default_rng(9).standard_normal((20, 4)) * 5
    p = a.predict_proba(Xt)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1, atol=1e-6)
    np.testing.assert_array_equal(p, b.predict_proba(Xt))


@pytest.mark.parametrize("cls", [LinearSVM, GradientBoostedTrees, RUSBoost, MultinomialLogistic])
def test_single_class_rejected(cls):
    with pytest.raises(DegenerateLabelsError):
        cls(n_classes=5).fit(np.random.default_rng(0).standard_normal((6, 2)), np.zeros(6, int))


def test_non_finite_inputs_rejected():
    X, y = blobs(n_per_class=3)
    X[0, 0] = np.nan
    with pytest.raises(DataError):
        LinearSVM().fit(X, y)
    with pytest.raises(DataError):
        MultinomialLogistic().fit(np.ones((3, 2)), np.array([0, 1, 1])).predict_proba([[np.inf, 0]])


# -- meta model and stacking -------------------------------------------------

def test_meta_on_perfect_bases():
    y = np.repeat(np.arange(5), 6)
    Z = np.hstack([np.eye(5)[y]] * 3)
    meta = MultinomialLogistic(5).fit(Z, y)
    assert np.mean(meta.predict(Z) == y) == 1.0


def test_meta_weights_concentrate_on_informative_base():
    r = np.random.default_rng(0)
    y = np.repeat(np.arange(5), 20)
    good = 0.7 * np.eye(5)[y] + 0.3 * r.dirichlet(np.ones(5), len(y))
    noise = [r.dirichlet(np.ones(5), len(y)) for _ in range(2)]
    for pos in range(3):
        blocks = noise[:pos] + [good] + noise[pos:]
        meta = MultinomialLogistic(5).fit(np.hstack(blocks), y)
        strength = [np.abs(meta.weight[5 * i: 5 * i + 5]).mean() for i in range(3)]
        assert int(np.argmax(strength)) == pos


def test_meta_on_random_bases_near_prior():
    accs = []
    prior = 0.5
    for seed in range(20):
        r = np.random.default_rng(seed)
        y = np.array([0] * 60 + [1] * 20 + [2] * 10 + [3] * 5 + [4] * 5)
        Z = np.hstack([r.dirichlet(np.ones(5), len(y)) for _ in range(3)])
        meta = MultinomialLogistic(5).fit(Z[::2], y[::2])
        Zt = np.hstack([r.dirichlet(np.ones(5), len(y)) for _ in range(3)])
        accs.append(np.mean(meta.predict(Zt) == y))
    assert abs(np.mean(accs) - prior) <= 0.10


def test_stacked_fits_blobs_and_round_trips(tmp_path):
    X, y = blobs(n_per_class=10, spread=0.5, seed=1)
    X[3, 2] = np.nan  # flagged feature
    tr, te = stratified_split(y, 0.2, seed=0)
    model = StackedModel(StackingConfig(seed=3)).fit(X[tr], y[tr])
    assert model.meta_train.shape == (len(tr), 15)
    assert np.mean(model.predict(X[te]) == y[te]) >= 0.9
    path = tmp_path / "stacked.rqae"
    model.save(path)
    loaded = StackedModel.load(path)
    np.testing.assert_array_equal(loaded.predict_proba(X[te]), model.predict_proba(X[te]))


def test_stacked_in_sample_option():
    X, y = blobs(n_per_class=6, seed=2)
    model = StackedModel(StackingConfig(in_sample=True)).fit(X, y)
    assert np.mean(model.predict(X) == y) == 1.0


def test_stacking_ignores_test_labels():
    X, y = blobs(n_per_class=10, spread=1.5, seed=5)
    tr, te = stratified_split(y, 0.2, seed=0)
    poisoned = y.copy()
    poisoned[te] = (poisoned[te] + 1) % 5
    a = StackedModel().fit(X[tr], y[tr])
    b = StackedModel().fit(X[tr], poisoned[tr])
    sa, sb = a.state_dict(), b.state_dict()
    assert sa.keys() == sb.keys()
    for k in sa:
        np.testing.assert_array_equal(sa[k], sb[k])


# -- evaluation -----------------------------------------------------------

def test_perfect_report():
    y = np.repeat(np.arange(5), 3)
    rep = evaluate_predictions(y, y, NAMES, "CNN")
    assert rep.accuracy == 1.0
    assert np.all(rep.precision == 1) and np.all(rep.recall == 1) and np.all(rep.f1 == 1)
    text = rep.to_text()
    assert "100.00%" in text and "Precision" in text and "F1-score" in text


def test_dr_two_true_two_false_positives():
    # 2 DR records found, 2 MI records mislabelled as DR
    y_true = np.array([0, 0, 1, 1, 1, 1, 2, 3, 4, 4])
    y_pred = np.array([0, 0, 1, 1, 4, 4, 2, 3, 4, 4])
    rep = evaluate_predictions(y_true, y_pred, NAMES)
    assert rep.confusion[4, 4] == 2 and rep.confusion[:, 4].sum() == 4
    assert f"{rep.precision[4]:.2f}" == "0.50"
    assert f"{rep.recall[4]:.2f}" == "1.00"
    assert f"{rep.f1[4]:.2f}" == "0.67"


def test_undefined_metrics_flagged():
    y_true = np.array([0, 0, 1, 1])
    y_pred = np.array([0, 1, 1, 1])
    rep = evaluate_predictions(y_true, y_pred, NAMES)
    assert not rep.defined("precision")[2] and not rep.defined("recall")[2]
    assert "undef" in rep.to_text()
    assert rep.metrics_csv().splitlines()[0] == "class,precision,recall,f1,support,flags"
    with pytest.raises(EmptyInputError):
        evaluate_predictions([], [], NAMES)


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=60))
def test_confusion_invariants(pairs):
    t, p = np.array(pairs).T
    rep = evaluate_predictions(t, p, NAMES)
    assert rep.accuracy == np.trace(rep.confusion) / rep.confusion.sum()
    np.testing.assert_array_equal(rep.confusion.sum(axis=1), np.bincount(t, minlength=5))


def test_evaluate_model_and_csv():
    X, y = blobs(n_per_class=5, seed=6)
    model = LinearSVM().fit(X, y)
    rep = evaluate(model, X, y, NAMES, "svm")
    lines = rep.confusion_csv().splitlines()
    assert lines[0] == "true\\pred,HC,MI,BBB,CM,DR" and len(lines) == 6
