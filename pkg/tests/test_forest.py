import numpy as np
import pytest

from helpers import synthetic_table, two_moons
from salience_lab.forest import (
    LEAF,
    ExtraTreesModel,
    ForestParams,
    accuracy,
    fit_forest,
    genre_shuffle_analysis,
    gini_importance,
    importance_report,
    permutation_mda,
    predict_proba,
    write_importance,
)


@pytest.fixture(scope="module")
def signal_noise():
    rng = np.random.default_rng(0)
    N = 2000
    s = rng.standard_normal(N)
    cols = {"signal": s, "noise1": rng.standard_normal(N), "noise2": rng.standard_normal(N),
            "const": np.ones(N)}
    return synthetic_table(cols, (s > 0).astype(int))


def test_separable_single_feature():
    x = np.arange(40.0)
    t = synthetic_table({"x": x}, (x >= 20).astype(int))
    m = fit_forest(t, params=ForestParams(trees=10), seed=1)
    assert accuracy(m, t) == 1.0


def test_same_seed_same_model_any_threads(signal_noise):
    a = fit_forest(signal_noise, params=ForestParams(trees=12), seed=5, threads=1)
    b = fit_forest(signal_noise, params=ForestParams(trees=12), seed=5, threads=4)
    c = fit_forest(signal_noise, params=ForestParams(trees=12), seed=6)
    assert a.model_hash() == b.model_hash()
    assert a.model_hash() != c.model_hash()


def test_two_moons_held_out():
    rng = np.random.default_rng(1)
    X, lab = two_moons(2000, 0.15, rng)
    t = synthetic_table({"x": X[:, 0], "y": X[:, 1]}, lab)
    train = t.with_data(t.data.iloc[:1500].reset_index(drop=True))
    test = t.with_data(t.data.iloc[1500:].reset_index(drop=True))
    m = fit_forest(train, params=ForestParams(trees=50), seed=0)
    assert accuracy(m, test) > 0.9


def test_probabilities(signal_noise):
    m = fit_forest(signal_noise, params=ForestParams(trees=20), seed=0)
    p = predict_proba(m, signal_noise)
    assert ((p >= 0) & (p <= 1)).all()
    # far from the boundary every tree agrees
    far = signal_noise.data["signal"].to_numpy() > 2.5
    assert np.all(p[far] == 1.0)
    assert np.allclose(1 - p, predict_proba_not(m, signal_noise))
    for tree in m.trees:
        leaves = tree.feature == LEAF
        assert np.all((tree.prob[leaves] >= 0) & (tree.prob[leaves] <= 1))


def predict_proba_not(m, t):
    # complement computed from leaf class counts directly
    X = m._encode(t)
    votes = np.zeros(len(t))
    for tree in m.trees:
        neg = (tree.n_samples - tree.n_positive) / np.maximum(tree.n_samples, 1)
        node = np.zeros(len(t), dtype=int)
        while True:
            f = tree.feature[node]
            inner = f != LEAF
            if not inner.any():
                break
            x = X[np.arange(len(t)), np.where(inner, f, 0)]
            go_left = x < tree.threshold[node]
            node = np.where(inner, np.where(go_left, tree.left[node], tree.right[node]), node)
        votes += neg[node]
    return votes / len(m.trees)


def test_adding_trees_moves_prediction_by_at_most_one_share(signal_noise):
    small = fit_forest(signal_noise, params=ForestParams(trees=9), seed=3)
    big = fit_forest(signal_noise, params=ForestParams(trees=10), seed=3)
    diff = np.abs(predict_proba(big, signal_noise) - predict_proba(small, signal_noise))
    assert diff.max() <= 1 / 10 + 1e-12


def test_gini_importance(signal_noise):
    m = fit_forest(signal_noise, params=ForestParams(trees=30), seed=0)
    g = gini_importance(m)
    assert sum(g.values()) == pytest.approx(1.0, abs=1e-9)
    assert g["const"] == 0.0
    assert g["signal"] > 0.9


def test_unused_feature_has_zero_importance(signal_noise):
    m = fit_forest(signal_noise, features=["signal", "noise1"], params=ForestParams(trees=5, k_features="all",
                                                                                   max_depth=1), seed=0)
    g = gini_importance(m)
    # a single split on each tree: the decision stump sticks to the signal
    assert g["noise1"] == 0.0 and g["signal"] == 1.0


def test_mda(signal_noise):
    m = fit_forest(signal_noise, params=ForestParams(trees=30), seed=0)
    mda = permutation_mda(m, signal_noise, repeats=3, seed=0)
    acc = accuracy(m, signal_noise)
    assert abs(mda["noise1"]) < 0.01 and mda["const"] == 0.0
    # shuffling the only informative column drops accuracy to chance on balanced data
    assert mda["signal"] == pytest.approx(acc - 0.5, abs=0.03)
    with pytest.raises(ValueError):
        permutation_mda(m, signal_noise, repeats=0)


def test_importance_report(tmp_path, signal_noise):
    m = fit_forest(signal_noise, params=ForestParams(trees=10), seed=0)
    df = importance_report(gini_importance(m), permutation_mda(m, signal_noise, repeats=1))
    assert df["feature"].iloc[0] == "signal"
    assert df["rank"].tolist() == list(range(1, 5))
    path = tmp_path / "imp.csv"
    write_importance(df, path, {"seed": 0})
    assert path.read_text().splitlines()[1] == "feature,rank,gini,gini_z,mda,mda_z,mean_z"
    with pytest.raises(ValueError):
        importance_report()


def genre_table(dependent, rng, n=1200):
    genre = rng.choice(["news", "fiction", "whow"], n)
    x = rng.standard_normal(n)
    y = (genre == "news") if dependent else (x > 0)
    return synthetic_table({"genre": genre.astype(object), "x": x}, y.astype(int))


def test_shuffle_identity_is_empty():
    t = genre_table(True, np.random.default_rng(2))
    m = fit_forest(t, params=ForestParams(trees=20), seed=0)
    rep = genre_shuffle_analysis(m, t, permutation=np.arange(len(t)))
    assert rep.flips == []


def test_shuffle_genre_independent_data():
    t = genre_table(False, np.random.default_rng(3))
    m = fit_forest(t, features=["x", "genre"], params=ForestParams(trees=30, k_features="all"), seed=0)
    rep = genre_shuffle_analysis(m, t, seed=1)
    assert len(rep.flips) < 0.05 * len(t)


def test_shuffle_genre_determined_labels():
    t = genre_table(True, np.random.default_rng(4))
    m = fit_forest(t, params=ForestParams(trees=30), seed=0)
    rep = genre_shuffle_analysis(m, t, seed=1, top_k=3)
    assert len(rep.flips) > 0.3 * len(t)
    deltas = [abs(r.delta) for r in rep.records]
    assert deltas == sorted(deltas, reverse=True)
    assert len(rep.positives) == 3 and all(r.salient for r in rep.positives)
    assert all(not r.salient for r in rep.negatives)
    assert list(rep.to_frame().columns) == ["row_id", "salient", "p_orig", "p_shuffled", "delta", "flipped"]


def test_unseen_level_fails_every_set_test():
    t = genre_table(True, np.random.default_rng(5), n=600)
    m = fit_forest(t, params=ForestParams(trees=20), seed=0)
    probe = synthetic_table({"genre": ["poetry"], "x": [0.0]}, [0])
    X = m._encode(probe)
    assert X[0, m.features.index("genre")] == -1
    # route by hand: a level outside every subset always takes the right branch
    votes = 0.0
    for tree in m.trees:
        node = 0
        while tree.feature[node] != LEAF:
            f = tree.feature[node]
            if m.categorical[f]:
                node = tree.right[node]
            else:
                node = tree.left[node] if X[0, f] < tree.threshold[node] else tree.right[node]
        votes += tree.prob[node]
    assert predict_proba(m, probe)[0] == pytest.approx(votes / len(m.trees))


def test_single_class_warns():
    t = synthetic_table({"x": np.arange(10.0)}, np.zeros(10, dtype=int))
    with pytest.warns(UserWarning):
        m = fit_forest(t, params=ForestParams(trees=3))
    assert m.degenerate and np.all(predict_proba(m, t) == 0)


def test_empty_table():
    t = synthetic_table({"x": np.zeros(0)}, np.zeros(0, dtype=int))
    with pytest.raises(ValueError):
        fit_forest(t)


def test_min_leaf(signal_noise):
    m = fit_forest(signal_noise, params=ForestParams(trees=3, min_leaf=25), seed=0)
    for tree in m.trees:
        assert tree.n_samples[tree.feature == LEAF].min() >= 25


def test_schema_mismatch(signal_noise):
    m = fit_forest(signal_noise, params=ForestParams(trees=2), seed=0)
    with pytest.raises(ValueError, match="schema"):
        predict_proba(m, synthetic_table({"x": [1.0]}, [0]))


def test_save_load(tmp_path, signal_noise):
    m = fit_forest(signal_noise, params=ForestParams(trees=5), seed=0)
    path = tmp_path / "forest.json"
    m.save(path)
    back = ExtraTreesModel.load(path)
    assert back.model_hash() == m.model_hash()
    assert np.array_equal(predict_proba(back, signal_noise), predict_proba(m, signal_noise))


def test_candidate_counts():
    assert ForestParams().n_candidates(20) == 4
    assert ForestParams(k_features="all").n_candidates(7) == 7
    assert ForestParams(k_features=0.5).n_candidates(7) == 4
    assert ForestParams(k_features=99).n_candidates(3) == 3
