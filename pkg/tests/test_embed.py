import numpy as np
import pytest
from sklearn.cluster import KMeans
from sklearn.metrics import adjusted_rand_score

from helpers import synthetic_table
from salience_lab.embed import (
    EmbedConfig,
    conditional_affinities,
    embedding_frame,
    joint_affinities,
    kl_divergence,
    modality,
    profile_matrix,
    tsne,
)


def blobs(rng, n_per=50, p=10, sep=10.0):
    centers = rng.standard_normal((3, p)) * sep
    X = np.vstack([c + rng.standard_normal((n_per, p)) for c in centers])
    return X, np.repeat(np.arange(3), n_per)


def entropy_nats(row):
    r = row[row > 0]
    return -np.sum(r * np.log(r))


def test_affinity_rows_and_perplexity():
    X = np.random.default_rng(0).standard_normal((60, 4))
    P = conditional_affinities(X, 10)
    assert np.allclose(P.sum(axis=1), 1, atol=1e-8)
    assert np.all(np.diag(P) == 0)
    for i in range(60):
        assert entropy_nats(P[i]) == pytest.approx(np.log(10), abs=1e-4)
    J = joint_affinities(X, 10)
    assert J.sum() == pytest.approx(1, abs=1e-6)
    assert np.allclose(J, J.T)


def test_recovers_three_clusters():
    rng = np.random.default_rng(1)
    X, lab = blobs(rng)
    res = tsne(X, EmbedConfig(perplexity=20, seed=0))
    assert res.embedding.shape == (150, 2) and np.isfinite(res.embedding).all()
    pred = KMeans(3, n_init=10, random_state=0).fit_predict(res.embedding)
    assert adjusted_rand_score(lab, pred) > 0.9
    assert res.final_kl < res.initial_kl


def test_duplicates_land_in_the_same_cluster():
    rng = np.random.default_rng(2)
    X, lab = blobs(rng, n_per=20)
    X = np.vstack([X, X[:5], X[20:25]])
    lab = np.concatenate([lab, lab[:5], lab[20:25]])
    Y = tsne(X, EmbedConfig(perplexity=15, seed=0)).embedding
    centroids = np.array([Y[lab == c].mean(axis=0) for c in range(3)])
    nearest = np.argmin(np.linalg.norm(Y[:, None] - centroids[None], axis=-1), axis=1)
    originals = list(range(5)) + list(range(20, 25))
    for copy, orig in enumerate(originals, start=60):
        assert nearest[copy] == nearest[orig] == lab[orig]
        # closer to its twin than the cluster's radius
        radius = np.linalg.norm(Y[lab == lab[orig]] - centroids[lab[orig]], axis=1).max()
        assert np.linalg.norm(Y[copy] - Y[orig]) < radius


def test_deterministic_given_seed():
    X = np.random.default_rng(3).standard_normal((30, 3))
    cfg = EmbedConfig(perplexity=5, iterations=100, seed=4)
    assert np.array_equal(tsne(X, cfg).embedding, tsne(X, cfg).embedding)
    assert not np.array_equal(tsne(X, cfg).embedding, tsne(X, EmbedConfig(perplexity=5, iterations=100,
                                                                        seed=5)).embedding)


def test_trace_schedule():
    X = np.random.default_rng(4).standard_normal((20, 3))
    res = tsne(X, EmbedConfig(perplexity=5, iterations=25, kl_every=10))
    assert [i for i, _ in res.kl_trace] == [0, 10, 20, 25]


def test_kl_is_zero_for_matching_distributions():
    Y = np.random.default_rng(5).standard_normal((15, 2))
    num = 1 / (1 + ((Y[:, None] - Y[None]) ** 2).sum(-1))
    np.fill_diagonal(num, 0)
    assert kl_divergence(num / num.sum(), Y) == pytest.approx(0, abs=1e-10)


@pytest.mark.parametrize("X, cfg", [
    (np.zeros((5, 2)), EmbedConfig()),
    (np.full((20, 2), np.nan), EmbedConfig(perplexity=3)),
    (np.zeros((20, 2)), EmbedConfig(perplexity=10)),
    (np.random.default_rng(0).standard_normal((20, 2)), EmbedConfig(perplexity=3, iterations=0)),
])
def test_invalid_inputs(X, cfg):
    with pytest.raises(ValueError):
        tsne(X, cfg)


def test_profile_matrix_and_frame():
    t = synthetic_table(
        {"entity_type": ["person", "place", "time", "person"], "genre": ["news", "conversation", "news", "news"],
         "cluster_size_percentile": [0.5, 1.0, 0.2, 0.5], "width": [1.0, 2.0, 3.0, 5.0]},
        [0, 2, 1, 3])
    M, rows = profile_matrix(t)
    assert len(rows) == 3 and "time" not in set(rows["entity_type"])
    assert np.allclose(M.mean(axis=0), 0) and np.allclose(M.std(axis=0, ddof=1), 1)
    df = embedding_frame(np.zeros((3, 2)), rows)
    assert list(df.columns) == ["row_id", "x", "y", "entity_type", "salient", "cluster_size_percentile", "modality"]
    assert df["modality"].tolist() == ["written", "spoken", "written"]
    assert df["salient"].tolist() == [0, 1, 1]
    assert modality("vlog") == "spoken"
