"""Exact t-SNE and the mention-profile data behind the entity-type map."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .features import CATEGORICAL, FeatureTable, write_frame

PROFILE_TYPES = ("person", "abstract", "organization", "object", "place")
SPOKEN_GENRES = frozenset({"conversation", "interview", "podcast", "speech", "vlog", "court"})


@dataclass(frozen=True)
class EmbedConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    momentum: float = 0.5
    final_momentum: float = 0.8
    momentum_switch: int = 250
    exaggeration: float = 12.0
    exaggeration_iters: int = 250
    min_gain: float = 0.01
    seed: int = 0
    kl_every: int = 10


@dataclass
class TsneResult:
    embedding: np.ndarray
    kl_trace: list[tuple[int, float]] = field(default_factory=list)
    P: np.ndarray | None = None

    @property
    def initial_kl(self):
        return self.kl_trace[0][1]

    @property
    def final_kl(self):
        return self.kl_trace[-1][1]


def _sq_distances(X):
    sq = np.sum(X * X, axis=1)
    D = sq[:, None] + sq[None, :] - 2 * X @ X.T
    np.maximum(D, 0, out=D)
    np.fill_diagonal(D, 0)
    return D


def conditional_affinities(X, perplexity, tol=1e-5, max_iter=50):
    """Row-stochastic Gaussian affinities with per-point bandwidths.

    The precision of each kernel is bisected until the row entropy (nats)
    is within ``tol`` of ``log(perplexity)``.
    """
    D = _sq_distances(np.asarray(X, dtype=float))
    n = D.shape[0]
    target = np.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        d = np.delete(D[i], i)
        beta, lo, hi = 1.0, 0.0, np.inf
        for _ in range(max_iter):
            w = np.exp(-(d - d.min()) * beta)
            s = w.sum()
            p = w / s
            H = -np.sum(p[p > 0] * np.log(p[p > 0]))
            diff = H - target
            if abs(diff) < tol:
                break
            if diff > 0:
                lo = beta
                beta = beta * 2 if hi == np.inf else (beta + hi) / 2
            else:
                hi = beta
                beta = (beta + lo) / 2
        P[i, np.arange(n) != i] = p
    return P


def joint_affinities(X, perplexity):
    P = conditional_affinities(X, perplexity)
    P = (P + P.T) / (2 * P.shape[0])
    return np.maximum(P, 1e-12)


def kl_divergence(P, Y):
    num = 1.0 / (1.0 + _sq_distances(Y))
    np.fill_diagonal(num, 0)
    Q = np.maximum(num / num.sum(), 1e-12)
    mask = ~np.eye(P.shape[0], dtype=bool)
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def tsne(X, cfg: EmbedConfig = EmbedConfig()) -> TsneResult:
    """Embed rows of ``X`` in two dimensions.

    Gradient descent with momentum and per-coordinate adaptive gains;
    affinities are exaggerated during the first ``exaggeration_iters``
    iterations. The KL objective (unexaggerated) is recorded every
    ``kl_every`` iterations, including the first and last.

    Raises
    ------
    ValueError
        Fewer than 10 rows, non-finite input, or a perplexity that is not
        below ``(n - 1) / 3``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D matrix")
    n = X.shape[0]
    if n < 10:
        raise ValueError("t-SNE needs at least 10 points")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    if not cfg.perplexity < (n - 1) / 3:
        raise ValueError(f"perplexity {cfg.perplexity} infeasible for n={n}; must be < {(n - 1) / 3:.3g}")
    if cfg.iterations < 1:
        raise ValueError("iterations must be >= 1")
    P = joint_affinities(X, cfg.perplexity)
    rng = np.random.default_rng(cfg.seed)
    Y = 1e-4 * rng.standard_normal((n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    trace = [(0, kl_divergence(P, Y))]
    for it in range(cfg.iterations):
        exag = cfg.exaggeration if it < cfg.exaggeration_iters else 1.0
        mom = cfg.momentum if it < cfg.momentum_switch else cfg.final_momentum
        num = 1.0 / (1.0 + _sq_distances(Y))
        np.fill_diagonal(num, 0)
        Q = np.maximum(num / num.sum(), 1e-12)
        W = (exag * P - Q) * num
        grad = 4 * (np.diag(W.sum(axis=1)) - W) @ Y
        same = np.sign(grad) == np.sign(update)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, cfg.min_gain, out=gains)
        update = mom * update - cfg.learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)
        done = it + 1
        if done % cfg.kl_every == 0 or done == cfg.iterations:
            trace.append((done, kl_divergence(P, Y)))
    return TsneResult(Y, trace, P)


def modality(genre: str) -> str:
    return "spoken" if genre in SPOKEN_GENRES else "written"


def profile_matrix(table: FeatureTable, types=PROFILE_TYPES) -> tuple[np.ndarray, pd.DataFrame]:
    """One-hot, z-scaled feature matrix for mentions of the given entity types.

    Returns the matrix and the matching rows of ``table.data``.
    """
    rows = table.data[table.data["entity_type"].isin(types)].reset_index(drop=True)
    blocks = []
    for c in table.columns:
        col = rows[c.name]
        if c.kind == CATEGORICAL:
            levels = sorted(set(col))
            blocks.append((col.to_numpy()[:, None] == np.asarray(levels, dtype=object)[None, :]).astype(float))
        else:
            blocks.append(col.to_numpy(dtype=float)[:, None])
    M = np.hstack(blocks) if blocks else np.zeros((len(rows), 0))
    sd = M.std(axis=0, ddof=1) if len(rows) > 1 else np.ones(M.shape[1])
    keep = sd > 0
    M = (M[:, keep] - M[:, keep].mean(axis=0)) / sd[keep]
    return M, rows


def embedding_frame(Y, rows: pd.DataFrame) -> pd.DataFrame:
    return pd.DataFrame({
        "row_id": rows["row_id"].to_numpy() if "row_id" in rows else np.arange(len(rows)),
        "x": Y[:, 0],
        "y": Y[:, 1],
        "entity_type": rows["entity_type"].to_numpy(),
        "salient": (rows["salience"].to_numpy() > 0).astype(int),
        "cluster_size_percentile": rows["cluster_size_percentile"].to_numpy(dtype=float),
        "modality": [modality(g) for g in rows["genre"]],
    })


def write_embedding(df: pd.DataFrame, path, provenance=None):
    write_frame(df, path, provenance, float_format="%.6f")
