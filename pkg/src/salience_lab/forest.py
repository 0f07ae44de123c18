"""Extremely randomized trees for binary salience, with importances.

At each node ``k`` candidate features are drawn among those that are not
constant in the node. A numeric candidate gets one threshold drawn
uniformly between the node's min and max; a categorical candidate gets a
random proper subset of the levels present in the node, with rows whose
level is in the subset going left. The candidate with the largest Gini
decrease is kept. Levels unseen during training are never in any subset,
so such rows always take the right branch.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .features import CATEGORICAL, FeatureTable, write_frame

LEAF = -1


@dataclass(frozen=True)
class ForestParams:
    trees: int = 100
    min_leaf: int = 1
    k_features: int | float | str = "sqrt"
    bootstrap: bool = False
    sample_fraction: float = 1.0
    max_depth: int | None = None

    def n_candidates(self, p: int) -> int:
        k = self.k_features
        if k == "sqrt":
            n = int(math.floor(math.sqrt(p)))
        elif k == "all":
            n = p
        elif isinstance(k, float):
            n = int(round(k * p))
        else:
            n = int(k)
        return max(1, min(p, n))


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_samples: np.ndarray
    n_positive: np.ndarray
    level_sets: dict[int, frozenset[int]]
    importance: np.ndarray
    rows_used: int = 0

    @property
    def prob(self):
        return self.n_positive / np.maximum(self.n_samples, 1)

    @property
    def n_nodes(self):
        return len(self.feature)


def gini(pos, n):
    p = pos / n
    return 2 * p * (1 - p)


@dataclass
class EncodedData:
    features: list[str]
    categorical: np.ndarray
    levels: dict[str, list[str]]
    X: np.ndarray


def encode(table: FeatureTable, features: Sequence[str], levels: dict[str, list[str]] | None = None) -> EncodedData:
    """Numeric matrix with categorical columns as level codes (``-1`` = unseen)."""
    cat = np.array([table.spec(f).kind == CATEGORICAL for f in features], dtype=bool)
    if levels is None:
        levels = {f: sorted(set(table.data[f].astype(str))) for f, c in zip(features, cat) if c}
    X = np.empty((len(table), len(features)))
    for j, f in enumerate(features):
        if f not in table.data:
            raise KeyError(f"table has no column {f!r}")
        col = table.data[f]
        if cat[j]:
            index = {lev: i for i, lev in enumerate(levels[f])}
            X[:, j] = [index.get(v, -1) for v in col.astype(str)]
        else:
            X[:, j] = col.to_numpy(dtype=float)
    return EncodedData(list(features), cat, levels, X)


def _grow(X, y, categorical, params: ForestParams, rng) -> Tree:
    n_total, p = X.shape
    k = params.n_candidates(p)
    if params.bootstrap or params.sample_fraction < 1.0:
        m = max(1, int(round(params.sample_fraction * n_total)))
        rows = rng.choice(n_total, size=m, replace=params.bootstrap)
    else:
        rows = np.arange(n_total)
    root_n = len(rows)
    feature, threshold, left, right, ns, npos = [], [], [], [], [], []
    sets = {}
    importance = np.zeros(p)

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        ns.append(len(idx))
        npos.append(int(y[idx].sum()))
        return len(feature) - 1

    stack = [(new_node(rows), rows, 0)]
    while stack:
        node, idx, depth = stack.pop()
        n, pos = ns[node], npos[node]
        if pos == 0 or pos == n or n < 2 * params.min_leaf:
            continue
        if params.max_depth is not None and depth >= params.max_depth:
            continue
        parent_g = gini(pos, n)
        yi = y[idx]
        best = None
        drawn = 0
        for f in rng.permutation(p):
            if drawn >= k:
                break
            x = X[idx, f]
            if categorical[f]:
                present = np.unique(x)
                if present.size < 2:
                    continue
                drawn += 1
                order = rng.permutation(present)
                size = int(rng.integers(1, present.size))
                chosen = np.sort(order[:size])
                go_left = np.isin(x, chosen)
                rule = frozenset(int(c) for c in chosen)
            else:
                lo, hi = x.min(), x.max()
                if lo == hi:
                    continue
                drawn += 1
                thr = rng.uniform(lo, hi)
                go_left = x < thr
                rule = float(thr)
            nl = int(go_left.sum())
            nr = n - nl
            if nl < params.min_leaf or nr < params.min_leaf:
                continue
            pl = int(yi[go_left].sum())
            score = parent_g - (nl / n) * gini(pl, nl) - (nr / n) * gini(pos - pl, nr)
            if best is None or score > best[0]:
                best = (score, int(f), rule, go_left)
        if best is None:
            continue
        score, f, rule, go_left = best
        importance[f] += (n / root_n) * score
        feature[node] = f
        if isinstance(rule, frozenset):
            sets[node] = rule
            threshold[node] = math.nan
        else:
            threshold[node] = rule
        li, ri = idx[go_left], idx[~go_left]
        lnode = new_node(li)
        rnode = new_node(ri)
        left[node], right[node] = lnode, rnode
        stack.append((rnode, ri, depth + 1))
        stack.append((lnode, li, depth + 1))
    return Tree(
        np.array(feature, dtype=int), np.array(threshold), np.array(left, dtype=int),
        np.array(right, dtype=int), np.array(ns, dtype=int), np.array(npos, dtype=int),
        sets, importance, root_n,
    )


def _route(tree: Tree, X, categorical) -> np.ndarray:
    """Leaf probability for every row of ``X``."""
    out = np.empty(X.shape[0])
    prob = tree.prob
    stack = [(0, np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        f = tree.feature[node]
        if f == LEAF:
            out[idx] = prob[node]
            continue
        x = X[idx, f]
        if categorical[f]:
            go_left = np.isin(x, list(tree.level_sets[node]))
        else:
            go_left = x < tree.threshold[node]
        stack.append((tree.left[node], idx[go_left]))
        stack.append((tree.right[node], idx[~go_left]))
    return out


@dataclass
class ExtraTreesModel:
    features: list[str]
    categorical: np.ndarray
    levels: dict[str, list[str]]
    trees: list[Tree]
    params: ForestParams
    seed: int
    schema_hash: str = ""
    degenerate: bool = False

    def _encode(self, table):
        try:
            return encode(table, self.features, self.levels).X
        except KeyError as exc:
            raise ValueError(f"schema mismatch: {exc}") from None

    def predict_proba_matrix(self, X) -> np.ndarray:
        votes = np.zeros(X.shape[0])
        for t in self.trees:
            votes += _route(t, X, self.categorical)
        return votes / len(self.trees)

    def predict_proba(self, table: FeatureTable) -> np.ndarray:
        return self.predict_proba_matrix(self._encode(table))

    def predict(self, table: FeatureTable) -> np.ndarray:
        # ties go to "not salient"
        return self.predict_proba(table) > 0.5

    def to_dict(self):
        trees = []
        for t in self.trees:
            trees.append({
                "feature": t.feature.tolist(),
                "threshold": [None if math.isnan(v) else float(v) for v in t.threshold],
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "n_samples": t.n_samples.tolist(),
                "n_positive": t.n_positive.tolist(),
                "level_sets": {
                    str(node): [self.levels[self.features[t.feature[node]]][c] for c in sorted(codes)]
                    for node, codes in sorted(t.level_sets.items())
                },
                "importance": t.importance.tolist(),
                "rows_used": t.rows_used,
            })
        return {
            "kind": "extra_trees",
            "features": self.features,
            "categorical": self.categorical.tolist(),
            "levels": self.levels,
            "params": {
                "trees": self.params.trees,
                "min_leaf": self.params.min_leaf,
                "k_features": self.params.k_features,
                "bootstrap": self.params.bootstrap,
                "sample_fraction": self.params.sample_fraction,
                "max_depth": self.params.max_depth,
            },
            "seed": self.seed,
            "schema_hash": self.schema_hash,
            "degenerate": self.degenerate,
            "trees": trees,
        }

    @classmethod
    def from_dict(cls, obj):
        features = list(obj["features"])
        levels = {k: list(v) for k, v in obj["levels"].items()}
        trees = []
        for t in obj["trees"]:
            feat = np.array(t["feature"], dtype=int)
            sets = {}
            for node, names in t["level_sets"].items():
                lev = levels[features[feat[int(node)]]]
                sets[int(node)] = frozenset(lev.index(x) for x in names)
            trees.append(Tree(
                feat, np.array([math.nan if v is None else v for v in t["threshold"]], dtype=float),
                np.array(t["left"], dtype=int), np.array(t["right"], dtype=int),
                np.array(t["n_samples"], dtype=int), np.array(t["n_positive"], dtype=int),
                sets, np.array(t["importance"], dtype=float), t["rows_used"],
            ))
        return cls(features, np.array(obj["categorical"], dtype=bool), levels, trees,
                   ForestParams(**obj["params"]), obj["seed"], obj["schema_hash"], obj["degenerate"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def model_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def tree_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for tree ``index`` regardless of scheduling."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def fit_forest(
    table: FeatureTable,
    features: Sequence[str] | None = None,
    params: ForestParams = ForestParams(),
    seed: int = 0,
    threads: int = 1,
) -> ExtraTreesModel:
    """Train an Extra-Trees classifier for ``salience > 0``.

    Each tree draws from its own ``(seed, tree index)`` random stream, so the
    fitted model is identical for any ``threads``.
    """
    if len(table) == 0:
        raise ValueError("cannot fit a forest on an empty table")
    features = list(features) if features is not None else table.feature_names
    data = encode(table, features)
    y = table.salient.astype(int)
    degenerate = bool(y.min() == y.max())
    if degenerate:
        warnings.warn("single-class target: every tree is a single leaf", UserWarning, stacklevel=2)

    def grow(i):
        return _grow(data.X, y, data.categorical, params, tree_rng(seed, i))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(grow, range(params.trees)))
    else:
        trees = [grow(i) for i in range(params.trees)]
    return ExtraTreesModel(features, data.categorical, data.levels, trees, params, seed,
                           table.schema_hash(), degenerate)


def predict_proba(model: ExtraTreesModel, table: FeatureTable) -> np.ndarray:
    return model.predict_proba(table)


def accuracy(model: ExtraTreesModel, table: FeatureTable) -> float:
    return float(np.mean(model.predict(table) == table.salient))


# --------------------------------------------------------------------------
# importances


def gini_importance(model: ExtraTreesModel) -> dict[str, float]:
    """Weighted impurity decrease per feature, averaged over trees, summing to 1."""
    total = np.mean([t.importance for t in model.trees], axis=0)
    s = total.sum()
    share = total / s if s > 0 else total
    return dict(zip(model.features, map(float, share)))


def permutation_mda(model: ExtraTreesModel, table: FeatureTable, repeats: int = 5, seed: int = 0) -> dict[str, float]:
    """Mean decrease in accuracy when one column at a time is shuffled."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    X = model._encode(table)
    y = table.salient
    base = np.mean((model.predict_proba_matrix(X) > 0.5) == y)
    out = {}
    for j, f in enumerate(model.features):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(j,)))
        accs = []
        for _ in range(repeats):
            Xp = X.copy()
            Xp[:, j] = X[rng.permutation(X.shape[0]), j]
            accs.append(np.mean((model.predict_proba_matrix(Xp) > 0.5) == y))
        out[f] = float(base - np.mean(accs))
    return out


def _zscore(values):
    v = np.asarray(values, dtype=float)
    sd = v.std(ddof=1) if v.size > 1 else 0.0
    return (v - v.mean()) / sd if sd > 0 else np.zeros_like(v)


def importance_report(gini: dict[str, float] | None = None, mda: dict[str, float] | None = None) -> pd.DataFrame:
    """Both importance metrics side by side, ordered by mean z-score."""
    source = gini if gini is not None else mda
    if source is None:
        raise ValueError("need at least one importance metric")
    feats = list(source)
    df = pd.DataFrame({"feature": feats})
    zs = []
    if gini is not None:
        df["gini"] = [gini[f] for f in feats]
        df["gini_z"] = _zscore(df["gini"])
        zs.append("gini_z")
    if mda is not None:
        df["mda"] = [mda[f] for f in feats]
        df["mda_z"] = _zscore(df["mda"])
        zs.append("mda_z")
    df["mean_z"] = df[zs].mean(axis=1)
    df = df.sort_values(["mean_z", "feature"], ascending=[False, True], kind="mergesort").reset_index(drop=True)
    df.insert(1, "rank", np.arange(1, len(df) + 1))
    return df


def write_importance(df: pd.DataFrame, path, provenance=None):
    write_frame(df, path, provenance, float_format="%.6g")


# --------------------------------------------------------------------------
# genre shuffle


@dataclass(frozen=True)
class ShuffleRecord:
    row_id: str
    salient: bool
    p_orig: float
    p_shuffled: float
    delta: float
    flipped: bool


@dataclass
class ShuffleReport:
    records: list[ShuffleRecord]
    top_k: int = 5
    column: str = "genre"

    @property
    def flips(self) -> list[ShuffleRecord]:
        return [r for r in self.records if r.flipped]

    @property
    def positives(self) -> list[ShuffleRecord]:
        return [r for r in self.flips if r.salient][: self.top_k]

    @property
    def negatives(self) -> list[ShuffleRecord]:
        return [r for r in self.flips if not r.salient][: self.top_k]

    def to_frame(self, flips_only=True) -> pd.DataFrame:
        recs = self.flips if flips_only else self.records
        return pd.DataFrame(
            [(r.row_id, int(r.salient), r.p_orig, r.p_shuffled, r.delta, int(r.flipped)) for r in recs],
            columns=["row_id", "salient", "p_orig", "p_shuffled", "delta", "flipped"],
        )


def genre_shuffle_analysis(
    model: ExtraTreesModel,
    table: FeatureTable,
    seed: int = 0,
    column: str = "genre",
    top_k: int = 5,
    permutation=None,
) -> ShuffleReport:
    """Compare predictions before and after shuffling one column once.

    A record is ``flipped`` when the original prediction is right and the
    shuffled one wrong. Records are sorted by ``|p_orig - p_shuffled|``,
    largest first.
    """
    if column not in model.features:
        raise ValueError(f"model does not use column {column!r}")
    X = model._encode(table)
    j = model.features.index(column)
    if permutation is None:
        permutation = np.random.default_rng(seed).permutation(X.shape[0])
    Xs = X.copy()
    Xs[:, j] = X[np.asarray(permutation), j]
    p0 = model.predict_proba_matrix(X)
    p1 = model.predict_proba_matrix(Xs)
    y = table.salient
    ok0 = (p0 > 0.5) == y
    ok1 = (p1 > 0.5) == y
    ids = table.data["row_id"].astype(str).tolist() if "row_id" in table.data else list(map(str, range(len(y))))
    recs = [ShuffleRecord(ids[i], bool(y[i]), float(p0[i]), float(p1[i]), float(p0[i] - p1[i]),
                          bool(ok0[i] and not ok1[i])) for i in range(len(y))]
    order = sorted(range(len(recs)), key=lambda i: (-abs(recs[i].delta), i))
    return ShuffleReport([recs[i] for i in order], top_k, column)
