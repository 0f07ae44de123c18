"""Discourse-structure features from eRST-style EDU graphs.

Depth is the number of parent hops from an EDU to a parentless (most
central) unit; coordinate roots are simply several parentless units.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .corpus import Document, Edu, EntityCluster, Mention


class DiscourseCycleError(ValueError):
    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__("cycle in EDU parent edges: " + " -> ".join(map(str, self.cycle + self.cycle[:1])))


@dataclass(frozen=True)
class DepthTable:
    depth: Mapping[int, int]
    percentile: Mapping[int, float]

    @property
    def max_depth(self):
        return max(self.depth.values(), default=0)


@dataclass(frozen=True)
class MentionDiscourseFeatures:
    relation_coarse: str
    edu_depth_percentile: float
    explicit_dm: bool


@dataclass(frozen=True)
class EntityDiscourseFeatures:
    first_mention_depth_percentile: float
    min_depth_percentile: float
    explicit_proportion: float


def compute_depths(edus: Sequence[Edu]) -> DepthTable:
    """Hop counts to the nearest root, normalized by the document's max depth.

    Raises
    ------
    DiscourseCycleError
        If following parent edges from some unit never reaches a root.
    KeyError
        If a parent id does not exist.
    """
    parent = {e.edu_id: e.parent for e in edus}
    depth = {}
    for start in parent:
        path = []
        on_path = set()
        node = start
        while node not in depth:
            if node in on_path:
                raise DiscourseCycleError(path[path.index(node):])
            on_path.add(node)
            path.append(node)
            p = parent[node]
            if p is None:
                depth[node] = 0
                path.pop()
                break
            if p not in parent:
                raise KeyError(f"EDU {node} has unknown parent {p}")
            node = p
        base = depth[node]
        for i, n in enumerate(reversed(path)):
            depth[n] = base + i + 1
    top = max(depth.values(), default=0)
    pct = {k: (v / top if top > 0 else 0.0) for k, v in depth.items()}
    return DepthTable(depth, pct)


def mention_discourse_features(m: Mention, doc: Document, table: DepthTable) -> MentionDiscourseFeatures:
    edu = doc.edu_of(m.head)
    if edu is None:
        raise ValueError(f"head token {m.head} of mention {m.mention_id} is outside all EDUs")
    return MentionDiscourseFeatures(edu.relation_coarse, table.percentile[edu.edu_id], edu.explicit_dm)


def entity_discourse_features(c: EntityCluster, doc: Document, table: DepthTable) -> EntityDiscourseFeatures:
    if not c.mention_ids:
        raise ValueError(f"entity {c.entity_id} has no mentions")
    feats = [mention_discourse_features(m, doc, table) for m in doc.cluster_mentions(c.entity_id)]
    depths = [f.edu_depth_percentile for f in feats]
    return EntityDiscourseFeatures(
        first_mention_depth_percentile=depths[0],
        min_depth_percentile=min(depths),
        explicit_proportion=sum(f.explicit_dm for f in feats) / len(feats),
    )


def significance_code(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "."
    return ""


@dataclass
class ResidualTable:
    """Pearson residuals of a contingency table under independence.

    ``adjusted`` holds standardized (adjusted) residuals, which are
    approximately standard normal; ``p`` are their two-sided p-values.
    """

    rows: list[str]
    cols: list[str]
    observed: np.ndarray
    expected: np.ndarray
    residuals: np.ndarray
    adjusted: np.ndarray
    p: np.ndarray

    @property
    def codes(self):
        return np.vectorize(significance_code, otypes=[str])(self.p)

    def write_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        header = ["label"]
        for c in self.cols:
            header += [f"{c}_residual", f"{c}_signif"]
        writer.writerow(header)
        codes = self.codes
        for i, label in enumerate(self.rows):
            row = [label]
            for j in range(len(self.cols)):
                row += [f"{self.residuals[i, j]:.6f}", codes[i, j]]
            writer.writerow(row)


def relation_salience_residuals(counts, rows=None, cols=("salient", "non_salient")) -> ResidualTable:
    """Pearson residuals ``(O - E) / sqrt(E)`` with per-cell significance.

    Parameters
    ----------
    counts : array-like, shape (r, c)
        Non-negative counts; at least two rows.
    rows, cols : sequence of str, optional
        Labels for the table margins.
    """
    obs = np.asarray(counts, dtype=float)
    if obs.ndim != 2 or obs.shape[0] < 2:
        raise ValueError("need a 2-D table with at least 2 rows")
    if np.any(obs < 0):
        raise ValueError("counts must be non-negative")
    row_tot = obs.sum(axis=1)
    col_tot = obs.sum(axis=0)
    if np.any(row_tot == 0) or np.any(col_tot == 0):
        raise ValueError("zero marginal total in contingency table")
    total = obs.sum()
    exp = np.outer(row_tot, col_tot) / total
    resid = (obs - exp) / np.sqrt(exp)
    var = np.outer(1 - row_tot / total, 1 - col_tot / total)
    with np.errstate(divide="ignore", invalid="ignore"):
        adj = np.where(var > 0, resid / np.sqrt(var), 0.0)
    p = 2 * stats.norm.sf(np.abs(adj))
    if rows is None:
        rows = [str(i) for i in range(obs.shape[0])]
    return ResidualTable(list(rows), list(cols), obs, exp, resid, adj, p)


def salience_contingency(labels, salient, order=None):
    """Count table of ``labels`` x (salient, non-salient) for the residual analysis."""
    labels = list(labels)
    salient = np.asarray(salient, dtype=bool)
    levels = list(order) if order is not None else sorted(set(labels))
    index = {lab: i for i, lab in enumerate(levels)}
    counts = np.zeros((len(levels), 2))
    for lab, s in zip(labels, salient):
        counts[index[lab], 0 if s else 1] += 1
    keep = counts.sum(axis=1) > 0
    return [lab for lab, k in zip(levels, keep) if k], counts[keep]
