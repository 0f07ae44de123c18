"""Prevalence and position metrics for entities, plus Cohen's kappa."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .corpus import Document, EntityCluster


@dataclass(frozen=True)
class DispersionConfig:
    parts: int = 10
    normalization: str = "exp"

    def __post_init__(self):
        if self.parts < 2:
            raise ValueError("parts must be >= 2")
        if self.normalization not in ("exp", "max"):
            raise ValueError(f"unknown normalization {self.normalization!r}")


@dataclass(frozen=True)
class EntityPrevalenceFeatures:
    cluster_size: int
    cluster_size_percentile: float
    dkl_dispersion: float
    position_in_doc: float
    first_position_in_sent: float
    mean_position_in_sent: float


def bin_sizes(doc_length: int, parts: int) -> np.ndarray:
    """Token counts of the contiguous bins a document is cut into.

    At least ``parts`` tokens: ``parts`` bins whose sizes differ by at most
    one. Shorter documents: bins of ``ceil(len / parts)`` tokens with a
    short final bin, so no bin is empty.
    """
    if doc_length < 1:
        raise ValueError("doc_length must be >= 1")
    if doc_length >= parts:
        edges = (np.arange(parts + 1) * doc_length) // parts
        return np.diff(edges)
    size = math.ceil(doc_length / parts)
    n_bins = math.ceil(doc_length / size)
    sizes = np.full(n_bins, size)
    sizes[-1] = doc_length - size * (n_bins - 1)
    return sizes


def kl_divergence_raw(mention_positions, doc_length: int, parts: int = 10) -> float:
    """KL divergence (nats) of mention bin shares from bin token shares."""
    pos = np.asarray(mention_positions, dtype=int)
    if pos.size == 0:
        raise ValueError("need at least one mention position")
    if doc_length < 1:
        raise ValueError("doc_length must be >= 1")
    if pos.min() < 1 or pos.max() > doc_length:
        raise ValueError("positions must lie in [1, doc_length]")
    sizes = bin_sizes(doc_length, parts)
    upper = np.cumsum(sizes)
    bins = np.searchsorted(upper, pos, side="left")
    obs = np.bincount(bins, minlength=len(sizes)) / pos.size
    exp = sizes / doc_length
    nz = obs > 0
    return float(np.sum(obs[nz] * np.log(obs[nz] / exp[nz])))


def kl_dispersion(mention_positions, doc_length: int, cfg: DispersionConfig = DispersionConfig()) -> float:
    """Scaled KL dispersion of an entity's mentions across document parts.

    0 means mentions are spread exactly like the document's tokens. The
    ``exp`` scaling is ``1 - exp(-D)``; the ``max`` scaling divides by the
    largest divergence attainable for the bin layout (``ln(parts)`` for
    equal bins), so a single-bin concentration maps to 1.
    """
    d = kl_divergence_raw(mention_positions, doc_length, cfg.parts)
    if cfg.normalization == "exp":
        return 1.0 - math.exp(-d)
    sizes = bin_sizes(doc_length, cfg.parts)
    dmax = math.log(doc_length / sizes.min())
    return d / dmax if dmax > 0 else 0.0


def cluster_size_percentile(doc: Document) -> dict[str, float]:
    """Mean fractional rank of each cluster's size divided by the cluster count."""
    if not doc.clusters:
        return {}
    sizes = [c.size for c in doc.clusters]
    ranks = rankdata(sizes, method="average")
    n = len(sizes)
    return {c.entity_id: float(r / n) for c, r in zip(doc.clusters, ranks)}


def position_in_doc(doc: Document, token_id: int) -> float:
    return (token_id - 1) / doc.n_tokens


def position_in_sent(doc: Document, token_id: int) -> float:
    s = doc.sentences[doc.sentence_of(token_id)]
    return (token_id - s.start) / len(s)


def entity_prevalence_features(
    doc: Document,
    cluster: EntityCluster,
    percentiles: dict[str, float] | None = None,
    cfg: DispersionConfig = DispersionConfig(),
) -> EntityPrevalenceFeatures:
    if percentiles is None:
        percentiles = cluster_size_percentile(doc)
    ms = doc.cluster_mentions(cluster.entity_id)
    if not ms:
        raise ValueError(f"entity {cluster.entity_id} has no mentions")
    in_sent = [position_in_sent(doc, m.start) for m in ms]
    return EntityPrevalenceFeatures(
        cluster_size=len(ms),
        cluster_size_percentile=percentiles[cluster.entity_id],
        dkl_dispersion=kl_dispersion([m.start for m in ms], doc.n_tokens, cfg),
        position_in_doc=position_in_doc(doc, ms[0].start),
        first_position_in_sent=in_sent[0],
        mean_position_in_sent=float(np.mean(in_sent)),
    )


def cohen_kappa(a, b) -> float:
    """Cohen's kappa for two raters' binary judgments.

    When both raters give the same constant label chance agreement is 1 and
    kappa is defined as 1.0.
    """
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("ratings must be 1-D sequences of equal length")
    if a.size == 0:
        raise ValueError("ratings must be non-empty")
    p_o = np.mean(a == b)
    pa, pb = a.mean(), b.mean()
    p_e = pa * pb + (1 - pa) * (1 - pb)
    if p_e == 1.0:
        return 1.0
    return float((p_o - p_e) / (1 - p_e))
