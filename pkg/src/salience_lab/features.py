"""Mention- and entity-level feature tables and their preprocessing.

A :class:`FeatureTable` is a pandas frame plus a column schema. Feature
columns are numeric, boolean (stored as 0/1) or categorical (strings);
bookkeeping columns (ids, partition, target) ride along in the same frame.
:class:`Preprocessor` learns rare-level collapsing and z-scaling on one
partition and reapplies them frozen to any other.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from io import StringIO
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from . import centering, discourse, metrics
from .corpus import Document

NUMERIC = "numeric"
BOOLEAN = "boolean"
CATEGORICAL = "categorical"
OTHER = "other"

MENTION_COLUMNS = [
    ("position_in_sent", NUMERIC),
    ("position_in_doc", NUMERIC),
    ("deprel", CATEGORICAL),
    ("upos", CATEGORICAL),
    ("definite", BOOLEAN),
    ("singular", BOOLEAN),
    ("entity_type", CATEGORICAL),
    ("relation_coarse", CATEGORICAL),
    ("edu_depth_percentile", NUMERIC),
    ("explicit_dm", BOOLEAN),
    ("genre", CATEGORICAL),
    ("cf_percentile", NUMERIC),
    ("mean_cf", NUMERIC),
    ("cb_proportion", NUMERIC),
    ("mean_transition", NUMERIC),
    ("min_transition", NUMERIC),
    ("cluster_size_percentile", NUMERIC),
    ("cluster_divergence", NUMERIC),
    ("explicit_proportion", NUMERIC),
    ("min_depth_percentile", NUMERIC),
]

ENTITY_COLUMNS = [
    ("position_in_doc", NUMERIC),
    ("position_in_sent", NUMERIC),
    ("mean_position_in_sent", NUMERIC),
    ("deprel", CATEGORICAL),
    ("upos", CATEGORICAL),
    ("definite", BOOLEAN),
    ("singular", BOOLEAN),
    ("entity_type", CATEGORICAL),
    ("relation_coarse", CATEGORICAL),
    ("edu_depth_percentile", NUMERIC),
    ("explicit_dm", BOOLEAN),
    ("genre", CATEGORICAL),
    ("cf_percentile", NUMERIC),
    ("mean_cf", NUMERIC),
    ("cb_proportion", NUMERIC),
    ("mean_transition", NUMERIC),
    ("min_transition", NUMERIC),
    ("cluster_size", NUMERIC),
    ("cluster_size_percentile", NUMERIC),
    ("cluster_divergence", NUMERIC),
    ("explicit_proportion", NUMERIC),
    ("min_depth_percentile", NUMERIC),
]

MENTION_META = ["row_id", "doc_id", "partition", "entity_id", "mention_id", "cluster_divergence_max",
                "n_summaries", "salience"]
ENTITY_META = ["row_id", "doc_id", "partition", "entity_id", "cluster_divergence_max", "n_summaries", "salience"]
TARGET = "salience"


class FeatureError(ValueError):
    pass


@dataclass
class ColumnSpec:
    name: str
    kind: str
    levels: list[str] | None = None
    mean: float | None = None
    sd: float | None = None


@dataclass
class FeatureTable:
    level: str
    data: pd.DataFrame
    columns: list[ColumnSpec]
    meta: list[str] = field(default_factory=list)
    target: str = TARGET

    def __len__(self):
        return len(self.data)

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def spec(self, name) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def y(self) -> np.ndarray:
        return self.data[self.target].to_numpy(dtype=int)

    @property
    def salient(self) -> np.ndarray:
        return self.y > 0

    def subset(self, partitions: str | Iterable[str]) -> "FeatureTable":
        if isinstance(partitions, str):
            partitions = [partitions]
        mask = self.data["partition"].isin(list(partitions))
        return self.with_data(self.data[mask].reset_index(drop=True))

    def with_data(self, data, columns=None) -> "FeatureTable":
        cols = columns if columns is not None else [dataclasses.replace(c) for c in self.columns]
        return FeatureTable(self.level, data, cols, list(self.meta), self.target)

    def schema(self) -> dict:
        return {
            "level": self.level,
            "target": self.target,
            "meta": list(self.meta),
            "columns": [dataclasses.asdict(c) for c in self.columns],
        }

    def schema_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.schema(), sort_keys=True).encode()).hexdigest()[:16]


def _levels_by_frequency(values) -> list[str]:
    counts = Counter(values)
    return sorted(counts, key=lambda v: (-counts[v], v))


def _finish(level, rows, column_defs, meta):
    names = meta + [n for n, _ in column_defs]
    data = pd.DataFrame(rows, columns=names)
    specs = []
    for name, kind in column_defs:
        if kind == CATEGORICAL:
            data[name] = data[name].astype(str)
            specs.append(ColumnSpec(name, kind, levels=_levels_by_frequency(data[name])))
        elif kind == BOOLEAN:
            data[name] = data[name].astype(int)
            specs.append(ColumnSpec(name, kind))
        else:
            data[name] = data[name].astype(float)
            specs.append(ColumnSpec(name, kind))
    data["salience"] = data["salience"].astype(int)
    return FeatureTable(level, data, specs, list(meta))


@dataclass
class _DocFeatures:
    states: list
    depths: discourse.DepthTable
    percentiles: dict
    entity: dict
    prevalence: dict
    centering: dict
    disc: dict


def _document_features(doc: Document, cfg, precedence) -> _DocFeatures:
    states = centering.analyze_document(doc, precedence)
    try:
        depths = discourse.compute_depths(doc.edus)
    except (discourse.DiscourseCycleError, KeyError) as exc:
        raise FeatureError(f"{doc.doc_id}: {exc}") from exc
    pct = metrics.cluster_size_percentile(doc)
    prev, cent, disc = {}, {}, {}
    for c in doc.clusters:
        if c.salience is None:
            raise FeatureError(f"{doc.doc_id}: salience not assigned for entity {c.entity_id}")
        prev[c.entity_id] = metrics.entity_prevalence_features(doc, c, pct, cfg)
        cent[c.entity_id] = centering.entity_centering_features(doc, states, c)
        try:
            disc[c.entity_id] = discourse.entity_discourse_features(c, doc, depths)
        except ValueError as exc:
            raise FeatureError(f"{doc.doc_id}: {exc}") from exc
    return _DocFeatures(states, depths, pct, {c.entity_id: c for c in doc.clusters}, prev, cent, disc)


def _dkl_max(doc, c, cfg):
    return metrics.kl_dispersion(
        [m.start for m in doc.cluster_mentions(c.entity_id)], doc.n_tokens,
        metrics.DispersionConfig(cfg.parts, "max"),
    )


def _mention_values(doc, m, f, states):
    head = doc.head_token(m)
    try:
        md = discourse.mention_discourse_features(m, doc, f.depths)
    except ValueError as exc:
        raise FeatureError(f"{doc.doc_id}: missing discourse features for mention {m.mention_id}: {exc}") from exc
    st = states[doc.sentence_of(m.head)]
    return {
        "position_in_sent": metrics.position_in_sent(doc, m.start),
        "position_in_doc": metrics.position_in_doc(doc, m.start),
        "deprel": head.deprel,
        "upos": head.upos,
        "definite": m.definite,
        "singular": m.singular,
        "entity_type": m.entity_type,
        "relation_coarse": md.relation_coarse,
        "edu_depth_percentile": md.edu_depth_percentile,
        "explicit_dm": md.explicit_dm,
        "genre": doc.genre,
        "cf_percentile": st.rank_of(m.entity_id).rank_percentile,
    }


def build_mention_table(
    docs: Sequence[Document],
    cfg: metrics.DispersionConfig = metrics.DispersionConfig(),
    precedence=centering.DEFAULT_PRECEDENCE,
) -> FeatureTable:
    """One row per mention with instance features plus its entity's aggregates."""
    rows = []
    for doc in docs:
        f = _document_features(doc, cfg, precedence)
        for m in doc.mentions:
            c = f.entity[m.entity_id]
            cent, pre, dis = f.centering[m.entity_id], f.prevalence[m.entity_id], f.disc[m.entity_id]
            vals = _mention_values(doc, m, f, f.states)
            vals.update(
                mean_cf=cent.mean_cf_percentile,
                cb_proportion=cent.cb_proportion,
                mean_transition=cent.mean_transition,
                min_transition=cent.min_transition,
                cluster_size_percentile=pre.cluster_size_percentile,
                cluster_divergence=pre.dkl_dispersion,
                explicit_proportion=dis.explicit_proportion,
                min_depth_percentile=dis.min_depth_percentile,
            )
            meta = [f"{doc.doc_id}:{m.mention_id}", doc.doc_id, doc.partition, m.entity_id, m.mention_id,
                    _dkl_max(doc, c, cfg), doc.n_summaries, c.salience]
            rows.append(meta + [vals[n] for n, _ in MENTION_COLUMNS])
    return _finish("mention", rows, MENTION_COLUMNS, MENTION_META)


def build_entity_table(
    docs: Sequence[Document],
    cfg: metrics.DispersionConfig = metrics.DispersionConfig(),
    precedence=centering.DEFAULT_PRECEDENCE,
) -> FeatureTable:
    """One row per entity: first-mention instance values plus cluster aggregates."""
    rows = []
    for doc in docs:
        f = _document_features(doc, cfg, precedence)
        for c in doc.clusters:
            first = doc.mention(c.mention_ids[0])
            cent, pre, dis = f.centering[c.entity_id], f.prevalence[c.entity_id], f.disc[c.entity_id]
            vals = _mention_values(doc, first, f, f.states)
            vals.update(
                position_in_doc=pre.position_in_doc,
                position_in_sent=pre.first_position_in_sent,
                mean_position_in_sent=pre.mean_position_in_sent,
                edu_depth_percentile=dis.first_mention_depth_percentile,
                mean_cf=cent.mean_cf_percentile,
                cb_proportion=cent.cb_proportion,
                mean_transition=cent.mean_transition,
                min_transition=cent.min_transition,
                cluster_size=pre.cluster_size,
                cluster_size_percentile=pre.cluster_size_percentile,
                cluster_divergence=pre.dkl_dispersion,
                explicit_proportion=dis.explicit_proportion,
                min_depth_percentile=dis.min_depth_percentile,
            )
            meta = [f"{doc.doc_id}:{c.entity_id}", doc.doc_id, doc.partition, c.entity_id,
                    _dkl_max(doc, c, cfg), doc.n_summaries, c.salience]
            rows.append(meta + [vals[n] for n, _ in ENTITY_COLUMNS])
    return _finish("entity", rows, ENTITY_COLUMNS, ENTITY_META)


def ordinal_encode(table: FeatureTable, column: str = "min_transition", levels=range(1, 8)) -> FeatureTable:
    """Add cumulative indicators ``column>=k`` for each level above the lowest."""
    levels = list(levels)
    data = table.data.copy()
    cols = [dataclasses.replace(c) for c in table.columns]
    values = data[column].to_numpy()
    for k in levels[1:]:
        name = f"{column}>={k}"
        data[name] = (values >= k).astype(int)
        cols.append(ColumnSpec(name, BOOLEAN))
    return table.with_data(data, cols)


# --------------------------------------------------------------------------
# preprocessing


@dataclass
class Preprocessor:
    """Rare-level collapsing and z-scaling fitted on one table.

    Levels seen fewer than ``threshold`` times are merged into ``other``.
    At transform time, levels that were collapsed during fitting map to
    ``other`` too; levels never seen during fitting are kept verbatim so
    that set-membership tests downstream fail on them.
    """

    threshold: int = 300
    scale: bool = True
    levels: dict = field(default_factory=dict)
    raw_levels: dict = field(default_factory=dict)
    scaling: dict = field(default_factory=dict)

    def fit(self, table: FeatureTable) -> "Preprocessor":
        self.levels, self.raw_levels, self.scaling = {}, {}, {}
        for c in table.columns:
            col = table.data[c.name]
            if c.kind == CATEGORICAL:
                counts = Counter(col)
                self.raw_levels[c.name] = sorted(counts)
                mapped = [v if counts[v] >= self.threshold else OTHER for v in col]
                self.levels[c.name] = _levels_by_frequency(mapped)
            elif c.kind == NUMERIC and self.scale:
                vals = col.to_numpy(dtype=float)
                mean = float(vals.mean()) if vals.size else 0.0
                sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
                self.scaling[c.name] = (mean, sd if sd > 0 else 1.0)
        return self

    def _map_level(self, name, v):
        kept = self.levels[name]
        if v in kept:
            return v
        if v in self.raw_levels[name]:
            return OTHER
        return v

    def transform(self, table: FeatureTable) -> FeatureTable:
        data = table.data.copy()
        cols = []
        for c in table.columns:
            if c.kind == CATEGORICAL and c.name in self.levels:
                data[c.name] = [self._map_level(c.name, v) for v in data[c.name]]
                cols.append(ColumnSpec(c.name, c.kind, levels=list(self.levels[c.name])))
            elif c.kind == NUMERIC and c.name in self.scaling:
                mean, sd = self.scaling[c.name]
                data[c.name] = (data[c.name].to_numpy(dtype=float) - mean) / sd
                cols.append(ColumnSpec(c.name, c.kind, mean=mean, sd=sd))
            else:
                cols.append(dataclasses.replace(c))
        return table.with_data(data, cols)

    def fit_transform(self, table: FeatureTable) -> FeatureTable:
        return self.fit(table).transform(table)

    def inverse_scale(self, table: FeatureTable) -> FeatureTable:
        data = table.data.copy()
        for name, (mean, sd) in self.scaling.items():
            if name in data:
                data[name] = data[name].to_numpy(dtype=float) * sd + mean
        return table.with_data(data)

    def to_dict(self):
        return {
            "threshold": self.threshold,
            "scale": self.scale,
            "levels": self.levels,
            "raw_levels": self.raw_levels,
            "scaling": {k: list(v) for k, v in self.scaling.items()},
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            threshold=obj["threshold"],
            scale=obj["scale"],
            levels={k: list(v) for k, v in obj["levels"].items()},
            raw_levels={k: list(v) for k, v in obj["raw_levels"].items()},
            scaling={k: tuple(v) for k, v in obj["scaling"].items()},
        )


# --------------------------------------------------------------------------
# serialization

FLOAT_FORMAT = "%.10g"


def format_header(provenance: dict | None) -> str:
    if not provenance:
        return ""
    return "".join(f"# {k}: {provenance[k]}\n" for k in sorted(provenance))


def write_frame(df: pd.DataFrame, path, provenance=None, float_format=FLOAT_FORMAT):
    path = Path(path)
    body = df.to_csv(index=False, float_format=float_format, lineterminator="\n")
    path.write_text(format_header(provenance) + body, encoding="utf-8")


def read_frame(path, dtype=str) -> pd.DataFrame:
    lines = Path(path).read_text(encoding="utf-8").splitlines(keepends=True)
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        i += 1
    return pd.read_csv(StringIO("".join(lines[i:])), dtype=dtype, keep_default_na=False, na_filter=False)


def write_table(table: FeatureTable, path, provenance=None):
    """Write ``path`` (CSV) and ``path`` + ``.schema.json`` (column schema)."""
    path = Path(path)
    write_frame(table.data, path, provenance)
    Path(str(path) + ".schema.json").write_text(
        json.dumps(table.schema(), indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_table(path) -> FeatureTable:
    path = Path(path)
    schema = json.loads(Path(str(path) + ".schema.json").read_text(encoding="utf-8"))
    raw = read_frame(path)
    specs = [ColumnSpec(**c) for c in schema["columns"]]
    data = raw.copy()
    for c in specs:
        if c.kind == NUMERIC:
            data[c.name] = data[c.name].astype(float)
        elif c.kind == BOOLEAN:
            data[c.name] = data[c.name].astype(int)
    for name in ("cluster_divergence_max",):
        if name in data:
            data[name] = data[name].astype(float)
    for name in ("n_summaries", schema["target"]):
        data[name] = data[name].astype(int)
    return FeatureTable(schema["level"], data, specs, schema["meta"], schema["target"])
