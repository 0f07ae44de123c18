"""Command-line pipeline: ingest, features, descriptive reports and models.

Every step reads and writes under one output directory::

    config.json                     effective configuration (written by ingest)
    ingest/manifest.json, validation.csv, violations.csv
    features/{mention,entity}.csv   (+ .schema.json), mention_ordinal.csv
    describe/*.csv
    models/bb.json, bb_coefficients.csv, forest.json, forest.meta.json
    reports/anova.csv, importance*.csv, shuffle_genre*.csv, eval_<split>.csv, tsne.csv

CSV artifacts start with ``# key: value`` provenance lines (config hash,
seed, version, producing operation). Exit codes: 0 success, 1 usage error
(including a missing upstream artifact), 2 data error, 3 model error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, centering, corpus, embed, features, forest, metrics, regression, stats
from .corpus import DEFAULT_N_SUMMARIES, PARTITIONS
from .discourse import relation_salience_residuals, salience_contingency

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 0, 1, 2, 3
SEED_ENV = "SALIENCE_LAB_SEED"
TRAIN = "train"
LEVELS = ("mention", "entity")
ANALYSES = ("deprel", "etype", "relations", "dm", "centering")


class UsageError(Exception):
    pass


class MissingArtifactError(UsageError):
    def __init__(self, path, step):
        super().__init__(f"missing {path}; run `salience-lab {step}` first")
        self.path, self.step = path, step


class DataError(Exception):
    pass


# --------------------------------------------------------------------------
# configuration


@dataclasses.dataclass
class PipelineConfig:
    corpus: str | None = None
    partitions: list = dataclasses.field(default_factory=lambda: list(PARTITIONS))
    relations: str | None = None
    collapse_threshold: int = 300
    parts: int = 10
    normalization: str = "exp"
    n_summaries: int = DEFAULT_N_SUMMARIES
    seed: int = 0
    out: str = "salience_out"
    threads: int = 1

    @classmethod
    def from_dict(cls, obj) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
        return cls(**obj)

    def validate(self, need_corpus=False):
        if need_corpus:
            if not self.corpus:
                raise UsageError("no corpus directory given (--corpus or config 'corpus')")
            if not Path(self.corpus).is_dir():
                raise UsageError(f"corpus directory {self.corpus} does not exist")
        if self.relations and not Path(self.relations).is_file():
            raise UsageError(f"relation inventory {self.relations} does not exist")
        bad = sorted(set(self.partitions) - set(PARTITIONS))
        if bad:
            raise UsageError(f"unknown partition(s): {', '.join(bad)}")
        if self.collapse_threshold < 0 or self.parts < 1 or self.threads < 1 or self.n_summaries < 1:
            raise UsageError("thresholds, parts, threads and n_summaries must be positive")
        if self.normalization not in ("exp", "max"):
            raise UsageError("normalization must be 'exp' or 'max'")

    def inventory(self):
        return corpus.RelationInventory.load(self.relations)

    def dispersion(self):
        return metrics.DispersionConfig(parts=self.parts, normalization=self.normalization)

    def to_dict(self):
        return dataclasses.asdict(self)


def corpus_digest(directory) -> str:
    h = hashlib.sha256()
    for p in sorted(Path(directory).glob("*.json")):
        h.update(p.name.encode())
        h.update(b"\0")
        h.update(p.read_bytes())
    return h.hexdigest()


def config_hash(cfg: PipelineConfig, digest: str) -> str:
    """Hash of everything that can change an artifact body.

    Paths, output location and thread count are excluded; the corpus and
    relation inventory enter by content.
    """
    inv = Path(cfg.relations).read_bytes() if cfg.relations else b"default"
    payload = {
        "corpus": digest,
        "relations": hashlib.sha256(inv).hexdigest(),
        "partitions": sorted(cfg.partitions),
        "collapse_threshold": cfg.collapse_threshold,
        "parts": cfg.parts,
        "normalization": cfg.normalization,
        "n_summaries": cfg.n_summaries,
        "seed": cfg.seed,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


_FLAG_KEYS = ("corpus", "partitions", "relations", "collapse_threshold", "parts", "normalization",
              "n_summaries", "seed", "out", "threads")


def resolve_config(args) -> PipelineConfig:
    """Merge defaults, the stored run config, ``--config`` and flags.

    The seed falls back to ``SALIENCE_LAB_SEED`` when neither a flag nor
    the ``--config`` file sets it.
    """
    file_cfg = {}
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
    flags = {k: getattr(args, k) for k in _FLAG_KEYS if getattr(args, k, None) is not None}
    out = flags.get("out") or file_cfg.get("out") or PipelineConfig.out
    merged = {}
    stored = Path(out) / "config.json"
    if stored.is_file() and args.command != "ingest":
        merged.update(json.loads(stored.read_text(encoding="utf-8")))
    merged.update(file_cfg)
    if "seed" not in flags and "seed" not in file_cfg and os.environ.get(SEED_ENV):
        try:
            merged["seed"] = int(os.environ[SEED_ENV])
        except ValueError as exc:
            raise UsageError(f"{SEED_ENV} must be an integer") from exc
    merged.update(flags)
    merged["out"] = out
    cfg = PipelineConfig.from_dict(merged)
    cfg.validate(need_corpus=args.command == "ingest")
    return cfg


# --------------------------------------------------------------------------
# run context


class Run:
    def __init__(self, cfg: PipelineConfig, step: str, timestamps=False):
        self.cfg = cfg
        self.step = step
        self.out = Path(cfg.out)
        self.timestamps = timestamps
        self._manifest = None

    @property
    def manifest(self):
        if self._manifest is None:
            self._manifest = json.loads(self.require("ingest/manifest.json", "ingest").read_text(encoding="utf-8"))
        return self._manifest

    @property
    def digest(self):
        return self.manifest["corpus_digest"]

    def provenance(self, operation, **extra):
        prov = {
            "config_hash": config_hash(self.cfg, self.digest),
            "seed": self.cfg.seed,
            "version": __version__,
            "step": self.step,
            "operation": operation,
        }
        if self.timestamps:
            prov["created"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
        prov.update(extra)
        return prov

    def path(self, rel) -> Path:
        p = self.out / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def require(self, rel, step) -> Path:
        p = self.out / rel
        if not p.is_file():
            raise MissingArtifactError(p, step)
        return p

    def documents(self):
        cfg = self.cfg
        if not cfg.corpus:
            raise UsageError("no corpus directory recorded; run `salience-lab ingest --corpus DIR` first")
        if corpus_digest(cfg.corpus) != self.digest:
            raise DataError(f"corpus {cfg.corpus} changed since ingest; re-run `salience-lab ingest`")
        docs, _ = corpus.ingest(cfg.corpus, cfg.inventory(), cfg.partitions, cfg.n_summaries, cfg.threads)
        valid = set(self.manifest["valid"])
        return [d for d in docs if d.doc_id in valid]

    def table(self, level) -> features.FeatureTable:
        return features.read_table(self.require(f"features/{level}.csv", f"features --level {level}"))

    def write_rows(self, rel, operation, writer_fn, **extra):
        p = self.path(rel)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(features.format_header(self.provenance(operation, **extra)))
            writer_fn(fh)
        return p

    def write_frame(self, rel, df, operation, float_format=features.FLOAT_FORMAT, **extra):
        p = self.path(rel)
        features.write_frame(df, p, self.provenance(operation, **extra), float_format)
        return p


def _partition(table, name):
    sub = table.subset(name)
    if len(sub) == 0:
        raise DataError(f"no {table.level} rows in partition {name!r}")
    return sub


def _n_trials(table):
    n = set(table.data["n_summaries"].astype(int))
    if len(n) != 1:
        raise DataError(f"documents disagree on the number of summaries: {sorted(n)}")
    return n.pop()


def _fmt(x, spec=".6f"):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return format(x, spec)


# --------------------------------------------------------------------------
# steps


def cmd_ingest(run: Run, args):
    cfg = run.cfg
    docs, report = corpus.ingest(cfg.corpus, cfg.inventory(), cfg.partitions, cfg.n_summaries, cfg.threads)
    if not docs:
        raise DataError(f"no documents in partitions {cfg.partitions} under {cfg.corpus}")
    digest = corpus_digest(cfg.corpus)
    manifest = {
        "corpus_digest": digest,
        "documents": [{"doc_id": d.doc_id, "partition": d.partition, "genre": d.genre,
                       "n_violations": len(report[d.doc_id])} for d in docs],
        "valid": [d.doc_id for d in docs if not report[d.doc_id]],
    }
    run._manifest = manifest
    run.path("config.json").write_text(json.dumps(cfg.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    run.path("ingest/manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n",
                                                encoding="utf-8")

    def summary(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["doc_id", "partition", "genre", "tokens", "mentions", "entities", "violations"])
        for d in docs:
            w.writerow([d.doc_id, d.partition, d.genre, d.n_tokens, len(d.mentions), len(d.clusters),
                        len(report[d.doc_id])])

    def detail(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["doc_id", "rule", "ids", "message"])
        for d in docs:
            for v in report[d.doc_id]:
                w.writerow([d.doc_id, v.rule, " ".join(map(str, v.ids)), v.message])

    run.write_rows("ingest/validation.csv", "corpus.validate_document", summary)
    run.write_rows("ingest/violations.csv", "corpus.validate_document", detail)
    n_bad = sum(1 for d in docs if report[d.doc_id])
    n_viol = sum(len(v) for v in report.values())
    for d in docs:
        print(f"{d.doc_id}\t{d.partition}\t{len(report[d.doc_id])} violations")
    print(f"ingested {len(docs)} documents, {n_viol} violations in {n_bad} documents")
    return EXIT_DATA if n_bad else EXIT_OK


def cmd_features(run: Run, args):
    docs = run.documents()
    if not docs:
        raise DataError("no valid documents; see ingest/violations.csv")
    disp = run.cfg.dispersion()
    levels = LEVELS if args.level == "both" else (args.level,)
    for level in levels:
        build = features.build_mention_table if level == "mention" else features.build_entity_table
        table = build(docs, disp)
        features.write_table(table, run.path(f"features/{level}.csv"),
                             run.provenance(f"features.build_{level}_table", level=level))
        if level == "mention":
            ordinal = features.ordinal_encode(table)
            run.write_frame("features/mention_ordinal.csv", ordinal.data, "features.ordinal_encode")
        print(f"{level} table: {len(table)} rows, {len(table.columns)} feature columns")
    return EXIT_OK


# describe ------------------------------------------------------------------


def _group_cis(df, by, value="salience"):
    groups = {str(k): g[value].to_numpy(dtype=float) for k, g in df.groupby(by, sort=True)}
    return stats.adjusted_group_cis(groups)


def _safe_corr(fn, x, y):
    try:
        return fn(x, y)
    except ValueError:
        return math.nan, math.nan


def _safe_welch(x0, x1):
    if len(x0) < 2 or len(x1) < 2:
        return math.nan, math.nan, math.nan
    try:
        return stats.welch_t_hedges(x0, x1)
    except ValueError:
        return math.nan, math.nan, math.nan


def _corr_rows(w, level, table, variables):
    y = table.y.astype(float)
    for v in variables:
        r, p = _safe_corr(stats.pearson, table.data[v].to_numpy(dtype=float), y)
        w.writerow([v, level, len(y), _fmt(r), "nan" if math.isnan(p) else stats.format_p(p)])


def describe_deprel(run, mention, entity):
    run.write_rows("describe/deprel.csv", "stats.adjusted_group_cis",
                   lambda fh: stats.write_group_summaries(_group_cis(mention.data, "deprel"), fh))
    d = mention.data
    y = d["salience"].to_numpy(dtype=float)
    contrasts = [
        ("subject_vs_other", d["deprel"].isin(centering.SUBJECT_DEPRELS).to_numpy()),
        ("definite_vs_indefinite", d["definite"].astype(int).to_numpy() == 1),
        ("pronoun_vs_other", (d["upos"] == "PRON").to_numpy()),
    ]

    def write_contrasts(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["contrast", "n_other", "n_group", "t", "p", "hedges_g"])
        for name, mask in contrasts:
            t, p, g = _safe_welch(y[~mask], y[mask])
            w.writerow([name, int((~mask).sum()), int(mask.sum()), _fmt(t),
                        "nan" if math.isnan(p) else stats.format_p(p), _fmt(g)])

    def write_corr(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "level", "n", "r", "p"])
        _corr_rows(w, "entity", entity, ["position_in_doc", "position_in_sent"])
        _corr_rows(w, "mention", mention, ["position_in_doc", "position_in_sent"])

    run.write_rows("describe/deprel_contrasts.csv", "stats.welch_t_hedges", write_contrasts)
    run.write_rows("describe/position_correlations.csv", "stats.pearson", write_corr)


def describe_etype(run, mention, entity):
    d = mention.data
    overall = _group_cis(d, "entity_type")
    run.write_rows("describe/etype.csv", "stats.adjusted_group_cis",
                   lambda fh: stats.write_group_summaries(overall, fh))
    overall_mean = {g.label: g.mean for g in overall}
    per_genre = {}
    for genre, sub in d.groupby("genre", sort=True):
        per_genre[str(genre)] = _group_cis(sub, "entity_type")

    def write_genre(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["genre", "group", "n", "mean", "ci_low", "ci_high", "share_of_max_salience", "rank"])
        for genre, rows in per_genre.items():
            order = sorted(rows, key=lambda g: (-g.mean, g.label))
            for rank, g in enumerate(order, 1):
                w.writerow([genre, g.label, g.n, _fmt(g.mean), _fmt(g.ci_low), _fmt(g.ci_high),
                            _fmt(g.share_of_max_salience), rank])

    def write_spearman(fh):
        recs = []
        for genre, rows in per_genre.items():
            a = np.array([g.mean for g in rows])
            b = np.array([overall_mean[g.label] for g in rows])
            rho, p = _safe_corr(stats.spearman, a, b) if len(rows) >= 3 else (math.nan, math.nan)
            recs.append((genre, len(rows), rho, p))
        recs.sort(key=lambda r: (math.isnan(r[2]), -r[2] if not math.isnan(r[2]) else 0, r[0]))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["genre", "n_types", "spearman_rho", "p"])
        for genre, n, rho, p in recs:
            w.writerow([genre, n, _fmt(rho), "nan" if math.isnan(p) else stats.format_p(p)])

    run.write_rows("describe/etype_genre.csv", "stats.adjusted_group_cis", write_genre)
    run.write_rows("describe/etype_spearman.csv", "stats.spearman", write_spearman)


def _residual_csv(run, rel, labels, salient):
    levels, counts = salience_contingency(labels, salient)
    if len(levels) < 2 or np.any(counts.sum(axis=0) == 0):
        raise DataError(f"{rel}: contingency table needs 2+ labels and both salient and non-salient mentions")
    table = relation_salience_residuals(counts, rows=levels)
    run.write_rows(rel, "discourse.relation_salience_residuals", table.write_csv)


def describe_relations(run, mention, entity):
    _residual_csv(run, "describe/relations.csv", mention.data["relation_coarse"].tolist(), mention.salient)


def describe_dm(run, mention, entity):
    labels = ["explicit" if int(v) else "implicit" for v in mention.data["explicit_dm"]]
    _residual_csv(run, "describe/dm.csv", labels, mention.salient)


def describe_centering(run, mention, entity):
    docs = run.documents()
    run.write_rows("describe/centering_trace.csv", "centering.analyze_document",
                   lambda fh: centering.write_trace(docs, fh))

    def write_corr(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "level", "n", "r", "p"])
        _corr_rows(w, "entity", entity, ["cluster_size", "cluster_size_percentile", "cluster_divergence",
                                         "mean_cf", "cb_proportion", "mean_transition", "min_transition"])

    run.write_rows("describe/centering_correlations.csv", "stats.pearson", write_corr)
    run.write_rows("describe/centering_transitions.csv", "stats.adjusted_group_cis",
                   lambda fh: stats.write_group_summaries(_group_cis(entity.data, "min_transition"), fh))


DESCRIBE = {
    "deprel": describe_deprel,
    "etype": describe_etype,
    "relations": describe_relations,
    "dm": describe_dm,
    "centering": describe_centering,
}


def cmd_describe(run: Run, args):
    mention, entity = run.table("mention"), run.table("entity")
    analyses = ANALYSES if args.analysis == "all" else (args.analysis,)
    for a in analyses:
        DESCRIBE[a](run, mention, entity)
        print(f"describe {a}: written to {run.out / 'describe'}")
    return EXIT_OK


# regression ------------------------------------------------------------------


def _load_bb(run):
    path = run.require("models/bb.json", "fit-bb --terms ...")
    obj = json.loads(path.read_text(encoding="utf-8"))
    model = regression.BetaBinomialModel.from_dict(obj)
    pre = features.Preprocessor.from_dict(obj["scaling"])
    return model, pre, obj["provenance"]["level"]


def cmd_fit_bb(run: Run, args):
    raw = run.table(args.level)
    train = _partition(raw, TRAIN)
    terms = args.terms or list(raw.feature_names)
    unknown = [t for t in terms if t not in raw.feature_names]
    if unknown:
        raise UsageError(f"unknown term(s) for the {args.level} table: {', '.join(unknown)}")
    pre = features.Preprocessor(threshold=run.cfg.collapse_threshold, scale=True)
    train = pre.fit_transform(train)
    model = regression.fit(train, terms, n=_n_trials(train), phi=args.phi, gtol=args.gtol, max_iter=args.max_iter)
    prov = run.provenance("regression.fit", level=args.level)
    model.save(run.path("models/bb.json"), pre, prov)
    coef = pd.DataFrame({"term": list(model.coefficients) + ["(phi)"],
                         "estimate": list(model.coefficients.values()) + [model.phi]})
    run.write_frame("models/bb_coefficients.csv", coef, "regression.fit", float_format="%.6g",
                    level=args.level, loglik=f"{model.loglik:.6f}", aic=f"{model.aic:.4f}", n_obs=model.n_obs)
    print(f"beta-binomial fit on {model.n_obs} {args.level} rows: {len(terms)} terms, "
          f"logLik {model.loglik:.4f}, AIC {model.aic:.4f}, phi {model.phi:.4f}, {model.iterations} iterations")
    return EXIT_OK


def cmd_anova(run: Run, args):
    model, pre, level = _load_bb(run)
    train = pre.transform(_partition(run.table(level), TRAIN))
    table = regression.anova_single_term_deletions(model, train, threads=run.cfg.threads)
    table.write_csv(run.path("reports/anova.csv"), run.provenance("regression.anova_single_term_deletions",
                                                                  level=level))
    print(table.to_frame().to_string(index=False))
    return EXIT_OK


# forest ----------------------------------------------------------------------


def _load_forest(run):
    path = run.require("models/forest.json", "fit-forest")
    meta = json.loads(run.require("models/forest.meta.json", "fit-forest").read_text(encoding="utf-8"))
    model = forest.ExtraTreesModel.load(path)
    return model, features.Preprocessor.from_dict(meta["preprocessor"]), meta["level"]


def cmd_fit_forest(run: Run, args):
    raw = run.table(args.level)
    pre = features.Preprocessor(threshold=run.cfg.collapse_threshold, scale=False)
    train = pre.fit_transform(_partition(raw, TRAIN))
    feats = args.features or None
    if feats:
        unknown = [f for f in feats if f not in raw.feature_names]
        if unknown:
            raise UsageError(f"unknown feature(s): {', '.join(unknown)}")
    params = forest.ForestParams(trees=args.trees, min_leaf=args.min_leaf)
    seed = run.cfg.seed if args.forest_seed is None else args.forest_seed
    model = forest.fit_forest(train, feats, params, seed=seed, threads=run.cfg.threads)
    model.save(run.path("models/forest.json"))
    meta = {"level": args.level, "preprocessor": pre.to_dict(), "model_hash": model.model_hash(),
            "provenance": run.provenance("forest.fit_forest", level=args.level, forest_seed=seed)}
    run.path("models/forest.meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n",
                                                   encoding="utf-8")
    print(f"extra-trees: {args.trees} trees on {len(train)} {args.level} rows, "
          f"train accuracy {forest.accuracy(model, train):.4f}, hash {model.model_hash()[:16]}")
    return EXIT_OK


def cmd_importance(run: Run, args):
    model, pre, level = _load_forest(run)
    gini = mda = None
    if args.method in ("gini", "both"):
        gini = forest.gini_importance(model)
    if args.method in ("mda", "both"):
        train = pre.transform(_partition(run.table(level), TRAIN))
        mda = forest.permutation_mda(model, train, repeats=args.repeats, seed=run.cfg.seed)
    report = forest.importance_report(gini, mda)
    name = "importance.csv" if args.method == "both" else f"importance_{args.method}.csv"
    op = {"gini": "forest.gini_importance", "mda": "forest.permutation_mda"}.get(args.method,
                                                                                "forest.importance_report")
    run.write_frame(f"reports/{name}", report, op, float_format="%.6g", level=level)
    print(report.to_string(index=False))
    return EXIT_OK


def cmd_shuffle_genre(run: Run, args):
    model, pre, level = _load_forest(run)
    table = pre.transform(_partition(run.table(level), args.split))
    try:
        rep = forest.genre_shuffle_analysis(model, table, seed=run.cfg.seed, top_k=args.top_k)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    run.write_frame("reports/shuffle_genre.csv", rep.to_frame(), "forest.genre_shuffle_analysis",
                    float_format="%.6f", split=args.split)
    p0 = np.array([r.p_orig for r in rep.records])
    p1 = np.array([r.p_shuffled for r in rep.records])
    y = np.array([r.salient for r in rep.records])
    summary = pd.DataFrame({
        "quantity": ["rows", "flips", "salient_flips", "non_salient_flips", "accuracy_original", "accuracy_shuffled"],
        "value": [len(rep.records), len(rep.flips), sum(r.salient for r in rep.flips),
                  sum(not r.salient for r in rep.flips), float(np.mean((p0 > 0.5) == y)),
                  float(np.mean((p1 > 0.5) == y))],
    })
    run.write_frame("reports/shuffle_genre_summary.csv", summary, "forest.genre_shuffle_analysis",
                    float_format="%.6f", split=args.split)
    print(summary.to_string(index=False))
    return EXIT_OK


# evaluation and embedding ----------------------------------------------------


def cmd_eval(run: Run, args):
    want = ("bb", "forest") if args.model == "all" else (args.model,)
    have = {"bb": (run.out / "models/bb.json").is_file(), "forest": (run.out / "models/forest.json").is_file()}
    if args.model != "all" and not have[args.model]:
        step = "fit-bb --terms ..." if args.model == "bb" else "fit-forest"
        raise MissingArtifactError(run.out / f"models/{args.model}.json", step)
    rows = []
    level = args.level
    for name in want:
        if not have[name]:
            continue
        if name == "bb":
            model, pre, level = _load_bb(run)
            table = pre.transform(_partition(run.table(level), args.split))
            res = regression.evaluate(model, table)
            rows.append({"model": "beta_binomial", "level": level, "n": res["n"], "accuracy": res["accuracy"],
                         "majority_baseline": res["majority_accuracy"], "rmse": res["rmse"],
                         "baseline_rmse": res["baseline_rmse"]})
        else:
            model, pre, level = _load_forest(run)
            table = pre.transform(_partition(run.table(level), args.split))
            sal = table.salient
            rows.append({"model": "extra_trees", "level": level, "n": len(table),
                         "accuracy": forest.accuracy(model, table),
                         "majority_baseline": float(max(sal.mean(), 1 - sal.mean())),
                         "rmse": math.nan, "baseline_rmse": math.nan})
    if not rows:
        table = _partition(run.table(level), args.split)
        sal = table.salient
        rows.append({"model": "none", "level": level, "n": len(table), "accuracy": math.nan,
                     "majority_baseline": float(max(sal.mean(), 1 - sal.mean())),
                     "rmse": math.nan, "baseline_rmse": math.nan})
    df = pd.DataFrame(rows, columns=["model", "level", "n", "accuracy", "majority_baseline", "rmse",
                                     "baseline_rmse"])
    run.write_frame(f"reports/eval_{args.split}.csv", df, "regression.evaluate+forest.accuracy",
                    float_format="%.6f", split=args.split)
    print(f"split {args.split}: n={rows[0]['n']}, baseline accuracy {rows[0]['majority_baseline']:.4f}")
    for r in rows:
        if r["model"] == "none":
            print("no fitted models found; run `salience-lab fit-bb` or `salience-lab fit-forest` for model scores")
            continue
        line = f"{r['model']}: accuracy {r['accuracy']:.4f}"
        if not math.isnan(r["rmse"]):
            line += f", rmse {r['rmse']:.4f} (baseline {r['baseline_rmse']:.4f})"
        print(line)
    return EXIT_OK


def cmd_tsne(run: Run, args):
    table = run.table(args.level)
    if args.split != "all":
        table = _partition(table, args.split)
    X, rows = embed.profile_matrix(table)
    cfg = embed.EmbedConfig(perplexity=args.perplexity, iterations=args.iterations,
                            learning_rate=args.learning_rate, seed=run.cfg.seed)
    res = embed.tsne(X, cfg)
    df = embed.embedding_frame(res.embedding, rows)
    run.write_frame("reports/tsne.csv", df, "embed.tsne", float_format="%.6f", split=args.split,
                    perplexity=args.perplexity, initial_kl=f"{res.initial_kl:.6f}", final_kl=f"{res.final_kl:.6f}")
    print(f"t-SNE on {len(df)} rows: KL {res.initial_kl:.4f} -> {res.final_kl:.4f}")
    if res.final_kl >= res.initial_kl:
        print("salience-lab: warning: KL did not decrease; try more --iterations or a smaller --perplexity",
              file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "features": cmd_features,
    "describe": cmd_describe,
    "fit-bb": cmd_fit_bb,
    "anova": cmd_anova,
    "fit-forest": cmd_fit_forest,
    "importance": cmd_importance,
    "shuffle-genre": cmd_shuffle_genre,
    "eval": cmd_eval,
    "tsne": cmd_tsne,
}


# --------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    g = p.add_argument_group("pipeline options")
    g.add_argument("--corpus", default=d, help="directory of interchange-format JSON documents")
    g.add_argument("--out", default=d, help="output directory (default salience_out)")
    g.add_argument("--config", default=d, help="JSON file with PipelineConfig fields")
    g.add_argument("--seed", type=int, default=d, help=f"global seed (fallback ${SEED_ENV}, then 0)")
    g.add_argument("--threads", type=int, default=d, help="worker cap for parallel steps")
    g.add_argument("--partitions", nargs="+", default=d, choices=PARTITIONS)
    g.add_argument("--relations", default=d, help="relation inventory JSON")
    g.add_argument("--collapse-threshold", dest="collapse_threshold", type=int, default=d,
                   help="categorical levels rarer than this in train become 'other' (default 300)")
    g.add_argument("--parts", type=int, default=d, help="dispersion bins (default 10)")
    g.add_argument("--normalization", choices=("exp", "max"), default=d, help="dispersion scaling")
    g.add_argument("--n-summaries", dest="n_summaries", type=int, default=d)
    g.add_argument("--timestamps", action="store_true", default=argparse.SUPPRESS if suppress else False,
                   help="add a creation time to provenance headers")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="salience-lab", description="Graded entity salience analysis pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        _common(p, suppress=True)
        return p

    add("ingest", "parse, validate and label a corpus")
    p = add("features", "build feature tables")
    p.add_argument("--level", choices=LEVELS + ("both",), default="both")
    p = add("describe", "descriptive tables (group means, residuals, correlations)")
    p.add_argument("--analysis", choices=ANALYSES + ("all",), default="all")
    p = add("fit-bb", "fit a beta-binomial regression on the train partition")
    p.add_argument("--terms", nargs="+", help="predictor columns (default: all)")
    p.add_argument("--level", choices=LEVELS, default="mention")
    p.add_argument("--phi", type=float, help="fix the dispersion (0 gives the binomial model)")
    p.add_argument("--gtol", type=float, default=1e-6)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=500)
    add("anova", "single-term deletions of the fitted beta-binomial model")
    p = add("fit-forest", "fit an Extra-Trees classifier for salience > 0")
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--min-leaf", dest="min_leaf", type=int, default=1)
    p.add_argument("--level", choices=LEVELS, default="mention")
    p.add_argument("--features", nargs="+", help="feature columns (default: all)")
    p.add_argument("--forest-seed", dest="forest_seed", type=int, help="override the global seed for the forest")
    p = add("importance", "Gini and permutation importances of the forest")
    p.add_argument("--method", choices=("gini", "mda", "both"), default="both")
    p.add_argument("--repeats", type=int, default=5)
    p = add("shuffle-genre", "prediction changes after shuffling genre")
    p.add_argument("--split", choices=PARTITIONS, default="test")
    p.add_argument("--top-k", dest="top_k", type=int, default=5)
    p = add("eval", "accuracy and baselines on a held-out split")
    p.add_argument("--split", choices=PARTITIONS, required=True)
    p.add_argument("--model", choices=("bb", "forest", "all"), default="all")
    p.add_argument("--level", choices=LEVELS, default="mention", help="table level when no model is fitted")
    p = add("tsne", "2-D t-SNE map of mention profiles")
    p.add_argument("--split", choices=PARTITIONS + ("all",), default="dev")
    p.add_argument("--level", choices=LEVELS, default="mention")
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=200.0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        run = Run(cfg, args.command, timestamps=args.timestamps)
        return COMMANDS[args.command](run, args)
    except UsageError as exc:
        print(f"salience-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except regression.RegressionError as exc:
        print(f"salience-lab: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (DataError, ValueError, OSError) as exc:
        print(f"salience-lab: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
