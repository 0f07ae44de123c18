"""Builders and independent reference implementations shared by the tests."""

import json
from importlib.resources import files

import numpy as np

from salience_lab.corpus import parse_document

FIXTURES = files("salience_lab") / "data" / "fixtures"


def doc_dict(sentences, mentions, edus=None, summaries=None, doc_id="d1", genre="news", partition="train"):
    """Interchange-format dict from compact sentence and mention specs.

    ``sentences`` holds lists of ``(form, upos, head, deprel)`` with heads
    local to the sentence. ``mentions`` are dicts with ``entity``, ``sent``,
    ``start``, ``end`` (local, inclusive) and optional ``head``,
    ``entity_type``, ``definite``, ``singular``, ``info_status``.
    """
    sents, offsets, off = [], [], 0
    for s in sentences:
        offsets.append(off)
        sents.append([{"id": off + i + 1, "form": f, "upos": u, "head": 0 if h == 0 else off + h, "deprel": r}
                      for i, (f, u, h, r) in enumerate(s)])
        off += len(s)
    ms, by_entity = [], {}
    for i, m in enumerate(mentions):
        o = offsets[m["sent"]]
        mid = m.get("id", f"m{i + 1}")
        ms.append({
            "mention_id": mid,
            "entity_id": m["entity"],
            "start": o + m["start"],
            "end": o + m["end"],
            "head": o + m.get("head", m["end"]),
            "entity_type": m.get("entity_type", "person"),
            "definite": m.get("definite", True),
            "singular": m.get("singular", True),
            "info_status": m.get("info_status", "new"),
        })
        by_entity.setdefault(m["entity"], []).append(mid)
    if edus is None:
        edus = [{"id": 1, "start": 1, "end": off, "relation_coarse": "root", "relation_fine": "root",
                 "parent": None, "explicit_dm": False}]
    if summaries is None:
        summaries = [{"summary_id": f"s{i + 1}", "entities": []} for i in range(5)]
    return {
        "doc_id": doc_id, "genre": genre, "partition": partition, "sentences": sents, "mentions": ms,
        "entities": [{"entity_id": e, "mentions": v} for e, v in sorted(by_entity.items())],
        "edus": edus, "summaries": summaries,
    }


def make_doc(*args, **kwargs):
    return parse_document(json.dumps(doc_dict(*args, **kwargs)))


DEPRELS = ["nsubj", "nsubj:pass", "csubj", "obj", "iobj", "obl", "nmod", "nmod:poss", "root", "conj"]
UPOS = ["PRON", "NOUN", "PROPN", "DET", "VERB"]
STATUSES = ["given", "accessible", "new"]


def random_doc_dict(rng, max_sentences=8, max_entities=5, doc_id="r"):
    """Random document with single- and multi-token mentions.

    Factors are drawn from small sets so that ties on every factor except
    position are common.
    """
    n_sent = int(rng.integers(1, max_sentences + 1))
    n_ent = int(rng.integers(1, max_entities + 1))
    sentences, mentions = [], []
    for s in range(n_sent):
        length = int(rng.integers(1, 7))
        sentences.append([(f"w{s}_{i}", str(rng.choice(UPOS)), 0, str(rng.choice(DEPRELS)))
                          for i in range(length)])
        i = 1
        while i <= length:
            if rng.random() < 0.55:
                end = min(length, i + int(rng.integers(0, 2)))
                head = int(rng.integers(i, end + 1))
                mentions.append({"entity": f"e{int(rng.integers(n_ent))}", "sent": s, "start": i, "end": end,
                                 "head": head, "info_status": str(rng.choice(STATUSES))})
                if rng.random() < 0.2:
                    # nested mention inside the previous span
                    mentions.append({"entity": f"e{int(rng.integers(n_ent))}", "sent": s, "start": i,
                                     "end": i, "head": i, "info_status": str(rng.choice(STATUSES))})
                i = end + 1
            else:
                i += 1
    return doc_dict(sentences, mentions, doc_id=doc_id)


# --------------------------------------------------------------------------
# brute-force Centering reference, written against the raw dict


SUBJ = {"nsubj", "nsubj:pass", "csubj"}
OBJ = {"obj", "iobj"}
GIVEN = {"given": 0, "accessible": 1, "new": 2}


def _beats(a, b):
    """True when mention record ``a`` outranks ``b`` (explicit factor cascade)."""
    for fa, fb in ((a["cbpron"], b["cbpron"]), (a["pron"], b["pron"]), (a["func"], b["func"]),
                   (a["giv"], b["giv"]), (a["start"], b["start"]), (a["end"], b["end"])):
        if fa != fb:
            return fa < fb
    return a["mid"] < b["mid"]


def oracle_centering(d):
    """Per sentence: (ranked entity ids, cb, transition number 1..7)."""
    tokens = {t["id"]: (si, t) for si, s in enumerate(d["sentences"]) for t in s}
    out = []
    prev_cf, prev_cb = None, None
    for si, _ in enumerate(d["sentences"]):
        ments = [m for m in d["mentions"] if tokens[m["head"]][0] == si]
        ents = {m["entity_id"] for m in ments}
        cb = None
        if prev_cf is not None:
            for e in prev_cf:
                if e in ents:
                    cb = e
                    break
        recs = []
        for m in ments:
            head = tokens[m["head"]][1]
            pron = head["upos"] == "PRON"
            func = 0 if head["deprel"] in SUBJ else (1 if head["deprel"] in OBJ else 2)
            recs.append({"eid": m["entity_id"], "cbpron": 0 if pron and m["entity_id"] == cb else 1,
                         "pron": 0 if pron else 1, "func": func, "giv": GIVEN[m["info_status"]],
                         "start": m["start"], "end": m["end"], "mid": m["mention_id"]})
        # entity represented by a mention no other mention of it beats
        reps = {}
        for r in recs:
            if not any(_beats(o, r) for o in recs if o["eid"] == r["eid"] and o is not r):
                reps[r["eid"]] = r
        rank = {e: 1 + sum(_beats(o, r) for o in reps.values() if o is not r) for e, r in reps.items()}
        cf = sorted(rank, key=rank.get)
        if prev_cf is None or prev_cb is None:
            trans = 7 if cb is None else 5
        elif cb is None:
            trans = 6
        elif cb == prev_cb:
            trans = 1 if cf[0] == cb else 2
        else:
            trans = 3 if cf[0] == cb else 4
        out.append((cf, cb, trans))
        prev_cf, prev_cb = cf, cb
    return out


def susan_dict():
    s1 = [("Susan", "PROPN", 2, "nsubj"), ("gave", "VERB", 0, "root"), ("Betsy", "PROPN", 2, "iobj"),
          ("a", "DET", 6, "det"), ("pet", "NOUN", 6, "compound"), ("hamster", "NOUN", 2, "obj"),
          (".", "PUNCT", 2, "punct")]
    s2 = [("She", "PRON", 2, "nsubj"), ("asked", "VERB", 0, "root"), ("whether", "SCONJ", 5, "mark"),
          ("Betsy", "PROPN", 5, "nsubj"), ("liked", "VERB", 2, "ccomp"), ("the", "DET", 7, "det"),
          ("gift", "NOUN", 5, "obj"), (".", "PUNCT", 2, "punct")]
    mentions = [
        {"entity": "susan", "sent": 0, "start": 1, "end": 1},
        {"entity": "betsy", "sent": 0, "start": 3, "end": 3},
        {"entity": "hamster", "sent": 0, "start": 4, "end": 6, "entity_type": "animal", "definite": False},
        {"entity": "susan", "sent": 1, "start": 1, "end": 1, "info_status": "given"},
        {"entity": "betsy", "sent": 1, "start": 4, "end": 4, "info_status": "given"},
        {"entity": "hamster", "sent": 1, "start": 6, "end": 7, "entity_type": "animal", "info_status": "given"},
    ]
    return doc_dict([s1, s2], mentions, genre="fiction")


# --------------------------------------------------------------------------
# misc references


def lgamma_betabinom_logpmf(k, n, mu, phi):
    """Textbook log-gamma form of the beta-binomial mass (a = mu/phi, b = (1-mu)/phi)."""
    from scipy.special import betaln, gammaln

    a, b = mu / phi, (1 - mu) / phi
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) + betaln(k + a, n - k + b) - betaln(a, b)


def two_moons(n, noise, rng):
    t = rng.uniform(0, np.pi, n)
    lab = rng.integers(0, 2, n)
    x = np.where(lab == 0, np.cos(t), 1 - np.cos(t))
    y = np.where(lab == 0, np.sin(t), 0.5 - np.sin(t))
    X = np.column_stack([x, y]) + noise * rng.standard_normal((n, 2))
    return X, lab


def synthetic_table(columns, target, kinds=None, partition="train", n_summaries=5):
    """FeatureTable over ``columns`` (name -> values); object columns are categorical."""
    import pandas as pd

    from salience_lab.features import CATEGORICAL, NUMERIC, ColumnSpec, FeatureTable

    data = pd.DataFrame(columns)
    n = len(data)
    kinds = dict(kinds or {})
    specs = []
    for name in columns:
        kind = kinds.get(name) or (CATEGORICAL if data[name].dtype == object else NUMERIC)
        levels = sorted(set(data[name])) if kind == CATEGORICAL else None
        specs.append(ColumnSpec(name, kind, levels))
    meta = pd.DataFrame({"row_id": [f"r{i}" for i in range(n)], "doc_id": "syn", "partition": partition,
                         "n_summaries": n_summaries, "salience": np.asarray(target, dtype=int)})
    return FeatureTable("mention", pd.concat([meta, data], axis=1), specs,
                        ["row_id", "doc_id", "partition", "n_summaries", "salience"])


GOLDEN_ARTIFACTS = [
    "features/mention.csv",
    "features/mention.csv.schema.json",
    "features/entity.csv",
    "features/entity.csv.schema.json",
    "reports/anova.csv",
    "reports/importance.csv",
]

FIXTURE_TERMS = ["position_in_doc", "cluster_size_percentile", "cb_proportion", "definite", "deprel"]


def run_fixture_pipeline(out, threads=1, seed=7):
    """Full CLI pipeline over the bundled fixtures; returns the exit codes."""
    from salience_lab.cli import main

    common = ["--out", str(out), "--threads", str(threads)]
    steps = [
        ["ingest", "--corpus", str(FIXTURES), "--seed", str(seed), "--collapse-threshold", "3"],
        ["features"],
        ["describe"],
        ["fit-bb", "--terms", *FIXTURE_TERMS],
        ["anova"],
        ["fit-forest", "--trees", "50"],
        ["importance", "--method", "both"],
        ["shuffle-genre", "--split", "train"],
        ["eval", "--split", "test"],
        ["tsne", "--split", "all", "--perplexity", "5"],
    ]
    return [main(s[:1] + common + s[1:]) for s in steps]
