"""Centering analysis: Cf ranking, Cb, transitions and entity aggregates.

The utterance unit is the sentence. Entities in a sentence are ranked by a
lexicographic key over their best realization; the backward-looking center
is the highest-ranked entity of the previous sentence's Cf list that is
realized again in the current sentence.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Sequence

from .corpus import Document, EntityCluster, Mention

SUBJECT_DEPRELS = frozenset({"nsubj", "nsubj:pass", "csubj"})
OBJECT_DEPRELS = frozenset({"obj", "iobj"})
GIVENNESS_ORDER = {"given": 0, "accessible": 1, "new": 2}

#: Ranking factors in default precedence order; position always breaks ties last.
DEFAULT_PRECEDENCE = ("cb_pronoun", "pronoun", "function", "givenness")


class Transition(enum.IntEnum):
    CONTINUATION = 1
    RETENTION = 2
    SMOOTH_SHIFT = 3
    ROUGH_SHIFT = 4
    ESTABLISHMENT = 5
    NULL = 6
    ZERO = 7


@dataclass(frozen=True)
class CfEntry:
    entity_id: str
    rank: int
    rank_percentile: float


@dataclass(frozen=True)
class CenteringState:
    sentence_index: int
    cf_list: tuple[CfEntry, ...]
    cb: str | None
    transition: Transition | None = None

    @property
    def entities(self):
        return frozenset(e.entity_id for e in self.cf_list)

    def rank_of(self, entity_id):
        for e in self.cf_list:
            if e.entity_id == entity_id:
                return e
        return None


@dataclass(frozen=True)
class EntityCenteringFeatures:
    mean_cf_percentile: float
    cb_proportion: float
    mean_transition: float
    min_transition: int


def function_class(deprel: str) -> int:
    """0 for subjects, 1 for objects, 2 for everything else."""
    if deprel in SUBJECT_DEPRELS:
        return 0
    if deprel in OBJECT_DEPRELS:
        return 1
    return 2


def _realized_cb(entities, prev: CenteringState | None):
    if prev is None:
        return None
    for entry in prev.cf_list:
        if entry.entity_id in entities:
            return entry.entity_id
    return None


def _mention_key(doc, m, cb, precedence):
    head = doc.head_token(m)
    pron = head.upos == "PRON"
    factors = {
        "cb_pronoun": 0 if (pron and m.entity_id == cb) else 1,
        "pronoun": 0 if pron else 1,
        "function": function_class(head.deprel),
        "givenness": GIVENNESS_ORDER.get(m.info_status, len(GIVENNESS_ORDER)),
    }
    return tuple(factors[f] for f in precedence) + (m.start, m.end, m.mention_id)


def rank_cf(
    doc: Document,
    sentence_mentions: Sequence[Mention],
    prev: CenteringState | None = None,
    precedence: Sequence[str] = DEFAULT_PRECEDENCE,
) -> tuple[CfEntry, ...]:
    """Rank the distinct entities realized by ``sentence_mentions``.

    An entity is represented by its best-ranked mention. The Cb-pronoun
    factor refers to the Cb this sentence inherits from ``prev``, which
    depends only on which entities are realized here, not on their order.
    """
    if sorted(precedence) != sorted(DEFAULT_PRECEDENCE):
        raise ValueError(f"precedence must be a permutation of {DEFAULT_PRECEDENCE}")
    entities = {m.entity_id for m in sentence_mentions}
    cb = _realized_cb(entities, prev)
    best = {}
    for m in sentence_mentions:
        key = _mention_key(doc, m, cb, precedence)
        if m.entity_id not in best or key < best[m.entity_id]:
            best[m.entity_id] = key
    order = sorted(best, key=lambda eid: (best[eid], eid))
    k = len(order)
    return tuple(CfEntry(eid, i + 1, (i + 1) / k) for i, eid in enumerate(order))


def identify_cb(curr_cf: Sequence[CfEntry], prev: CenteringState | None) -> str | None:
    """Highest-ranked entity of the previous Cf list realized in ``curr_cf``."""
    return _realized_cb({e.entity_id for e in curr_cf}, prev)


def classify_transition(prev: CenteringState | None, curr: CenteringState) -> Transition:
    """Transition type from ``prev`` to ``curr``; only ``curr.cf_list`` and ``curr.cb`` are read."""
    cb, cf_list = curr.cb, curr.cf_list
    prev_cb = prev.cb if prev is not None else None
    if prev_cb is None:
        return Transition.ZERO if cb is None else Transition.ESTABLISHMENT
    if cb is None:
        return Transition.NULL
    top = cf_list[0].entity_id == cb
    if cb == prev_cb:
        return Transition.CONTINUATION if top else Transition.RETENTION
    return Transition.SMOOTH_SHIFT if top else Transition.ROUGH_SHIFT


def analyze_document(doc: Document, precedence: Sequence[str] = DEFAULT_PRECEDENCE) -> list[CenteringState]:
    """One :class:`CenteringState` per sentence of ``doc``, in order."""
    states = []
    prev = None
    for s in doc.sentences:
        cf = rank_cf(doc, doc.sentence_mentions(s.index), prev, precedence)
        cb = identify_cb(cf, prev)
        state = CenteringState(s.index, cf, cb)
        state = CenteringState(s.index, cf, cb, classify_transition(prev, state))
        states.append(state)
        prev = state
    return states


def entity_centering_features(
    doc: Document, states: Sequence[CenteringState], cluster: EntityCluster
) -> EntityCenteringFeatures:
    """Aggregate Centering scores over every mention of ``cluster``.

    Each mention contributes its entity's Cf percentile, whether the entity
    is the Cb of that sentence, and that sentence's transition rank.
    """
    if not cluster.mention_ids:
        raise ValueError(f"entity {cluster.entity_id} has no mentions")
    by_index = {s.sentence_index: s for s in states}
    pct, is_cb, trans = [], [], []
    for m in doc.cluster_mentions(cluster.entity_id):
        si = doc.sentence_of(m.head)
        if si not in by_index:
            raise ValueError(f"no centering state for sentence {si} (mention {m.mention_id})")
        st = by_index[si]
        pct.append(st.rank_of(cluster.entity_id).rank_percentile)
        is_cb.append(st.cb == cluster.entity_id)
        trans.append(int(st.transition))
    n = len(pct)
    return EntityCenteringFeatures(
        mean_cf_percentile=sum(pct) / n,
        cb_proportion=sum(is_cb) / n,
        mean_transition=sum(trans) / n,
        min_transition=min(trans),
    )


def write_trace(docs, fh, states_by_doc=None):
    """Write per-sentence traces: doc_id, sentence_index, cb, transition, entity:rank..."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["doc_id", "sentence_index", "cb", "transition", "cf"])
    for d in docs:
        states = states_by_doc[d.doc_id] if states_by_doc else analyze_document(d)
        for st in states:
            row = [d.doc_id, st.sentence_index, st.cb or "", st.transition.name.lower()]
            row.extend(f"{e.entity_id}:{e.rank}" for e in st.cf_list)
            writer.writerow(row)
