"""Document model, interchange-format parsing and validation, salience targets.

Documents are read from a strict JSON interchange format (one object per
file) and turned into immutable, cross-linked :class:`Document` objects.
Structural problems that make a document unreadable (bad JSON, wrong
types, dangling or duplicate ids) raise :class:`CorpusError`; violations of
the softer type invariants are reported as data by
:func:`validate_document`.
"""

from __future__ import annotations

import bisect
import dataclasses
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

UPOS_TAGS = frozenset(
    {
        "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
        "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
    }
)
ENTITY_TYPES = (
    "person", "animal", "plant", "object", "place",
    "organization", "event", "time", "substance", "abstract",
)
INFO_STATUSES = ("given", "accessible", "new")
PARTITIONS = ("train", "dev", "test", "ood")

DOC_KEYS = {"doc_id", "genre", "partition", "sentences", "mentions", "entities", "edus", "summaries"}
TOKEN_KEYS = {"id", "form", "upos", "head", "deprel"}
MENTION_KEYS = {
    "mention_id", "entity_id", "start", "end", "head",
    "entity_type", "definite", "singular", "info_status",
}
ENTITY_KEYS = {"entity_id", "mentions"}
EDU_KEYS = {"id", "start", "end", "relation_coarse", "relation_fine", "parent", "explicit_dm"}
SUMMARY_KEYS = {"summary_id", "entities"}

DEFAULT_N_SUMMARIES = 5


class CorpusError(ValueError):
    """A document could not be read into a consistent :class:`Document`."""


class CorpusSyntaxError(CorpusError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class DanglingReferenceError(CorpusError):
    def __init__(self, kind, ref, where):
        self.kind = kind
        self.ref = ref
        super().__init__(f"dangling {kind} reference {ref!r} in {where}")


class DuplicateIdError(CorpusError):
    def __init__(self, kind, ref):
        self.kind = kind
        self.ref = ref
        super().__init__(f"duplicate {kind} id {ref!r}")


# --------------------------------------------------------------------------
# relation inventory


@dataclass(frozen=True)
class RelationInventory:
    """Closed set of coarse discourse relation labels.

    Fine labels such as ``joint-list`` are collapsed onto their top-level
    class by prefix; anything else falls back to ``fallback`` (if set).
    Parentless units that carry no relation use ``root_label``.
    """

    labels: tuple[str, ...]
    root_label: str = "root"
    fallback: str | None = "other"

    def __post_init__(self):
        if self.fallback is not None and self.fallback not in self.labels:
            raise ValueError(f"fallback label {self.fallback!r} not in inventory")

    def __contains__(self, label):
        return label in self.labels or label == self.root_label

    def coarsen(self, label: str) -> str:
        norm = label.strip().lower()
        if norm in self:
            return norm
        for sep in ("-", "_", ":"):
            head = norm.split(sep, 1)[0]
            if head in self:
                return head
        if self.fallback is None:
            raise CorpusError(f"relation label {label!r} not in inventory")
        return self.fallback

    @classmethod
    def from_dict(cls, obj):
        unknown = set(obj) - {"labels", "root_label", "fallback"}
        if unknown:
            raise ValueError(f"unknown inventory keys: {sorted(unknown)}")
        return cls(
            labels=tuple(str(x).lower() for x in obj["labels"]),
            root_label=obj.get("root_label", "root"),
            fallback=obj.get("fallback", "other"),
        )

    @classmethod
    def load(cls, path=None) -> "RelationInventory":
        """Load an inventory JSON file; ``None`` loads the bundled default."""
        if path is None:
            text = resources.files("salience_lab").joinpath("data/relations.json").read_text("utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Token:
    id: int
    form: str
    upos: str
    head: int
    deprel: str


@dataclass(frozen=True)
class Sentence:
    index: int
    start: int
    end: int

    @property
    def token_span(self):
        return (self.start, self.end)

    def __len__(self):
        return self.end - self.start + 1


@dataclass(frozen=True)
class Mention:
    mention_id: str
    entity_id: str
    start: int
    end: int
    head: int
    entity_type: str
    definite: bool
    singular: bool
    info_status: str

    @property
    def token_span(self):
        return (self.start, self.end)


@dataclass(frozen=True)
class EntityCluster:
    entity_id: str
    mention_ids: tuple[str, ...]
    salience: int | None = None

    @property
    def size(self):
        return len(self.mention_ids)


@dataclass(frozen=True)
class Edu:
    edu_id: int
    start: int
    end: int
    relation_coarse: str
    relation_fine: str
    parent: int | None
    explicit_dm: bool

    @property
    def token_span(self):
        return (self.start, self.end)


@dataclass(frozen=True)
class SummaryAlignment:
    summary_id: str
    mentioned_entities: frozenset[str]


@dataclass(frozen=True)
class Document:
    doc_id: str
    genre: str
    partition: str
    tokens: tuple[Token, ...]
    sentences: tuple[Sentence, ...]
    mentions: tuple[Mention, ...]
    clusters: tuple[EntityCluster, ...]
    edus: tuple[Edu, ...]
    summaries: tuple[SummaryAlignment, ...]

    @property
    def n_tokens(self):
        return len(self.tokens)

    @property
    def n_summaries(self):
        return len(self.summaries)

    @cached_property
    def _token_index(self):
        return {t.id: t for t in self.tokens}

    @cached_property
    def _mention_index(self):
        return {m.mention_id: m for m in self.mentions}

    @cached_property
    def _cluster_index(self):
        return {c.entity_id: c for c in self.clusters}

    @cached_property
    def _sentence_starts(self):
        return [s.start for s in self.sentences]

    @cached_property
    def _edus_by_start(self):
        return sorted(self.edus, key=lambda e: (e.start, e.end))

    @cached_property
    def _mentions_by_sentence(self):
        out = [[] for _ in self.sentences]
        for m in self.mentions:
            out[self.sentence_of(m.head)].append(m)
        return tuple(tuple(sorted(ms, key=lambda m: (m.start, m.end, m.mention_id))) for ms in out)

    def token(self, token_id: int) -> Token:
        return self._token_index[token_id]

    def mention(self, mention_id: str) -> Mention:
        return self._mention_index[mention_id]

    def cluster(self, entity_id: str) -> EntityCluster:
        return self._cluster_index[entity_id]

    def cluster_mentions(self, entity_id: str) -> list[Mention]:
        return [self._mention_index[mid] for mid in self._cluster_index[entity_id].mention_ids]

    def sentence_of(self, token_id: int) -> int:
        """Index of the sentence containing ``token_id``."""
        i = bisect.bisect_right(self._sentence_starts, token_id) - 1
        if i < 0 or token_id > self.sentences[i].end:
            raise KeyError(token_id)
        return i

    def sentence_mentions(self, index: int) -> tuple[Mention, ...]:
        """Mentions headed in sentence ``index``, in document order."""
        return self._mentions_by_sentence[index]

    def edu_of(self, token_id: int) -> Edu | None:
        """The EDU covering ``token_id`` (first by start if EDUs overlap)."""
        edus = self._edus_by_start
        i = bisect.bisect_right([e.start for e in edus], token_id) - 1
        while i >= 0:
            e = edus[i]
            if e.start <= token_id <= e.end:
                return e
            i -= 1
        return None

    def head_token(self, m: Mention) -> Token:
        return self._token_index[m.head]

    def is_pronominal(self, m: Mention) -> bool:
        return self.head_token(m).upos == "PRON"


# --------------------------------------------------------------------------
# parsing


def _obj(value, keys, path):
    if not isinstance(value, dict):
        raise CorpusSyntaxError("expected an object", field=path)
    got = set(value)
    unknown = got - keys
    if unknown:
        raise CorpusSyntaxError(f"unknown keys {sorted(unknown)}", field=path)
    missing = keys - got
    if missing:
        raise CorpusSyntaxError(f"missing keys {sorted(missing)}", field=path)
    return value


def _list(value, path):
    if not isinstance(value, list):
        raise CorpusSyntaxError("expected an array", field=path)
    return value


def _str(value, path):
    if not isinstance(value, str):
        raise CorpusSyntaxError(f"expected a string, got {value!r}", field=path)
    return value


def _int(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise CorpusSyntaxError(f"expected an integer, got {value!r}", field=path)
    return value


def _bool(value, path):
    if not isinstance(value, bool):
        raise CorpusSyntaxError(f"expected a boolean, got {value!r}", field=path)
    return value


def parse_document(text: str, inventory: RelationInventory | None = None) -> Document:
    """Parse one interchange-format JSON document.

    Parameters
    ----------
    text : str
        UTF-8 JSON text.
    inventory : RelationInventory, optional
        Used to collapse ``relation_coarse`` values onto the configured
        top-level labels. Defaults to the bundled inventory.

    Returns
    -------
    Document
        Fully cross-linked; cluster salience is left unset.

    Raises
    ------
    CorpusSyntaxError
        Malformed JSON (with line number) or a field of the wrong shape.
    DanglingReferenceError
        An id that refers to nothing.
    DuplicateIdError
        Two tokens, mentions, entities, EDUs or summaries share an id.
    """
    if inventory is None:
        inventory = RelationInventory.load()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorpusSyntaxError(exc.msg, line=exc.lineno) from exc
    raw = _obj(raw, DOC_KEYS, "$")
    doc_id = _str(raw["doc_id"], "doc_id")

    tokens = []
    sentences = []
    seen_tokens = set()
    for si, sent in enumerate(_list(raw["sentences"], "sentences")):
        spath = f"sentences[{si}]"
        sent = _list(sent, spath)
        if not sent:
            raise CorpusSyntaxError("empty sentence", field=spath)
        ids = []
        for ti, tok in enumerate(sent):
            tpath = f"{spath}[{ti}]"
            tok = _obj(tok, TOKEN_KEYS, tpath)
            t = Token(
                id=_int(tok["id"], tpath + ".id"),
                form=_str(tok["form"], tpath + ".form"),
                upos=_str(tok["upos"], tpath + ".upos"),
                head=_int(tok["head"], tpath + ".head"),
                deprel=_str(tok["deprel"], tpath + ".deprel"),
            )
            if t.id in seen_tokens:
                raise DuplicateIdError("token", t.id)
            seen_tokens.add(t.id)
            tokens.append(t)
            ids.append(t.id)
        sentences.append(Sentence(si, ids[0], ids[-1]))
    for t in tokens:
        if t.head != 0 and t.head not in seen_tokens:
            raise DanglingReferenceError("token", t.head, f"head of token {t.id}")

    entity_mentions = {}
    for ei, ent in enumerate(_list(raw["entities"], "entities")):
        epath = f"entities[{ei}]"
        ent = _obj(ent, ENTITY_KEYS, epath)
        eid = _str(ent["entity_id"], epath + ".entity_id")
        if eid in entity_mentions:
            raise DuplicateIdError("entity", eid)
        entity_mentions[eid] = [
            _str(x, f"{epath}.mentions[{j}]") for j, x in enumerate(_list(ent["mentions"], epath + ".mentions"))
        ]

    mentions = {}
    for mi, men in enumerate(_list(raw["mentions"], "mentions")):
        mpath = f"mentions[{mi}]"
        men = _obj(men, MENTION_KEYS, mpath)
        m = Mention(
            mention_id=_str(men["mention_id"], mpath + ".mention_id"),
            entity_id=_str(men["entity_id"], mpath + ".entity_id"),
            start=_int(men["start"], mpath + ".start"),
            end=_int(men["end"], mpath + ".end"),
            head=_int(men["head"], mpath + ".head"),
            entity_type=_str(men["entity_type"], mpath + ".entity_type"),
            definite=_bool(men["definite"], mpath + ".definite"),
            singular=_bool(men["singular"], mpath + ".singular"),
            info_status=_str(men["info_status"], mpath + ".info_status"),
        )
        if m.mention_id in mentions:
            raise DuplicateIdError("mention", m.mention_id)
        if m.entity_id not in entity_mentions:
            raise DanglingReferenceError("entity", m.entity_id, f"mention {m.mention_id}")
        for attr in ("start", "end", "head"):
            if getattr(m, attr) not in seen_tokens:
                raise DanglingReferenceError("token", getattr(m, attr), f"mention {m.mention_id}.{attr}")
        mentions[m.mention_id] = m

    clusters = []
    listed = set()
    for eid, mids in entity_mentions.items():
        for mid in mids:
            if mid not in mentions:
                raise DanglingReferenceError("mention", mid, f"entity {eid}")
            if mid in listed:
                raise DuplicateIdError("mention (in entity lists)", mid)
            if mentions[mid].entity_id != eid:
                raise CorpusError(
                    f"mention {mid} listed under entity {eid} but declares entity {mentions[mid].entity_id}"
                )
            listed.add(mid)
        ordered = sorted(mids, key=lambda mid: (mentions[mid].start, mentions[mid].end, mid))
        clusters.append(EntityCluster(eid, tuple(ordered)))
    unlisted = set(mentions) - listed
    if unlisted:
        mid = sorted(unlisted)[0]
        raise CorpusError(f"mention {mid} is not listed by its entity {mentions[mid].entity_id}")

    edus = []
    seen_edus = set()
    for ui, edu in enumerate(_list(raw["edus"], "edus")):
        upath = f"edus[{ui}]"
        edu = _obj(edu, EDU_KEYS, upath)
        parent = edu["parent"]
        if parent is not None:
            parent = _int(parent, upath + ".parent")
        e = Edu(
            edu_id=_int(edu["id"], upath + ".id"),
            start=_int(edu["start"], upath + ".start"),
            end=_int(edu["end"], upath + ".end"),
            relation_coarse=inventory.coarsen(_str(edu["relation_coarse"], upath + ".relation_coarse")),
            relation_fine=_str(edu["relation_fine"], upath + ".relation_fine"),
            parent=parent,
            explicit_dm=_bool(edu["explicit_dm"], upath + ".explicit_dm"),
        )
        if e.edu_id in seen_edus:
            raise DuplicateIdError("edu", e.edu_id)
        seen_edus.add(e.edu_id)
        for attr in ("start", "end"):
            if getattr(e, attr) not in seen_tokens:
                raise DanglingReferenceError("token", getattr(e, attr), f"edu {e.edu_id}.{attr}")
        edus.append(e)
    for e in edus:
        if e.parent is not None and e.parent not in seen_edus:
            raise DanglingReferenceError("edu", e.parent, f"parent of edu {e.edu_id}")

    summaries = []
    seen_summaries = set()
    for si, summ in enumerate(_list(raw["summaries"], "summaries")):
        spath = f"summaries[{si}]"
        summ = _obj(summ, SUMMARY_KEYS, spath)
        sid = _str(summ["summary_id"], spath + ".summary_id")
        if sid in seen_summaries:
            raise DuplicateIdError("summary", sid)
        seen_summaries.add(sid)
        ents = [_str(x, f"{spath}.entities[{j}]") for j, x in enumerate(_list(summ["entities"], spath + ".entities"))]
        for eid in ents:
            if eid not in entity_mentions:
                raise DanglingReferenceError("entity", eid, f"summary {sid}")
        summaries.append(SummaryAlignment(sid, frozenset(ents)))

    ordered_mentions = sorted(mentions.values(), key=lambda m: (m.start, m.end, m.mention_id))
    return Document(
        doc_id=doc_id,
        genre=_str(raw["genre"], "genre"),
        partition=_str(raw["partition"], "partition"),
        tokens=tuple(tokens),
        sentences=tuple(sentences),
        mentions=tuple(ordered_mentions),
        clusters=tuple(clusters),
        edus=tuple(edus),
        summaries=tuple(summaries),
    )


def document_to_dict(doc: Document) -> dict[str, Any]:
    tok_by_sent = []
    for s in doc.sentences:
        tok_by_sent.append(
            [dataclasses.asdict(doc.token(i)) for i in range(s.start, s.end + 1) if i in doc._token_index]
        )
    return {
        "doc_id": doc.doc_id,
        "genre": doc.genre,
        "partition": doc.partition,
        "sentences": tok_by_sent,
        "mentions": [dataclasses.asdict(m) for m in doc.mentions],
        "entities": [{"entity_id": c.entity_id, "mentions": list(c.mention_ids)} for c in doc.clusters],
        "edus": [
            {
                "id": e.edu_id,
                "start": e.start,
                "end": e.end,
                "relation_coarse": e.relation_coarse,
                "relation_fine": e.relation_fine,
                "parent": e.parent,
                "explicit_dm": e.explicit_dm,
            }
            for e in doc.edus
        ],
        "summaries": [
            {"summary_id": s.summary_id, "entities": sorted(s.mentioned_entities)} for s in doc.summaries
        ],
    }


def serialize_document(doc: Document) -> str:
    """Interchange-format JSON text for ``doc`` (salience is not stored)."""
    return json.dumps(document_to_dict(doc), indent=1, ensure_ascii=False) + "\n"


def read_document(path, inventory=None) -> Document:
    return parse_document(Path(path).read_text(encoding="utf-8"), inventory)


def load_corpus(directory, inventory=None, partitions: Iterable[str] | None = None, threads: int = 1):
    """Parse every ``*.json`` under ``directory``; returns documents sorted by id.

    Documents whose partition is not in ``partitions`` (when given) are skipped.
    """
    if inventory is None:
        inventory = RelationInventory.load()
    paths = sorted(Path(directory).glob("*.json"))
    if not paths:
        raise CorpusError(f"no *.json documents in {directory}")

    def _read(p):
        try:
            return parse_document(p.read_text(encoding="utf-8"), inventory)
        except CorpusError as exc:
            raise CorpusError(f"{p.name}: {exc}") from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            docs = list(pool.map(_read, paths))
    else:
        docs = [_read(p) for p in paths]
    if partitions is not None:
        keep = set(partitions)
        docs = [d for d in docs if d.partition in keep]
    return sorted(docs, key=lambda d: d.doc_id)


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    rule: str
    ids: tuple[str, ...]
    message: str

    def __str__(self):
        return f"{self.rule} [{', '.join(self.ids)}]: {self.message}"


def _edu_cycles(edus):
    parent = {e.edu_id: e.parent for e in edus}
    state = {}
    cycles = []
    for start in parent:
        path = []
        node = start
        while node is not None and node in parent and node not in state:
            state[node] = start
            path.append(node)
            node = parent[node]
        if node is not None and state.get(node) == start and node in path:
            cycles.append(tuple(path[path.index(node):]))
    return cycles


def validate_document(
    doc: Document,
    inventory: RelationInventory | None = None,
    n_summaries: int | None = None,
) -> list[Violation]:
    """Check every type invariant; returns an empty list iff all hold.

    ``n_summaries``, when given, is the number of summary alignments
    each document is expected to carry.
    """
    if inventory is None:
        inventory = RelationInventory.load()
    out = []

    def add(rule, ids, message):
        out.append(Violation(rule, tuple(str(i) for i in ids), message))

    if doc.n_tokens == 0:
        add("document_empty", [doc.doc_id], "document has no tokens")
    if doc.partition not in PARTITIONS:
        add("partition_unknown", [doc.doc_id], f"partition {doc.partition!r} not in {PARTITIONS}")

    expected = 1
    for s in doc.sentences:
        if s.start != expected:
            add("sentence_partition", [s.index], f"sentence starts at token {s.start}, expected {expected}")
        expected = s.end + 1
    ids = [t.id for t in doc.tokens]
    if ids != list(range(1, len(ids) + 1)):
        add("token_ids_consecutive", [doc.doc_id], "token ids must run 1..N in document order")

    sent_of = {}
    for s in doc.sentences:
        for i in range(s.start, s.end + 1):
            sent_of[i] = s.index
    for t in doc.tokens:
        if t.upos not in UPOS_TAGS:
            add("upos_unknown", [t.id], f"upos {t.upos!r} is not a Universal POS tag")
        if t.head != 0 and sent_of.get(t.head) != sent_of.get(t.id):
            add("head_outside_sentence", [t.id], f"head {t.head} lies outside the token's sentence")

    for m in doc.mentions:
        if m.start > m.end:
            add("mention_span_invalid", [m.mention_id], "start after end")
        if not (m.start <= m.head <= m.end):
            add("mention_head_outside_span", [m.mention_id], "head_token outside token_span")
        if sent_of.get(m.start) != sent_of.get(m.end):
            add("mention_crosses_sentence", [m.mention_id], "token_span crosses a sentence boundary")
        if m.entity_type not in ENTITY_TYPES:
            add("entity_type_unknown", [m.mention_id], f"entity_type {m.entity_type!r} not in closed set")
        if m.info_status not in INFO_STATUSES:
            add("info_status_unknown", [m.mention_id], f"info_status {m.info_status!r} not in {INFO_STATUSES}")
        if doc.edus and doc.edu_of(m.head) is None:
            add("mention_outside_edus", [m.mention_id], "head token not covered by any EDU")

    for c in doc.clusters:
        if not c.mention_ids:
            add("cluster_empty", [c.entity_id], "entity has no mentions")
        if c.salience is not None and not (0 <= c.salience <= doc.n_summaries):
            add("salience_out_of_range", [c.entity_id], f"salience {c.salience} outside 0..{doc.n_summaries}")

    if doc.edus:
        by_start = sorted(doc.edus, key=lambda e: (e.start, e.end, e.edu_id))
        for e in by_start:
            if e.start > e.end:
                add("edu_span_invalid", [e.edu_id], "start after end")
        covered = 1
        prev = None
        for e in by_start:
            if prev is not None and e.start <= prev.end:
                add("edu_overlap", [prev.edu_id, e.edu_id], f"EDUs {prev.edu_id} and {e.edu_id} overlap")
            elif e.start > covered:
                add("edu_gap", [e.edu_id], f"tokens {covered}..{e.start - 1} are not covered by any EDU")
            covered = max(covered, e.end + 1)
            prev = e if prev is None or e.end >= prev.end else prev
        if doc.n_tokens and covered <= doc.n_tokens:
            add("edu_gap", [by_start[-1].edu_id], f"tokens {covered}..{doc.n_tokens} are not covered by any EDU")
        if not any(e.parent is None for e in doc.edus):
            add("edu_no_root", [doc.doc_id], "discourse graph has no root unit")
        for cyc in _edu_cycles(doc.edus):
            add("edu_cycle", cyc, "parent edges form a cycle " + " -> ".join(map(str, cyc)))
        for e in doc.edus:
            if e.relation_coarse not in inventory:
                add("edu_relation_unknown", [e.edu_id], f"relation {e.relation_coarse!r} not in inventory")
            if e.parent is not None and e.relation_coarse == inventory.root_label:
                add("edu_root_label_misplaced", [e.edu_id], "non-root unit carries the root label")
            if e.explicit_dm and e.relation_coarse == inventory.root_label:
                add("edu_explicit_dm_on_root", [e.edu_id], "explicit_dm set on a unit without a relation")

    if n_summaries is not None and doc.n_summaries != n_summaries:
        add("summary_count", [doc.doc_id], f"{doc.n_summaries} summaries, expected {n_summaries}")
    return out


# --------------------------------------------------------------------------
# salience


def assign_salience(doc: Document) -> Document:
    """Return a copy of ``doc`` with each cluster's salience set.

    Salience is the number of summary alignments that mention the entity,
    so it ranges over ``0..doc.n_summaries``.
    """
    counts = {c.entity_id: 0 for c in doc.clusters}
    for s in doc.summaries:
        for eid in s.mentioned_entities:
            counts[eid] += 1
    clusters = tuple(dataclasses.replace(c, salience=counts[c.entity_id]) for c in doc.clusters)
    return dataclasses.replace(doc, clusters=clusters)


def ingest(directory, inventory=None, partitions=None, n_summaries=None, threads=1):
    """Parse, validate and assign salience for a corpus directory.

    Returns ``(documents, violations)`` where ``violations`` maps doc_id to
    its (possibly empty) violation list.
    """
    if inventory is None:
        inventory = RelationInventory.load()
    docs = load_corpus(directory, inventory, partitions, threads)
    report = {d.doc_id: validate_document(d, inventory, n_summaries) for d in docs}
    return [assign_salience(d) for d in docs], report
