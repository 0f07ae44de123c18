"""Regenerate the bundled fixture corpus in src/salience_lab/data/fixtures/.

Sentences are written as ``form/UPOS/head/deprel`` tokens with heads local to
the sentence. Mentions and EDUs use sentence-local token positions; the
builder converts everything to document-global ids. Definiteness and
information status get defaults (pronouns, names and determiners like "the"
are definite; first mentions are new, later ones given) unless overridden.
"""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "salience_lab" / "data" / "fixtures"
DEFINITE_STARTS = {"the", "this", "that", "these", "those", "its", "their", "his", "her", "my", "your", "our"}


class Doc:
    def __init__(self, doc_id, genre, partition):
        self.doc_id, self.genre, self.partition = doc_id, genre, partition
        self.sents = []
        self.offsets = []
        self.mentions = []
        self.edus = []
        self.summaries = []

    def sent(self, text):
        offset = sum(len(s) for s in self.sents)
        toks = []
        for i, item in enumerate(text.split()):
            form, upos, head, deprel = item.rsplit("/", 3)
            head = int(head)
            toks.append({"id": offset + i + 1, "form": form, "upos": upos,
                         "head": 0 if head == 0 else offset + head, "deprel": deprel})
        self.sents.append(toks)
        self.offsets.append(offset)
        return self

    def ment(self, eid, s, start, end, head, etype, singular=True, definite=None, info=None):
        off = self.offsets[s]
        toks = self.sents[s]
        if definite is None:
            h = toks[head - 1]
            definite = h["upos"] in ("PRON", "PROPN") or toks[start - 1]["form"].lower() in DEFINITE_STARTS
        self.mentions.append({
            "eid": eid, "start": off + start, "end": off + end, "head": off + head,
            "entity_type": etype, "definite": definite, "singular": singular, "info": info,
        })
        return self

    def edu(self, s, start, end, rel, fine, parent, dm=False):
        off = self.offsets[s]
        self.edus.append({"id": len(self.edus) + 1, "start": off + start, "end": off + end,
                          "relation_coarse": rel, "relation_fine": fine, "parent": parent, "explicit_dm": dm})
        return self

    def summ(self, *groups):
        for i, g in enumerate(groups):
            self.summaries.append({"summary_id": f"s{i + 1}", "entities": sorted(g.split())})
        return self

    def to_json(self):
        mentions = []
        seen = set()
        order = sorted(range(len(self.mentions)), key=lambda i: (self.mentions[i]["start"], self.mentions[i]["end"]))
        by_entity = {}
        for n, i in enumerate(order):
            m = self.mentions[i]
            mid = f"m{n + 1}"
            info = m["info"] or ("given" if m["eid"] in seen else "new")
            seen.add(m["eid"])
            by_entity.setdefault(m["eid"], []).append(mid)
            mentions.append({
                "mention_id": mid, "entity_id": m["eid"], "start": m["start"], "end": m["end"],
                "head": m["head"], "entity_type": m["entity_type"], "definite": m["definite"],
                "singular": m["singular"], "info_status": info,
            })
        return {
            "doc_id": self.doc_id,
            "genre": self.genre,
            "partition": self.partition,
            "sentences": self.sents,
            "mentions": mentions,
            "entities": [{"entity_id": e, "mentions": ms} for e, ms in sorted(by_entity.items())],
            "edus": self.edus,
            "summaries": self.summaries,
        }


def fiction():
    d = Doc("fix_fiction", "fiction", "train")
    d.sent("Susan/PROPN/2/nsubj gave/VERB/0/root Betsy/PROPN/2/iobj a/DET/6/det pet/NOUN/6/compound "
           "hamster/NOUN/2/obj ./PUNCT/2/punct")
    d.ment("susan", 0, 1, 1, 1, "person").ment("betsy", 0, 3, 3, 3, "person").ment("hamster", 0, 4, 6, 6, "animal")
    d.sent("She/PRON/2/nsubj asked/VERB/0/root whether/SCONJ/5/mark Betsy/PROPN/5/nsubj liked/VERB/2/ccomp "
           "the/DET/7/det gift/NOUN/5/obj ./PUNCT/2/punct")
    d.ment("susan", 1, 1, 1, 1, "person").ment("betsy", 1, 4, 4, 4, "person").ment("hamster", 1, 6, 7, 7, "animal")
    d.sent("Betsy/PROPN/2/nsubj loved/VERB/0/root the/DET/5/det little/ADJ/5/amod animal/NOUN/2/obj ./PUNCT/2/punct")
    d.ment("betsy", 2, 1, 1, 1, "person").ment("hamster", 2, 3, 5, 5, "animal")
    d.sent("She/PRON/2/nsubj named/VERB/0/root it/PRON/2/obj Fluffy/PROPN/2/xcomp after/ADP/7/case "
           "her/PRON/7/nmod:poss grandmother/NOUN/2/obl ./PUNCT/2/punct")
    d.ment("betsy", 3, 1, 1, 1, "person").ment("hamster", 3, 3, 3, 3, "animal")
    d.ment("betsy", 3, 6, 6, 6, "person").ment("grandma", 3, 6, 7, 7, "person")
    d.sent("The/DET/2/det hamster/NOUN/3/nsubj slept/VERB/0/root in/ADP/6/case a/DET/6/det box/NOUN/3/obl "
           "in/ADP/9/case the/DET/9/det kitchen/NOUN/6/nmod ./PUNCT/3/punct")
    d.ment("hamster", 4, 1, 2, 2, "animal").ment("box", 4, 5, 9, 6, "object")
    d.ment("kitchen", 4, 8, 9, 9, "place", info="accessible")
    d.edu(0, 1, 7, "root", "root", None)
    d.edu(1, 1, 2, "attribution", "attribution-positive", 3)
    d.edu(1, 3, 8, "joint", "joint-sequence", 1)
    d.edu(2, 1, 6, "elaboration", "elaboration-additional", 1)
    d.edu(3, 1, 4, "joint", "joint-sequence", 4)
    d.edu(3, 5, 8, "explanation", "explanation-motivation", 5, dm=True)
    d.edu(4, 1, 10, "context", "context-circumstance", 5)
    d.summ("susan betsy hamster", "susan betsy hamster", "betsy hamster", "susan hamster", "betsy hamster grandma")
    return d


def news():
    d = Doc("fix_news", "news", "train")
    d.sent("Fishermen/NOUN/2/nsubj rescued/VERB/0/root 700/NUM/5/nummod asylum/NOUN/5/compound "
           "seekers/NOUN/2/obj off/ADP/7/case Aceh/PROPN/2/obl ./PUNCT/2/punct")
    d.ment("fishermen", 0, 1, 1, 1, "person", singular=False)
    d.ment("seekers", 0, 3, 5, 5, "person", singular=False).ment("aceh", 0, 7, 7, 7, "place")
    d.sent("Their/PRON/2/nmod:poss boat/NOUN/3/nsubj sank/VERB/0/root ,/PUNCT/8/punct and/CCONJ/8/cc "
           "the/DET/7/det navy/NOUN/8/nsubj rescued/VERB/3/conj 200/NUM/10/nummod more/ADJ/8/obj ./PUNCT/3/punct")
    d.ment("seekers", 1, 1, 1, 1, "person", singular=False).ment("boat", 1, 1, 2, 2, "object")
    d.ment("navy", 1, 6, 7, 7, "organization", info="accessible")
    d.ment("seekers", 1, 9, 10, 10, "person", singular=False)
    d.sent("Officials/NOUN/2/nsubj said/VERB/0/root the/DET/4/det seekers/NOUN/6/nsubj were/AUX/6/cop "
           "tired/ADJ/2/ccomp ./PUNCT/2/punct")
    d.ment("officials", 2, 1, 1, 1, "person", singular=False).ment("seekers", 2, 3, 4, 4, "person", singular=False)
    d.sent("They/PRON/3/nsubj will/AUX/3/aux stay/VERB/0/root in/ADP/5/case Aceh/PROPN/3/obl ./PUNCT/3/punct")
    d.ment("seekers", 3, 1, 1, 1, "person", singular=False).ment("aceh", 3, 5, 5, 5, "place")
    d.edu(0, 1, 8, "joint", "joint-list", None)
    d.edu(1, 1, 4, "elaboration", "elaboration-additional", 1)
    d.edu(1, 5, 11, "joint", "joint-list", None, dm=True)
    d.edu(2, 1, 2, "attribution", "attribution-positive", 5)
    d.edu(2, 3, 7, "elaboration", "elaboration-additional", 3)
    d.edu(3, 1, 6, "elaboration", "elaboration-additional", 5)
    d.summ("fishermen seekers navy aceh", "seekers navy", "seekers aceh fishermen navy", "seekers boat",
           "seekers navy fishermen")
    return d


def conversation():
    d = Doc("fix_conversation", "conversation", "train")
    d.sent("I/PRON/2/nsubj saw/VERB/0/root this/DET/4/det guy/NOUN/2/obj Nierman/PROPN/4/appos ./PUNCT/2/punct")
    d.ment("speaker", 0, 1, 1, 1, "person").ment("nierman", 0, 3, 5, 4, "person")
    d.sent("I/PRON/3/nsubj never/ADV/3/advmod heard/VERB/0/root of/ADP/5/case him/PRON/3/obl at/ADP/8/case "
           "that/DET/8/det time/NOUN/3/obl ./PUNCT/3/punct")
    d.ment("speaker", 1, 1, 1, 1, "person").ment("nierman", 1, 5, 5, 5, "person").ment("then", 1, 7, 8, 8, "time")
    d.sent("He/PRON/2/nsubj sold/VERB/0/root me/PRON/2/iobj a/DET/5/det car/NOUN/2/obj ./PUNCT/2/punct")
    d.ment("nierman", 2, 1, 1, 1, "person").ment("speaker", 2, 3, 3, 3, "person").ment("car", 2, 4, 5, 5, "object")
    d.sent("The/DET/2/det car/NOUN/3/nsubj broke/VERB/0/root down/ADP/3/compound:prt when/SCONJ/7/mark "
           "I/PRON/7/nsubj drove/VERB/3/advcl it/PRON/7/obj home/ADV/7/advmod ./PUNCT/3/punct")
    d.ment("car", 3, 1, 2, 2, "object").ment("speaker", 3, 6, 6, 6, "person").ment("car", 3, 8, 8, 8, "object")
    d.ment("home", 3, 9, 9, 9, "place", definite=True, info="accessible")
    d.edu(0, 1, 6, "root", "root", None)
    d.edu(1, 1, 9, "context", "context-background", 1)
    d.edu(2, 1, 6, "joint", "joint-sequence", 1)
    d.edu(3, 1, 4, "joint", "joint-sequence", 3)
    d.edu(3, 5, 10, "context", "context-circumstance", 4, dm=True)
    d.summ("speaker nierman car", "speaker nierman", "nierman car", "speaker nierman car", "speaker car")
    return d


def whow():
    d = Doc("fix_whow", "whow", "dev")
    d.sent("Baking/VERB/0/root Bread/NOUN/1/obj")
    d.ment("bread", 0, 2, 2, 2, "substance")
    d.sent("Mix/VERB/0/root the/DET/3/det flour/NOUN/1/obj with/ADP/6/case warm/ADJ/6/amod water/NOUN/1/obl "
           "./PUNCT/1/punct")
    d.ment("flour", 1, 2, 3, 3, "substance").ment("water", 1, 5, 6, 6, "substance")
    d.sent("You/PRON/3/nsubj should/AUX/3/aux knead/VERB/0/root the/DET/5/det dough/NOUN/3/obj for/ADP/8/case "
           "ten/NUM/8/nummod minutes/NOUN/3/obl ./PUNCT/3/punct")
    d.ment("you", 2, 1, 1, 1, "person").ment("dough", 2, 4, 5, 5, "substance", info="accessible")
    d.ment("minutes", 2, 7, 8, 8, "time", singular=False)
    d.sent("Then/ADV/2/advmod bake/VERB/0/root it/PRON/2/obj until/SCONJ/7/mark it/PRON/7/nsubj is/AUX/7/cop "
           "golden/ADJ/2/advcl ./PUNCT/2/punct")
    d.ment("dough", 3, 3, 3, 3, "substance").ment("dough", 3, 5, 5, 5, "substance")
    d.edu(0, 1, 2, "organization", "organization-heading", 2)
    d.edu(1, 1, 7, "root", "root", None)
    d.edu(2, 1, 9, "joint", "joint-sequence", 2)
    d.edu(3, 1, 3, "joint", "joint-sequence", 3, dm=True)
    d.edu(3, 4, 8, "context", "context-circumstance", 4, dm=True)
    d.summ("bread dough flour", "bread flour water", "bread dough", "bread", "bread dough you")
    return d


def academic():
    d = Doc("fix_academic", "academic", "test")
    d.sent("This/DET/2/det paper/NOUN/3/nsubj studies/VERB/0/root discrimination/NOUN/3/obj in/ADP/8/case "
           "a/DET/8/det large/ADJ/8/amod sample/NOUN/4/nmod ./PUNCT/3/punct")
    d.ment("paper", 0, 1, 2, 2, "object").ment("discrimination", 0, 4, 4, 4, "abstract")
    d.ment("sample", 0, 6, 8, 8, "abstract")
    d.sent("Perceived/VERB/2/amod discrimination/NOUN/3/nsubj predicts/VERB/0/root poor/ADJ/5/amod "
           "health/NOUN/3/obj ./PUNCT/3/punct")
    d.ment("discrimination", 1, 1, 2, 2, "abstract").ment("health", 1, 4, 5, 5, "abstract")
    d.sent("We/PRON/2/nsubj measured/VERB/0/root it/PRON/2/obj with/ADP/6/case a/DET/6/det survey/NOUN/2/obl "
           "because/SCONJ/10/mark it/PRON/10/nsubj is/AUX/10/cop reliable/ADJ/2/advcl ./PUNCT/2/punct")
    d.ment("we", 2, 1, 1, 1, "person", singular=False).ment("discrimination", 2, 3, 3, 3, "abstract")
    d.ment("survey", 2, 5, 6, 6, "object").ment("survey", 2, 8, 8, 8, "object")
    d.sent("The/DET/2/det sample/NOUN/3/nsubj included/VERB/0/root 500/NUM/5/nummod adults/NOUN/3/obj "
           "./PUNCT/3/punct")
    d.ment("sample", 3, 1, 2, 2, "abstract").ment("adults", 3, 4, 5, 5, "person", singular=False)
    d.edu(0, 1, 9, "root", "root", None)
    d.edu(1, 1, 6, "elaboration", "elaboration-additional", 1)
    d.edu(2, 1, 6, "elaboration", "elaboration-additional", 1)
    d.edu(2, 7, 11, "explanation", "explanation-justify", 3, dm=True)
    d.edu(3, 1, 6, "elaboration", "elaboration-additional", 3)
    d.summ("discrimination health", "discrimination paper sample", "discrimination health survey",
           "discrimination", "discrimination health we")
    return d


def poetry():
    d = Doc("fix_poetry", "poetry", "ood")
    d.sent("The/DET/2/det moon/NOUN/3/nsubj rose/VERB/0/root over/ADP/7/case the/DET/7/det quiet/ADJ/7/amod "
           "sea/NOUN/3/obl ./PUNCT/3/punct")
    d.ment("moon", 0, 1, 2, 2, "object").ment("sea", 0, 5, 7, 7, "place")
    d.sent("Its/PRON/2/nmod:poss light/NOUN/3/nsubj touched/VERB/0/root the/DET/5/det waves/NOUN/3/obj "
           "./PUNCT/3/punct")
    d.ment("moon", 1, 1, 1, 1, "object").ment("light", 1, 1, 2, 2, "abstract")
    d.ment("waves", 1, 4, 5, 5, "object", singular=False, info="accessible")
    d.sent("A/DET/2/det sailor/NOUN/3/nsubj watched/VERB/0/root it/PRON/3/obj and/CCONJ/6/cc sang/VERB/3/conj "
           "./PUNCT/3/punct")
    d.ment("sailor", 2, 1, 2, 2, "person").ment("moon", 2, 4, 4, 4, "object")
    d.sent("He/PRON/2/nsubj sang/VERB/0/root of/ADP/5/case the/DET/5/det moon/NOUN/2/obl ./PUNCT/2/punct")
    d.ment("sailor", 3, 1, 1, 1, "person").ment("moon", 3, 4, 5, 5, "object")
    d.edu(0, 1, 8, "root", "root", None)
    d.edu(1, 1, 6, "elaboration", "elaboration-additional", 1)
    d.edu(2, 1, 4, "joint", "joint-sequence", 1)
    d.edu(2, 5, 7, "joint", "joint-sequence", 3, dm=True)
    d.edu(3, 1, 6, "elaboration", "elaboration-additional", 4)
    d.summ("moon sea sailor", "moon sailor", "moon light", "moon sea", "moon sailor waves")
    return d


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for build in (fiction, news, conversation, whow, academic, poetry):
        d = build()
        path = OUT / f"{d.doc_id}.json"
        path.write_text(json.dumps(d.to_json(), indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
        print("wrote", path)


if __name__ == "__main__":
    main()
