"""
Reading the bundled fixtures and tracing Centering transitions
==============================================================

Loads the six fixture documents, checks them against the structural
rules, labels graded salience from the summaries and prints the Cf
ranking sentence by sentence for the fiction document.
"""

from importlib.resources import files

from salience_lab import centering, corpus

fixtures = files("salience_lab") / "data" / "fixtures"
docs, report = corpus.ingest(str(fixtures))
for d in docs:
    print(d.doc_id, d.genre, d.partition, len(d.mentions), "mentions,", len(report[d.doc_id]), "violations")

# salience is the number of summaries (out of n) that mention the entity
fiction = next(d for d in docs if d.doc_id == "fix_fiction")
print({c.entity_id: c.salience for c in fiction.clusters})

#%%
# Cf lists, backward-looking centers and transitions
for state in centering.analyze_document(fiction):
    ranked = ", ".join(f"{e.entity_id}({e.rank})" for e in state.cf_list)
    print(state.sentence_index, state.transition.name.lower(), "cb =", state.cb, "|", ranked)

#%%
# entity-level summaries of the same trace
states = centering.analyze_document(fiction)
for c in fiction.clusters:
    print(c.entity_id, centering.entity_centering_features(fiction, states, c))
