"""
A 2-D map of mention profiles
=============================
"""

from importlib.resources import files

from salience_lab import corpus, embed, features

docs, _ = corpus.ingest(str(files("salience_lab") / "data" / "fixtures"))
table = features.build_mention_table(docs)
X, rows = embed.profile_matrix(table)
print(X.shape, "profile rows")

res = embed.tsne(X, embed.EmbedConfig(perplexity=5, iterations=500, seed=0))
print("KL by iteration:", [(i, round(kl, 4)) for i, kl in res.kl_trace][:: max(1, len(res.kl_trace) // 6)])

df = embed.embedding_frame(res.embedding, rows)
print(df.groupby(["modality", "salient"]).size())
