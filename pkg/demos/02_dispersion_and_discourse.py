"""
Where entities sit: dispersion, positions and discourse depth
=============================================================
"""

import io
from importlib.resources import files

import numpy as np

from salience_lab import corpus, discourse, metrics

# a mention spread evenly over a 100-token document has zero divergence
even = [5 + 10 * i for i in range(10)]
bunched = [1, 3, 5, 10]
print("even   ", metrics.kl_dispersion(even, 100))
print("bunched", metrics.kl_dispersion(bunched, 100))
print("bunched, max-normalized", metrics.kl_dispersion(bunched, 100, metrics.DispersionConfig(normalization="max")))
print("bin sizes for 23 tokens:", metrics.bin_sizes(23, 10))

#%%
fixtures = files("salience_lab") / "data" / "fixtures"
docs, _ = corpus.ingest(str(fixtures))
news = next(d for d in docs if d.doc_id == "fix_news")
table = discourse.compute_depths(news.edus)
print("EDU depth:", dict(table.depth))
print("depth percentile:", {k: round(v, 3) for k, v in table.percentile.items()})
for c in news.clusters:
    print(c.entity_id, discourse.entity_discourse_features(c, news, table))

#%%
# relation-by-salience residuals pooled over the fixtures
labels, salient = [], []
for d in docs:
    t = discourse.compute_depths(d.edus)
    for m in d.mentions:
        labels.append(discourse.mention_discourse_features(m, d, t).relation_coarse)
        salient.append(d.cluster(m.entity_id).salience > 0)
rows, counts = discourse.salience_contingency(labels, np.array(salient))
res = discourse.relation_salience_residuals(counts, rows)
buf = io.StringIO()
res.write_csv(buf)
print(buf.getvalue())
