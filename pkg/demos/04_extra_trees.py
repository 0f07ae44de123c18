"""
Extra-Trees importances and the genre shuffle
=============================================
"""

import numpy as np
import pandas as pd

from salience_lab import features, forest

rng = np.random.default_rng(1)
N = 1500
genre = rng.choice(["news", "fiction", "whow"], N)
signal = rng.standard_normal(N)
y = ((signal + 1.5 * (genre == "news")) > 0.5).astype(int)
cols = [features.ColumnSpec("signal", features.NUMERIC), features.ColumnSpec("noise", features.NUMERIC),
        features.ColumnSpec("genre", features.CATEGORICAL, ["news", "fiction", "whow"])]
data = pd.DataFrame({"row_id": np.arange(N), "doc_id": "sim", "genre": genre.astype(object), "partition": "train",
                     "n_summaries": 1, "signal": signal, "noise": rng.standard_normal(N), "salience": y})
table = features.FeatureTable("mention", data, cols, ["row_id", "doc_id", "genre", "partition", "n_summaries", "salience"])

model = forest.fit_forest(table, params=forest.ForestParams(trees=60), seed=0, threads=2)
print("train accuracy", forest.accuracy(model, table))

#%%
gini = forest.gini_importance(model)
mda = forest.permutation_mda(model, table, repeats=3, seed=0)
print(forest.importance_report(gini, mda))

#%%
# shuffle genre across rows and see which predictions cross 0.5
rep = forest.genre_shuffle_analysis(model, table, seed=0, top_k=3)
print(len(rep.flips), "of", len(table), "predictions flip")
print(rep.to_frame().head())
