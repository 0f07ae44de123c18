"""
Correlations, effect sizes and family-wise intervals
====================================================
"""

import io

import numpy as np

from salience_lab import metrics, stats

rng = np.random.default_rng(2)
x = rng.standard_normal(300)
y = 0.4 * x + rng.standard_normal(300)
print("pearson ", stats.pearson(x, y))
print("spearman", stats.spearman(x, y))

t, p, g = stats.welch_t_hedges(rng.normal(1.0, 1, 80), rng.normal(1.5, 1.3, 120))
print(f"welch t={t:.3f} p={stats.format_p(p)} hedges g={g:.3f}")

#%%
# salience counts out of 5 for six groups; intervals widen with the number of groups compared
groups = {f"g{i}": rng.binomial(5, 0.2 + 0.1 * i, 50) for i in range(6)}
buf = io.StringIO()
stats.write_group_summaries(stats.adjusted_group_cis(groups), buf)
print(buf.getvalue())

#%%
a = rng.random(200) < 0.5
b = np.where(rng.random(200) < 0.85, a, ~a)
print("kappa", round(metrics.cohen_kappa(a, b), 4))
