"""Graded entity salience from multilayer-annotated documents.

Submodules:

- ``corpus``: document model, JSON interchange, validation, salience labels
- ``centering``: Cf ranking, Cb and transitions per sentence
- ``discourse``: discourse depth and relation/salience residuals
- ``metrics``: dispersion, positions, cluster size, Cohen's kappa
- ``features``: mention and entity feature tables, encoding, scaling
- ``stats``: correlations, effect sizes, adjusted group intervals
- ``regression``: beta-binomial maximum likelihood and term deletions
- ``forest``: Extra-Trees with subset splits and importances
- ``embed``: exact t-SNE and mention profiles
"""

__version__ = "0.1.0"
