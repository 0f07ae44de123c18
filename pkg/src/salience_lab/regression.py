"""Beta-binomial regression of salience counts.

Each observation is a count ``k`` out of ``n`` trials (the number of
summaries). The mean is ``mu = expit(X @ beta)`` and overdispersion is
``phi >= 0`` with intra-class correlation ``rho = phi / (1 + phi)``; in
Beta(a, b) terms, ``a = mu / phi`` and ``b = (1 - mu) / phi``, so ``phi = 0``
is the binomial.

For integer ``n`` the log-gamma ratios of the beta-binomial mass telescope
into finite products::

    log P(k) = log C(n, k) + sum_{j<k} log(mu + j phi)
               + sum_{j<n-k} log(1 - mu + j phi) - sum_{j<n} log(1 + j phi)

which is exact and stays accurate as ``phi -> 0``, where the log-gamma form
loses all precision. Dispersion is optimized on the log scale.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.special import expit, gammaln
from scipy.stats import chi2

from .features import CATEGORICAL, FeatureTable, write_frame

INTERCEPT = "(Intercept)"


class RegressionError(RuntimeError):
    pass


class RankDeficiencyError(RegressionError):
    def __init__(self, aliased):
        self.aliased = list(aliased)
        super().__init__(f"design matrix is rank deficient; aliased columns: {', '.join(self.aliased)}")


class ConvergenceError(RegressionError):
    def __init__(self, message, grad_norm=None, term=None):
        self.grad_norm = grad_norm
        self.term = term
        super().__init__(message)


class SeparationError(RegressionError):
    pass


class SchemaError(ValueError):
    pass


# --------------------------------------------------------------------------
# design matrices


@dataclass
class Design:
    """Treatment-coded design for a list of terms.

    Categorical terms use their most frequent level (in the fitting data)
    as reference; unseen levels at prediction time encode as the
    reference.
    """

    terms: list[str]
    kinds: dict[str, str]
    levels: dict[str, list[str]] = field(default_factory=dict)

    @classmethod
    def build(cls, table: FeatureTable, terms: Sequence[str]) -> "Design":
        kinds, levels = {}, {}
        for t in terms:
            try:
                spec = table.spec(t)
            except KeyError:
                raise SchemaError(f"term {t!r} is not a column of the table") from None
            kinds[t] = spec.kind
            if spec.kind == CATEGORICAL:
                counts = table.data[t].value_counts()
                levels[t] = sorted(counts.index, key=lambda v: (-counts[v], v))
        return cls(list(terms), kinds, levels)

    def term_columns(self, term) -> list[str]:
        if self.kinds[term] == CATEGORICAL:
            return [f"{term}[{lev}]" for lev in self.levels[term][1:]]
        return [term]

    @property
    def columns(self) -> list[str]:
        out = [INTERCEPT]
        for t in self.terms:
            out.extend(self.term_columns(t))
        return out

    def matrix(self, table: FeatureTable) -> np.ndarray:
        n = len(table)
        blocks = [np.ones((n, 1))]
        for t in self.terms:
            if t not in table.data:
                raise SchemaError(f"table has no column {t!r}")
            col = table.data[t]
            if self.kinds[t] == CATEGORICAL:
                vals = col.astype(str).to_numpy()
                lev = self.levels[t][1:]
                blocks.append((vals[:, None] == np.asarray(lev, dtype=object)[None, :]).astype(float)
                              if lev else np.zeros((n, 0)))
            else:
                blocks.append(col.to_numpy(dtype=float)[:, None])
        return np.hstack(blocks)

    def drop(self, term) -> "Design":
        return Design([t for t in self.terms if t != term], dict(self.kinds),
                      {k: v for k, v in self.levels.items() if k != term})

    def to_dict(self):
        return {"terms": self.terms, "kinds": self.kinds, "levels": self.levels}

    @classmethod
    def from_dict(cls, obj):
        return cls(list(obj["terms"]), dict(obj["kinds"]), {k: list(v) for k, v in obj["levels"].items()})


def aliased_columns(X: np.ndarray, names: Sequence[str], tol: float = 1e-7) -> list[str]:
    """Columns left over after a pivoted QR determines the numerical rank."""
    if X.shape[1] == 0:
        return []
    _, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0:
        return list(names)
    rank = int(np.sum(d > tol * d[0]))
    return sorted(names[i] for i in piv[rank:])


# --------------------------------------------------------------------------
# likelihood


def _pieces(mu, mu_c, phi, k, n):
    """Log-likelihood terms and first/second derivatives in (mu, phi) per row."""
    ll = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    d_mu = np.zeros_like(mu)
    d_phi = np.zeros_like(mu)
    d_mumu = np.zeros_like(mu)
    d_muphi = np.zeros_like(mu)
    d_phiphi = np.zeros_like(mu)
    nmax = int(n.max()) if n.size else 0
    for j in range(nmax):
        a = mu + j * phi
        b = mu_c + j * phi
        c = 1.0 + j * phi
        ma = j < k
        mb = j < n - k
        mc = j < n
        if ma.any():
            aa = a[ma]
            ll[ma] += np.log(aa)
            d_mu[ma] += 1 / aa
            d_phi[ma] += j / aa
            d_mumu[ma] -= 1 / aa**2
            d_muphi[ma] -= j / aa**2
            d_phiphi[ma] -= j * j / aa**2
        if mb.any():
            bb = b[mb]
            ll[mb] += np.log(bb)
            d_mu[mb] -= 1 / bb
            d_phi[mb] += j / bb
            d_mumu[mb] -= 1 / bb**2
            d_muphi[mb] += j / bb**2
            d_phiphi[mb] -= j * j / bb**2
        if j > 0 and mc.any():
            ll[mc] -= math.log(c)
            d_phi[mc] -= j / c
            d_phiphi[mc] += j * j / c**2
    return ll, d_mu, d_phi, d_mumu, d_muphi, d_phiphi


def betabinom_logpmf(k, n, mu, phi):
    """Beta-binomial log mass in the mean/dispersion parameterization."""
    k = np.asarray(k, dtype=float)
    n = np.broadcast_to(np.asarray(n, dtype=float), k.shape)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), k.shape)
    return _pieces(mu, 1 - mu, float(phi), k, n)[0]


def _unpack(params, fixed_phi):
    params = np.asarray(params, dtype=float)
    if fixed_phi is None:
        return params[:-1], float(np.exp(params[-1]))
    return params, float(fixed_phi)


def loglik_and_gradient(params, X, k, n, fixed_phi=None, hessian=False):
    """Total log-likelihood and its gradient.

    Parameters
    ----------
    params : ndarray
        ``beta`` followed by ``log(phi)``; when ``fixed_phi`` is given,
        just ``beta``.
    X : ndarray, shape (N, p)
    k, n : ndarray, shape (N,)
        Successes and trials.
    hessian : bool
        Also return the analytic Hessian (used to seed the optimizer).
    """
    beta, phi = _unpack(params, fixed_phi)
    eta = X @ beta
    mu = expit(eta)
    mu_c = expit(-eta)
    ll, d_mu, d_phi, d_mumu, d_muphi, d_phiphi = _pieces(mu, mu_c, phi, k, n)
    w = mu * mu_c
    g_beta = X.T @ (d_mu * w)
    if fixed_phi is None:
        grad = np.append(g_beta, phi * d_phi.sum())
    else:
        grad = g_beta
    total = float(ll.sum())
    if not hessian:
        return total, grad
    d_eta2 = d_mumu * w * w + d_mu * w * (mu_c - mu)
    H_bb = (X * d_eta2[:, None]).T @ X
    if fixed_phi is None:
        h_bt = X.T @ (d_muphi * w) * phi
        h_tt = phi * phi * d_phiphi.sum() + phi * d_phi.sum()
        H = np.block([[H_bb, h_bt[:, None]], [h_bt[None, :], np.array([[h_tt]])]])
    else:
        H = H_bb
    return total, grad, H


# --------------------------------------------------------------------------
# optimizer


@dataclass
class OptimResult:
    x: np.ndarray
    loglik: float
    grad: np.ndarray
    iterations: int
    converged: bool
    trace: list[float]

    @property
    def grad_norm(self):
        return float(np.max(np.abs(self.grad))) if self.grad.size else 0.0


def _initial_inverse_hessian(fg_hess, x):
    _, _, H = fg_hess(x)
    B = -H
    try:
        np.linalg.cholesky(B)
        return np.linalg.inv(B)
    except np.linalg.LinAlgError:
        d = np.abs(np.diag(B))
        d[d < 1e-8] = 1.0
        return np.diag(1.0 / d)


def _safe_eval(fg, x):
    # trial points far out in log(phi) can overflow; reject them instead
    try:
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return fg(x)
    except (OverflowError, FloatingPointError):
        return -math.inf, np.full(np.shape(x), np.nan)


def bfgs_maximize(fg, x0, fg_hess=None, gtol=1e-6, max_iter=500, guard=None, max_step=5.0):
    """Maximize with BFGS and a backtracking (Armijo) line search.

    The log-likelihood trace is non-decreasing up to round-off. Trial
    steps are capped at ``max_step`` in every coordinate. Once ``f`` no
    longer resolves progress, steps are accepted on gradient decrease and
    the analytic Hessian replaces the secant estimate. When the line
    search cannot make progress the inverse-Hessian estimate is reset
    from the analytic Hessian once before giving up.
    """
    x = np.array(x0, dtype=float)
    f, g = fg(x)
    Hinv = _initial_inverse_hessian(fg_hess, x) if fg_hess else np.eye(x.size)
    trace = [f]
    it = 0
    reset_used = False
    while it < max_iter:
        if np.max(np.abs(g)) < gtol:
            return OptimResult(x, f, g, it, True, trace)
        p = Hinv @ g
        slope = g @ p
        if not slope > 0:
            Hinv = _initial_inverse_hessian(fg_hess, x) if fg_hess else np.eye(x.size)
            p = Hinv @ g
            slope = g @ p
        t = min(1.0, max_step / max(float(np.max(np.abs(p))), 1e-300))
        accepted = False
        for _ in range(60):
            x_new = x + t * p
            f_new, g_new = _safe_eval(fg, x_new)
            if np.isfinite(f_new) and np.all(np.isfinite(g_new)):
                flat = abs(f_new - f) <= 1e-13 * max(1.0, abs(f))
                if f_new >= f + 1e-4 * t * slope and not flat:
                    accepted = True
                    break
                # near the optimum f stops resolving; accept a flat step that shrinks the gradient
                if flat and np.max(np.abs(g_new)) < np.max(np.abs(g)):
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            if fg_hess and not reset_used:
                Hinv = _initial_inverse_hessian(fg_hess, x)
                reset_used = True
                continue
            return OptimResult(x, f, g, it, False, trace)
        it += 1
        s = x_new - x
        y = g - g_new
        sy = s @ y
        x, f, g = x_new, f_new, g_new
        trace.append(f)
        if guard is not None:
            guard(x)
        if flat and fg_hess:
            # secant pairs are pure round-off here; polish with Newton steps
            Hinv = _initial_inverse_hessian(fg_hess, x)
        elif sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            rho = 1.0 / sy
            Hy = Hinv @ y
            Hinv = Hinv - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * (y @ Hy) + rho) * np.outer(s, s)
    converged = bool(np.max(np.abs(g)) < gtol)
    return OptimResult(x, f, g, it, converged, trace)


# --------------------------------------------------------------------------
# model


@dataclass
class BetaBinomialModel:
    design: Design
    beta: np.ndarray
    phi: float
    n_trials: int
    loglik: float
    n_obs: int
    iterations: int = 0
    grad_norm: float = 0.0
    converged: bool = True
    fixed_phi: bool = False
    trace: list[float] = field(default_factory=list)
    schema_hash: str = ""

    @property
    def terms(self):
        return self.design.terms

    @property
    def coefficients(self) -> dict[str, float]:
        return dict(zip(self.design.columns, map(float, self.beta)))

    @property
    def n_params(self) -> int:
        return len(self.beta) + (0 if self.fixed_phi else 1)

    @property
    def aic(self) -> float:
        return 2 * self.n_params - 2 * self.loglik

    @property
    def rho(self):
        return self.phi / (1 + self.phi)

    def predict_mu(self, table: FeatureTable) -> np.ndarray:
        return expit(self.design.matrix(table) @ self.beta)

    def predict_expected(self, table: FeatureTable) -> np.ndarray:
        return self.n_trials * self.predict_mu(table)

    def prob_positive(self, table: FeatureTable) -> np.ndarray:
        """P(score > 0) under the fitted beta-binomial."""
        eta = self.design.matrix(table) @ self.beta
        k = np.zeros_like(eta)
        with np.errstate(divide="ignore"):
            ll0 = _pieces(expit(eta), expit(-eta), float(self.phi), k, np.full_like(eta, self.n_trials))[0]
        return 1 - np.exp(ll0)

    def to_dict(self, preprocessor=None):
        return {
            "kind": "beta_binomial",
            "terms": self.terms,
            "design": self.design.to_dict(),
            "coefficients": self.coefficients,
            "phi": self.phi,
            "fixed_phi": self.fixed_phi,
            "n_trials": self.n_trials,
            "loglik": self.loglik,
            "aic": self.aic,
            "n_obs": self.n_obs,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "converged": self.converged,
            "schema_hash": self.schema_hash,
            "scaling": preprocessor.to_dict() if preprocessor is not None else None,
        }

    @classmethod
    def from_dict(cls, obj):
        design = Design.from_dict(obj["design"])
        beta = np.array([obj["coefficients"][c] for c in design.columns])
        return cls(design, beta, obj["phi"], obj["n_trials"], obj["loglik"], obj["n_obs"],
                   obj["iterations"], obj["grad_norm"], obj["converged"], obj["fixed_phi"],
                   schema_hash=obj.get("schema_hash", ""))

    def save(self, path, preprocessor=None, provenance=None):
        obj = self.to_dict(preprocessor)
        if provenance:
            obj["provenance"] = provenance
        Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _targets(table, n):
    k = table.y.astype(float)
    if k.size == 0:
        raise RegressionError("empty table")
    if k.min() < 0 or k.max() > n:
        raise RegressionError(f"target outside [0, {n}]")
    return k, np.full_like(k, float(n))


def _start(X, k, n, fixed_phi):
    p = np.clip(k.sum() / n.sum(), 1e-3, 1 - 1e-3)
    beta = np.zeros(X.shape[1])
    beta[0] = math.log(p / (1 - p))
    if fixed_phi is not None:
        return beta
    nn = float(n[0])
    if nn > 1:
        ratio = k.var() / (nn * p * (1 - p))
        rho = np.clip((ratio - 1) / (nn - 1), 1e-3, 0.9)
    else:
        rho = 0.1
    return np.append(beta, math.log(rho / (1 - rho)))


def _boundary_fit(res, X, k, n, gtol, max_iter, guard, phi_small=1e-4):
    """Solution at ``phi = 0`` when the free fit drifts toward the boundary.

    Accepted only if the binomial fit converges and the score for ``phi``
    at zero is non-positive, i.e. the boundary is a maximum. The returned
    parameters carry ``log(0) = -inf`` for the dispersion.
    """
    if float(np.exp(res.x[-1])) > phi_small:
        return None
    b = bfgs_maximize(lambda x: loglik_and_gradient(x, X, k, n, 0.0), res.x[:-1],
                      lambda x: loglik_and_gradient(x, X, k, n, 0.0, hessian=True),
                      gtol=gtol, max_iter=max_iter, guard=guard)
    if not b.converged or b.loglik < res.loglik - 1e-8:
        return None
    mu = expit(X @ b.x)
    score_phi = float(_pieces(mu, 1 - mu, 0.0, k, n)[2].sum())
    if score_phi > gtol:
        return None
    return OptimResult(np.append(b.x, -np.inf), b.loglik, np.append(b.grad, 0.0), res.iterations + b.iterations,
                       True, res.trace + b.trace)


def fit(
    table: FeatureTable,
    terms: Sequence[str],
    n: int = 5,
    phi: float | None = None,
    gtol: float = 1e-6,
    max_iter: int = 500,
    start=None,
    design: Design | None = None,
    separation_bound: float = 30.0,
) -> BetaBinomialModel:
    """Maximum-likelihood beta-binomial regression.

    Parameters
    ----------
    table : FeatureTable
        Target column holds counts in ``[0, n]``.
    terms : sequence of str
        Predictor columns; an intercept is always included.
    n : int
        Trials per observation.
    phi : float, optional
        Fix the dispersion instead of estimating it (``0`` gives the
        binomial / logistic model).

    Raises
    ------
    RankDeficiencyError
        If encoded columns are linearly dependent.
    SeparationError
        If any coefficient leaves ``[-separation_bound, separation_bound]``,
        or every target sits at 0 (or every one at ``n``).
    ConvergenceError
        If the gradient max-norm is still above ``gtol`` at the end.
    """
    design = design or Design.build(table, terms)
    X = design.matrix(table)
    aliased = aliased_columns(X, design.columns)
    if aliased:
        raise RankDeficiencyError(aliased)
    k, nn = _targets(table, n)
    if k.sum() == 0 or k.sum() == nn.sum():
        # every count at one boundary: the intercept's MLE is infinite
        raise SeparationError(f"all targets equal {int(k[0])}: likelihood maximized at infinity")
    nb = X.shape[1]

    def fg(x):
        return loglik_and_gradient(x, X, k, nn, phi)

    def fgh(x):
        return loglik_and_gradient(x, X, k, nn, phi, hessian=True)

    def guard(x):
        big = np.abs(x[:nb]) > separation_bound
        if big.any():
            names = [c for c, b in zip(design.columns, big) if b]
            raise SeparationError(f"unbounded coefficient(s) {', '.join(names)}: likelihood maximized at infinity")

    x0 = _start(X, k, nn, phi) if start is None else np.asarray(start, dtype=float)
    res = bfgs_maximize(fg, x0, fgh, gtol=gtol, max_iter=max_iter, guard=guard)
    guard(res.x)
    if not res.converged and phi is None:
        res = _boundary_fit(res, X, k, nn, gtol, max_iter, guard) or res
    if not res.converged:
        raise ConvergenceError(
            f"beta-binomial fit did not converge after {res.iterations} iterations "
            f"(gradient max-norm {res.grad_norm:.3g})",
            grad_norm=res.grad_norm,
        )
    beta, phi_hat = _unpack(res.x, phi)
    return BetaBinomialModel(
        design=design,
        beta=beta,
        phi=phi_hat,
        n_trials=n,
        loglik=res.loglik,
        n_obs=len(k),
        iterations=res.iterations,
        grad_norm=res.grad_norm,
        converged=res.converged,
        fixed_phi=phi is not None,
        trace=res.trace,
        schema_hash=table.schema_hash(),
    )


# --------------------------------------------------------------------------
# single-term deletions


@dataclass(frozen=True)
class AnovaRow:
    term: str
    df: int
    aic: float
    lrt: float
    p: float


@dataclass
class AnovaTable:
    rows: list[AnovaRow]

    def sorted(self) -> "AnovaTable":
        return AnovaTable(sorted(self.rows, key=lambda r: (r.aic, r.term)))

    def to_frame(self) -> pd.DataFrame:
        from .stats import format_p

        recs = []
        for r in self.rows:
            none = r.term == "<none>"
            recs.append({
                "term": r.term,
                "df": "" if none else r.df,
                "aic": f"{r.aic:.4f}",
                "lrt": "" if none else f"{r.lrt:.4f}",
                "p": "" if none or math.isnan(r.p) else format_p(r.p),
                "signif": "" if none or math.isnan(r.p) else _stars(r.p),
            })
        return pd.DataFrame(recs, columns=["term", "df", "aic", "lrt", "p", "signif"])

    def write_csv(self, path, provenance=None):
        write_frame(self.to_frame(), path, provenance)


def _stars(p):
    from .discourse import significance_code

    return significance_code(p) or "ns"


def anova_single_term_deletions(model: BetaBinomialModel, table: FeatureTable, threads: int = 1) -> AnovaTable:
    """Refit without each term in turn; likelihood-ratio test and AIC per deletion.

    All encoded columns of a categorical term are deleted together.
    """
    rows = [AnovaRow("<none>", 0, model.aic, 0.0, math.nan)]
    phi = model.phi if model.fixed_phi else None
    cols = model.design.columns

    def one(term):
        reduced = model.design.drop(term)
        keep = [i for i, c in enumerate(cols) if c in set(reduced.columns)]
        start = model.beta[keep]
        if phi is None:
            start = np.append(start, math.log(max(model.phi, 1e-12)))
        df = len(cols) - len(reduced.columns)
        if df == 0:
            return AnovaRow(term, 0, model.aic, 0.0, math.nan)
        try:
            red = fit(table, reduced.terms, n=model.n_trials, phi=phi, design=reduced, start=start)
        except RegressionError as exc:
            raise ConvergenceError(f"reduced model without {term!r} failed: {exc}",
                                   getattr(exc, "grad_norm", None), term) from exc
        lrt = max(2 * (model.loglik - red.loglik), 0.0)
        return AnovaRow(term, df, red.aic, lrt, float(chi2.sf(lrt, df)))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows.extend(pool.map(one, model.terms))
    else:
        rows.extend(one(t) for t in model.terms)
    return AnovaTable(rows).sorted()


# --------------------------------------------------------------------------
# evaluation


def evaluate(model: BetaBinomialModel, table: FeatureTable) -> dict[str, float]:
    """Error and accuracy of a fitted model on ``table`` with trivial baselines.

    Binary accuracy predicts "salient" when P(score > 0) > 0.5;
    ``accuracy_mean_rule`` uses ``n * mu >= 0.5`` instead. Baselines are the
    table's own mean (RMSE) and majority class (accuracy).
    """
    missing = [t for t in model.terms if t not in table.data]
    if missing:
        raise SchemaError(f"table lacks model terms: {missing}")
    y = table.y.astype(float)
    pred = model.predict_expected(table)
    salient = y > 0
    p_pos = model.prob_positive(table)
    majority = max(salient.mean(), 1 - salient.mean())
    return {
        "n": int(y.size),
        "rmse": float(np.sqrt(np.mean((pred - y) ** 2))),
        "baseline_rmse": float(np.sqrt(np.mean((y - y.mean()) ** 2))),
        "accuracy": float(np.mean((p_pos > 0.5) == salient)),
        "accuracy_mean_rule": float(np.mean((pred >= 0.5) == salient)),
        "majority_accuracy": float(majority),
    }
