"""Decay-curve fitting: ``F(n) = A p^n + B`` and model selection.

The single-exponential fit uses variable projection: for fixed ``p`` the
model is linear in ``(A, B)``, which are solved exactly by weighted least
squares, leaving a one-dimensional search over ``p``.  That search is a
log-spaced grid in ``1 - p`` followed by golden-section refinement, run
vectorized over any number of curves at once so that bootstrap refits
are cheap.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .liouville import ValidationError, avg_gate_fidelity_from_p
from .protocol import DecayCurve

MIN_LENGTHS = 4
MIN_LENGTHS_SELECT = 6
# weighted residual sums below this (per point, in fidelity units squared)
# are indistinguishable from rounding and are clamped before comparing models
RSS_FLOOR_PER_POINT = 1e-20

_GOLDEN = (math.sqrt(5) - 1) / 2


class FitError(ValidationError):
    """The data cannot support the requested fit."""


def error_per_gate(p: float, dim: int) -> float:
    """``1 - F_avg = (1 - p)(D - 1)/D``."""
    return 1.0 - avg_gate_fidelity_from_p(p, dim)


def p_from_error_per_gate(r: float, dim: int) -> float:
    return 1.0 - r * dim / (dim - 1)


@dataclass
class FitResult:
    p: float
    amplitude: float
    offset: float
    error_per_gate: float
    ci68_p: tuple
    ci68_error_per_gate: tuple
    dim: int
    model: str = "single_exp"
    rss: float = 0.0
    chi2: Optional[float] = None
    dof: int = 0
    max_abs_residual: float = 0.0
    offset_fixed: bool = False
    n_bootstrap: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci68"] = {"p": list(self.ci68_p), "error_per_gate": list(self.ci68_error_per_gate)}
        del d["ci68_p"], d["ci68_error_per_gate"]
        d["residuals"] = {"rss": d.pop("rss"), "chi2": d.pop("chi2"), "dof": d.pop("dof"),
                          "max_abs": d.pop("max_abs_residual")}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary(self) -> str:
        lo, hi = self.ci68_error_per_gate
        return (f"p={self.p:.8g} error_per_gate={self.error_per_gate:.4e} "
                f"ci68=[{lo:.4e}, {hi:.4e}] model={self.model}")


def fit_weights(curve: DecayCurve) -> tuple[np.ndarray, bool]:
    """Inverse-variance weights ``n_runs / std^2`` from the per-point run spread.

    The per-run standard deviation is used rather than the sequence-clustered
    standard error: with a handful of sequences the clustered estimate has
    very few degrees of freedom and makes the weights erratic.  Zero-variance
    points get the median of the positive weights; if every point has zero
    variance the weights are uniform.  The flag tells whether the weights
    came from measured variances.
    """
    se = _run_se(curve.std, curve.n_runs)
    return _weights_from_se(se), bool(np.any(se > 0))


def _run_se(std, n_runs) -> np.ndarray:
    std = np.asarray(std, dtype=float)
    return std / np.sqrt(np.maximum(np.asarray(n_runs, dtype=float), 1.0))


def _linear_solve(basis: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Weighted LS for a batch.  basis (..., K, m), y (..., K), w (K,)."""
    sw = np.sqrt(w)
    a = basis * sw[:, None]
    b = y * sw
    # normal equations in batch; m is tiny
    ata = np.einsum("...ki,...kj->...ij", a, a)
    atb = np.einsum("...ki,...k->...i", a, b)
    # a relative ridge keeps the q = 0 column collinearity solvable
    ridge = 1e-13 * np.trace(ata, axis1=-2, axis2=-1)[..., None, None] + 1e-300
    coef = np.linalg.solve(ata + ridge * np.eye(a.shape[-1]), atb[..., None])[..., 0]
    resid = y - np.einsum("...ki,...i->...k", basis, coef)
    return coef, np.einsum("...k,k->...", resid ** 2, w)


def _profile(q: np.ndarray, n: np.ndarray, y: np.ndarray, w: np.ndarray, offset):
    """Profiled weighted RSS and linear coefficients at ``p = 1 - q``.

    q (B, G), y (B, K) -> coef (B, G, m), rss (B, G).  The 1- and 2-column
    normal equations are solved in closed form.
    """
    e = np.exp(n[None, None, :] * np.log1p(-q)[..., None])  # (B, G, K)
    yv = y[:, None, :] - (0.0 if offset is None else offset)
    w = np.broadcast_to(w, y.shape)[:, None, :]  # per-row weights allowed

    def dot(u):
        return (u * w).sum(axis=-1)

    see = dot(e ** 2)
    sey = dot(e * yv)
    if offset is not None:
        a = sey / np.where(see > 0, see, 1.0)
        coef = a[..., None]
        resid = yv - a[..., None] * e
    else:
        sw = w.sum(axis=-1)
        se_ = dot(e)
        sy = dot(yv)
        det = see * sw - se_ ** 2
        # near-collinear columns (q -> 0): fall back to a constant model
        ok = det > 1e-13 * see * sw
        dsafe = np.where(ok, det, 1.0)
        a = np.where(ok, (sey * sw - se_ * sy) / dsafe, 0.0)
        b = np.where(ok, (see * sy - se_ * sey) / dsafe, sy / sw)
        coef = np.stack([a, b], axis=-1)
        resid = yv - a[..., None] * e - b[..., None]
    return coef, dot(resid ** 2)


def _fit_batch(n: np.ndarray, y: np.ndarray, w: np.ndarray, offset=None, iters: int = 80):
    """Vectorized single-exponential fit of each row of ``y``.

    Returns (p, A, B, rss) arrays.
    """
    y = np.atleast_2d(y)
    grid = np.concatenate([[0.0], np.logspace(-10, math.log10(0.999), 400)])
    _, rss = _profile(np.broadcast_to(grid, (len(y), len(grid))), n, y, w, offset)
    best = np.argmin(rss, axis=1)
    lo = grid[np.maximum(best - 1, 0)]
    hi = grid[np.minimum(best + 1, len(grid) - 1)]
    a = hi - _GOLDEN * (hi - lo)
    b = lo + _GOLDEN * (hi - lo)

    def f(q):
        return _profile(q[:, None], n, y, w, offset)[1][:, 0]

    fa, fb = f(a), f(b)
    for _ in range(iters):
        left = fa <= fb
        hi = np.where(left, b, hi)
        lo = np.where(left, lo, a)
        new = np.where(left, hi - _GOLDEN * (hi - lo), lo + _GOLDEN * (hi - lo))
        fnew = f(new)
        a, b = np.where(left, new, b), np.where(left, a, new)
        fa, fb = np.where(left, fnew, fb), np.where(left, fa, fnew)
    # keep the best of the refined point and the grid endpoints (p = 1 edge)
    cands = np.stack([a, b, lo, hi], axis=1)
    coef, rss = _profile(cands, n, y, w, offset)
    k = np.argmin(rss, axis=1)
    rows = np.arange(len(y))
    q = cands[rows, k]
    c = coef[rows, k]
    amp = c[:, 0]
    off = c[:, 1] if offset is None else np.full(len(y), float(offset))
    return 1.0 - q, amp, off, rss[rows, k]


def _weights_from_se(se: np.ndarray) -> np.ndarray:
    pos = se > 0
    if not np.any(pos):
        return np.ones(len(se))
    w = np.zeros(len(se))
    w[pos] = 1.0 / se[pos] ** 2
    w[~pos] = np.median(w[pos])
    return w


def _resample_stacked(runs: np.ndarray, rng: np.random.Generator):
    """One two-stage resample of equally shaped runs ``(K, n_seq, n_reps)``.

    Sequences are drawn with replacement, then randomizations within each
    drawn sequence.  Returns the resampled means and run standard deviations.
    """
    k, n_seq, n_rep = runs.shape
    seq = rng.integers(n_seq, size=(k, n_seq))
    rb = runs[np.arange(k)[:, None], seq]  # (K, n_seq, n_rep)
    if n_rep > 1:
        rep = rng.integers(n_rep, size=rb.shape)
        rb = np.take_along_axis(rb, rep, axis=2)
    flat = rb.reshape(k, -1)
    std = flat.std(axis=1, ddof=1) if flat.shape[1] > 1 else np.zeros(k)
    return flat.mean(axis=1), std


def _bootstrap(curve: DecayCurve, n_boot: int, seed: int, w: np.ndarray):
    """Resampled point means and fit weights, each shape (n_boot, K).

    With per-run data the resampling is two-stage (sequences, then
    randomizations within them) so that the correlation between runs that
    share a computational sequence is kept; weights are re-estimated from
    each resample.  Without per-run data the means are perturbed by their
    standard errors and the weights kept.
    """
    k = len(curve.lengths)
    means = np.empty((n_boot, k))
    weights = np.empty((n_boot, k))
    se = curve.standard_error()
    stacked = None
    if curve.runs is not None and len({r.shape for r in curve.runs}) == 1:
        stacked = np.stack(curve.runs)
    for b in range(n_boot):
        rng = np.random.default_rng([seed, b])
        if curve.runs is None:
            means[b] = curve.mean + se * rng.standard_normal(k)
            weights[b] = w
            continue
        if stacked is not None:
            means[b], std = _resample_stacked(stacked, rng)
        else:
            std = np.empty(k)
            for j, r in enumerate(curve.runs):
                m, sd = _resample_stacked(r[None], rng)
                means[b, j], std[j] = m[0], sd[0]
        weights[b] = _weights_from_se(_run_se(std, curve.n_runs))
    return means, weights


def fit_exponential(curve: DecayCurve, dim: Optional[int] = None, *, fixed_offset=None,
                    n_bootstrap: int = 500, seed: int = 0) -> FitResult:
    """Weighted fit of ``A p^n + B``; ``fixed_offset`` pins ``B`` (e.g. ``1/D``).

    68% intervals are the 16th and 84th percentiles of bootstrap refits.
    """
    dim = curve.dim if dim is None else int(dim)
    n = np.asarray(curve.lengths, dtype=float)
    if len(np.unique(n)) < MIN_LENGTHS:
        raise FitError(f"insufficient lengths: need at least {MIN_LENGTHS} distinct, got {len(np.unique(n))}")
    if not np.all(np.isfinite(curve.mean)):
        raise FitError("non-finite fidelities in curve")
    w, measured = fit_weights(curve)
    p, amp, off, rss = (v[0] for v in _fit_batch(n, curve.mean, w, fixed_offset))
    if not (np.isfinite(p) and np.isfinite(amp) and np.isfinite(rss)) or not (0 < p <= 1):
        raise FitError(f"fit did not converge: p={p}, A={amp}, rss={rss}")
    resid = curve.mean - (amp * p ** n + off)
    n_par = 2 if fixed_offset is not None else 3
    dof = len(n) - n_par

    ci_p = (p, p)
    if n_bootstrap > 0 and (measured or curve.runs is not None):
        boot, bw = _bootstrap(curve, n_bootstrap, seed, w)
        bp = _fit_batch(n, boot, bw, fixed_offset)[0]
        ci_p = tuple(float(v) for v in np.percentile(bp, [16, 84]))
    r = error_per_gate(p, dim)
    ci_r = (error_per_gate(ci_p[1], dim), error_per_gate(ci_p[0], dim))
    return FitResult(
        p=float(p), amplitude=float(amp), offset=float(off), error_per_gate=float(r),
        ci68_p=ci_p, ci68_error_per_gate=ci_r, dim=dim, rss=float(rss),
        chi2=float(rss) if measured else None,
        dof=dof, max_abs_residual=float(np.max(np.abs(resid))),
        offset_fixed=fixed_offset is not None, n_bootstrap=n_bootstrap,
    )


@dataclass
class MultiExpFit:
    """``A1 p1^n + A2 p2^n + B`` with ``p1 >= p2``."""

    p: tuple
    amplitudes: tuple
    offset: float
    rss: float

    def predict(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return sum(a * p ** n for a, p in zip(self.amplitudes, self.p)) + self.offset


def fit_two_exponential(curve: DecayCurve) -> MultiExpFit:
    """Two-exponential-plus-offset fit by variable projection over ``(p1, p2)``."""
    n = np.asarray(curve.lengths, dtype=float)
    w, _ = fit_weights(curve)
    y = curve.mean

    def profile(q):
        q = np.clip(q, 0.0, 0.999999)
        basis = np.stack([np.exp(n * np.log1p(-q[0])), np.exp(n * np.log1p(-q[1])),
                          np.ones_like(n)], axis=-1)
        return _linear_solve(basis, y, w)

    def objective(logq):
        return float(profile(10.0 ** np.asarray(logq))[1])

    grid = np.linspace(-8, math.log10(0.999), 40)
    best = min(((objective((a, b)), (a, b)) for i, a in enumerate(grid) for b in grid[i + 1:]))
    res = minimize(objective, np.array(best[1]), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-30, "maxiter": 4000})
    x = res.x if res.fun <= best[0] else np.array(best[1])
    q = np.clip(10.0 ** x, 0.0, 0.999999)
    coef, rss = profile(q)
    order = np.argsort(q)  # slow decay (large p) first
    return MultiExpFit(tuple(float(1 - q[i]) for i in order),
                       tuple(float(coef[i]) for i in order), float(coef[2]), float(rss))


@dataclass
class ModelSelection:
    preferred: str
    single: FitResult
    multi: MultiExpFit
    criterion_single: float
    criterion_multi: float
    criterion: str = field(default="aic")


def _aic(rss: float, n_points: int, n_params: int, chi2_units: bool) -> float:
    if chi2_units:
        return rss + 2 * n_params
    rss = max(rss, RSS_FLOOR_PER_POINT * n_points)
    return n_points * math.log(rss / n_points) + 2 * n_params


def model_select(curve: DecayCurve, dim: Optional[int] = None, *, seed: int = 0) -> ModelSelection:
    """Compare ``A p^n + B`` with a two-exponential-plus-offset model by AIC.

    With measured variances the weighted residual sum is a chi-square and
    AIC is ``chi2 + 2k``; otherwise the Gaussian-likelihood form
    ``N log(RSS/N) + 2k`` is used, with the residual sum clamped at the
    rounding floor so that exact data prefer the smaller model.
    """
    if len(np.unique(curve.lengths)) < MIN_LENGTHS_SELECT:
        raise FitError(f"insufficient lengths: model selection needs {MIN_LENGTHS_SELECT}")
    single = fit_exponential(curve, dim, n_bootstrap=0, seed=seed)
    multi = fit_two_exponential(curve)
    _, measured = fit_weights(curve)
    k = len(curve.lengths)
    # the nested model can never fit worse than the single exponential
    c1 = _aic(single.rss, k, 3, measured)
    c2 = _aic(min(multi.rss, single.rss), k, 5, measured)
    tag = "multi_exp(2)" if c2 < c1 else "single_exp"
    return ModelSelection(tag, single, multi, c1, c2)
