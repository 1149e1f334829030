"""Nonlinear least squares and the three fit models.

* :func:`levenberg_marquardt` -- damped Gauss-Newton with central-difference
  Jacobians.
* :func:`fit_trace` -- fluorescence trace to oscillation amplitude.
* :func:`fit_pulse_sweep` -- amplitude vs pulse duration to trap displacement.
* :func:`fit_sqrt_voltage` -- displacement vs electrode voltage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import TWO_PI, DetectionLaser, TrapConfig
from .fluorescence import McsHistogram, bin_averaged_rate, cooling_envelope

FIT_SCHEMA_VERSION = 1


class FitError(RuntimeError):
    """Base class for fitting failures."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NonConvergence(FitError):
    pass


class SingularNormalMatrix(FitError):
    pass


class WindowTooShort(FitError):
    pass


class DegenerateSweep(FitError):
    pass


class DomainViolation(FitError):
    pass


@dataclass
class FitResult:
    estimates: np.ndarray
    sigma: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    converged: bool
    n_iterations: int
    names: tuple = ()
    chi2_red: float = float("nan")
    extras: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.estimates[self.names.index(name)]

    def error(self, name):
        return self.sigma[self.names.index(name)]

    def raise_for_status(self):
        if not self.converged:
            raise NonConvergence("fit did not converge", self)
        return self

    def to_dict(self):
        return {
            "schema_version": FIT_SCHEMA_VERSION,
            "names": list(self.names),
            "estimates": [float(x) for x in self.estimates],
            "sigma": [float(x) for x in self.sigma],
            "covariance": np.asarray(self.covariance, dtype=float).tolist(),
            "residual_norm": float(self.residual_norm),
            "chi2_red": float(self.chi2_red),
            "converged": bool(self.converged),
            "n_iterations": int(self.n_iterations),
            "extras": {k: _jsonable(v) for k, v in self.extras.items()},
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != FIT_SCHEMA_VERSION:
            raise ValueError(f"unsupported FitResult schema {d.get('schema_version')!r}")
        return cls(np.array(d["estimates"], float), np.array(d["sigma"], float),
                   np.array(d["covariance"], float), d["residual_norm"], d["converged"],
                   d["n_iterations"], tuple(d["names"]), d["chi2_red"], dict(d["extras"]))


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def numerical_jacobian(fun, p, rel_step=1e-6):
    """Central-difference Jacobian with step ``rel_step * max(|p_i|, 1)``."""
    p = np.asarray(p, dtype=float)
    cols = []
    for i in range(p.size):
        h = rel_step * max(abs(p[i]), 1.0)
        up = p.copy()
        dn = p.copy()
        up[i] += h
        dn[i] -= h
        cols.append((np.asarray(fun(up)) - np.asarray(fun(dn))) / (up[i] - dn[i]))
    return np.column_stack(cols)


def levenberg_marquardt(residuals: Callable, p0, *, max_iter=200, gtol=1e-8, xtol=1e-10,
                        rel_step=1e-6, lam0=1e-3, bounds=None, jacobian=None,
                        names: Sequence[str] = ()) -> FitResult:
    """Minimize ``sum(residuals(p)**2)``.

    ``residuals`` must already be weighted (divided by the data sigma).
    Stops when the gradient norm drops below ``gtol`` times its initial
    value, when the relative step is below ``xtol``, or after
    ``max_iter`` iterations (``converged=False``; the best point is
    returned). ``bounds = (lower, upper)`` clamps every trial point.
    The covariance is ``(J^T J)^-1`` scaled by the reduced chi-square.
    """
    p = np.array(p0, dtype=float)
    if bounds is not None:
        lo, hi = (np.broadcast_to(np.asarray(b, float), p.shape) for b in bounds)
        clamp = lambda q: np.minimum(np.maximum(q, lo), hi)  # noqa: E731
    else:
        clamp = lambda q: q  # noqa: E731
    p = clamp(p)
    jac = jacobian or (lambda q: numerical_jacobian(residuals, q, rel_step))

    r = np.asarray(residuals(p), dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("residuals are not finite at the initial point")
    cost = float(r @ r)
    J = jac(p)
    g = J.T @ r
    g0 = float(np.linalg.norm(g))
    lam = lam0
    converged = g0 == 0.0
    history = [cost]
    it = 0
    while not converged and it < max_iter:
        it += 1
        A = J.T @ J
        d = np.maximum(np.diag(A), 1e-30 * max(1.0, float(np.max(np.diag(A)))))
        while True:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None:
                trial = clamp(p + step)
                r_new = np.asarray(residuals(trial), dtype=float)
                cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else math.inf
                if cost_new <= cost:
                    break
            lam *= 10.0
            if lam > 1e16:
                # no descent direction left at machine precision: stationary
                step = None
                break
        if step is None:
            converged = True
            break
        actual = trial - p
        predicted = -float(2.0 * g @ step + step @ A @ step)
        rho = (cost - cost_new) / predicted if predicted > 0 else 0.0
        p, r, cost = trial, r_new, cost_new
        history.append(cost)
        # a step that matches the quadratic model means the problem is locally
        # linear: drop nearly all damping so the next step is Gauss-Newton
        lam = max(lam * (1e-6 if abs(rho - 1.0) < 1e-3 else 0.1), 1e-12)
        J = jac(p)
        g = J.T @ r
        if np.linalg.norm(g) < gtol * g0:
            converged = True
        elif np.linalg.norm(actual) < xtol * (np.linalg.norm(p) + xtol):
            converged = True

    n, k = r.size, p.size
    dof = n - k
    chi2_red = cost / dof if dof > 0 else float("nan")
    A = J.T @ J
    result = FitResult(p, np.full(k, np.nan), np.full((k, k), np.nan), math.sqrt(cost),
                       converged, it, tuple(names), chi2_red,
                       extras={"cost_history": history})
    if not np.all(np.isfinite(A)) or np.linalg.cond(A) > 1e15:
        raise SingularNormalMatrix("normal matrix is singular at the solution", result)
    cov = np.linalg.inv(A)
    if dof > 0:
        cov = cov * chi2_red
    cov = 0.5 * (cov + cov.T)
    result.covariance = cov
    result.sigma = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return result


# ------------------------------------------------------------------ trace fit


def _window_mask(hist, window):
    starts = hist.bin_starts()
    ends = starts + hist.bin_width
    t0, t1 = window
    tol = 1e-9 * hist.bin_width
    return (starts >= t0 - tol) & (ends <= t1 + tol)


def fit_trace(hist: McsHistogram, trap: TrapConfig, laser: DetectionLaser, window=None,
              init_hint=None, n_phases=8, n_sub=16, cooling=True, fit_background=True,
              reweight=2):
    """Fit the start of a fluorescence trace with the Doppler model.

    Free parameters are the peak velocity ``v``, phase ``phi``, ``scale``
    and a residual ``background``; detuning, linewidth, saturation and
    trap frequency stay fixed. Bins are weighted by ``sqrt(max(counts, 1))``.
    ``window`` defaults to the first five trap periods. ``init_hint`` is an
    expected oscillation amplitude in metres; without it ``v`` is seeded
    from a grid scan. Returns ``(FitResult, x_a)`` with ``x_a = v/omega_a``
    and its 1-sigma in ``result.extras["sigma_x_a"]``.

    With ``cooling`` the model amplitude follows the Doppler-cooling
    envelope of the detection beam, so ``v`` is the amplitude at detection
    onset rather than a window average. ``fit_background=False`` holds the
    residual background at zero, which keeps the fit identifiable when
    the oscillation is absent (a constant trace fixes only
    ``scale * R + background``).

    After the count-weighted fit, ``reweight`` further passes replace the
    weights by ``sqrt`` of the fitted expected counts (Pearson weighting),
    removing the low-count bias of weighting by the data themselves.
    """
    period = trap.period()
    if window is None:
        window = (0.0, 5.0 * period)
    t0, t1 = window
    if t1 - t0 < 3.0 * period * (1 - 1e-9):
        raise WindowTooShort(f"fit window {t1 - t0:.3e} s is shorter than 3 trap periods")
    mask = _window_mask(hist, window)
    if not np.any(mask):
        raise WindowTooShort("fit window contains no complete bins")
    idx = np.flatnonzero(mask)
    edges = hist.t0 + hist.bin_width * np.arange(idx[0], idx[-1] + 2)
    counts = hist.counts[mask]
    y = hist.net()[mask].astype(float)
    w = 1.0 / np.sqrt(np.maximum(counts, 1))
    omega = trap.omega_a

    envelope = cooling_envelope(laser, trap.mass) if cooling else None

    def rates(v, phi):
        return bin_averaged_rate(edges, v, phi, omega, laser, n_sub, envelope)

    r0 = float(rates(0.0, 0.0)[0])
    scale_ref = max(float(np.mean(y)), 1.0) / r0
    bg_ref = max(float(np.mean(counts)), 1.0)

    names = ("v", "phi", "scale", "background")

    def model(p):
        v, phi, a = p[:3]
        b = p[3] if fit_background else 0.0
        return a * scale_ref * rates(v, phi) + b * bg_ref

    def resid(p):
        return (y - model(p)) * w

    def refit(res):
        nonlocal w
        for _ in range(reweight):
            expected = model(res.estimates) + hist.background_rate
            w = 1.0 / np.sqrt(np.maximum(expected, 1.0))
            res = levenberg_marquardt(resid, res.estimates, names=res.names)
        return res

    # variable projection over a (v, phi) grid: scale and background are linear
    k = laser.wavenumber
    v_max = 3.0 * (abs(laser.detuning) + laser.linewidth) / k
    if init_hint is not None:
        v_grid = np.array([max(init_hint * omega, 1e-3)])
    else:
        v_grid = np.linspace(0.02, 1.0, 50) * v_max
    phases = (np.arange(n_phases) + 0.5) * TWO_PI / n_phases
    starts = []
    for phi in phases:
        best = None
        for v in v_grid:
            cols = [rates(v, phi) * scale_ref]
            if fit_background:
                cols.append(np.full(y.size, bg_ref))
            basis = np.column_stack(cols)
            coef, *_ = np.linalg.lstsq(basis * w[:, None], y * w, rcond=None)
            cost = float(np.sum(((basis @ coef) - y) ** 2 * w**2))
            if best is None or cost < best[0]:
                best = (cost, np.array([v, phi, *coef]))
        starts.append(best[1])

    best_fit = None
    failures = []
    for p0 in starts:
        try:
            res = levenberg_marquardt(resid, p0, names=names[:p0.size])
        except SingularNormalMatrix as exc:
            failures.append(exc)
            continue
        if best_fit is None or res.residual_norm < best_fit.residual_norm:
            best_fit = res
    if best_fit is None:
        raise failures[-1]
    best_fit = refit(best_fit)

    k_par = best_fit.estimates.size
    est = best_fit.estimates.copy()
    if est[0] < 0:
        est[0] = -est[0]
        est[1] += math.pi
    est[1] %= TWO_PI
    units = np.array([1.0, 1.0, scale_ref, bg_ref])[:k_par]
    cov = best_fit.covariance * np.outer(units, units)
    if not fit_background:
        est = np.append(est, 0.0)
        units = np.append(units, bg_ref)
        cov = np.pad(cov, ((0, 1), (0, 1)))
    best_fit.estimates = est * units
    best_fit.covariance = cov
    best_fit.sigma = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    best_fit.names = names
    x_a = best_fit.estimates[0] / omega
    sigma_x = best_fit.sigma[0] / omega
    best_fit.extras.update(x_a=x_a, sigma_x_a=sigma_x, window=[t0, t1], n_bins=int(y.size),
                           background_rate=hist.background_rate, cooling=bool(cooling),
                           fit_background=bool(fit_background))
    return best_fit, x_a


# ------------------------------------------------------------------ pulse sweep


@dataclass(frozen=True)
class SweepPoint:
    tau_over_T: float
    x_a: float
    sigma_x: float

    def __post_init__(self):
        if self.tau_over_T < 0:
            raise ValueError("tau_over_T must be >= 0")
        if not self.sigma_x > 0:
            raise ValueError("sigma_x must be > 0")


def sweep_model(tau_over_T, x_d, period_correction=1.0):
    """Residual amplitude after a square displacement pulse of ``tau / T``."""
    # sqrt(2 (1 - cos θ)) = 2 |sin(θ / 2)|, without the cancellation near integers
    half = np.pi * period_correction * np.asarray(tau_over_T, dtype=float)
    return 2.0 * x_d * np.abs(np.sin(half))


def sweep_jacobian(tau_over_T, x_d, period_correction=1.0):
    """Analytic derivatives of :func:`sweep_model` w.r.t. ``(x_d, correction)``."""
    r = np.asarray(tau_over_T, dtype=float)
    half = np.pi * period_correction * r
    root = 2.0 * np.abs(np.sin(half))
    # the cusp at integer tau/T has no derivative; take 0 there
    d_corr = 2.0 * x_d * np.pi * r * np.sign(np.sin(half)) * np.cos(half)
    return np.column_stack([root, d_corr])


def fit_pulse_sweep(points: Sequence[SweepPoint], fit_period=False) -> FitResult:
    """Weighted fit of amplitude vs normalized pulse time for ``x_d``.

    With ``fit_period`` a multiplicative correction to ``tau/T`` is fitted
    too (names ``x_d``, ``period_correction``).
    """
    if len(points) < 5:
        raise ValueError("need at least 5 sweep points")
    r = np.array([p.tau_over_T for p in points])
    x = np.array([p.x_a for p in points])
    s = np.array([p.sigma_x for p in points])
    if r.max() - r.min() < 0.5:
        raise ValueError("sweep must span at least half a trap period")
    f = sweep_model(r, 1.0)
    if np.all(f < 1e-9):
        raise DegenerateSweep("all sweep points sit at integer tau/T")
    w = 1.0 / s
    xd0 = float(np.sum(w**2 * x * f) / np.sum(w**2 * f**2))

    if fit_period:
        def resid(p):
            return (x - sweep_model(r, p[0], p[1])) * w
        def jac(p):
            return -sweep_jacobian(r, p[0], p[1]) * w[:, None]
        # scan the correction: the objective is multimodal for long pulses
        best = None
        span = 1.0 / max(r.max(), 1.0)
        for c in 1.0 + np.linspace(-0.5, 0.5, 41) * span:
            fc = sweep_model(r, 1.0, c)
            if not np.any(fc > 1e-9):
                continue
            a = float(np.sum(w**2 * x * fc) / np.sum(w**2 * fc**2))
            cost = float(np.sum((resid([a, c])) ** 2))
            if best is None or cost < best[0]:
                best = (cost, [a, c])
        return levenberg_marquardt(resid, best[1], jacobian=jac,
                                   names=("x_d", "period_correction"))

    def resid1(p):
        return (x - sweep_model(r, p[0])) * w

    return levenberg_marquardt(resid1, [xd0], names=("x_d",))


# ------------------------------------------------------------------ voltage calibration


def sqrt_voltage_model(volts, a, v0=0.0):
    return a * np.sqrt(np.asarray(volts, dtype=float) - v0)


def fit_sqrt_voltage(volts, x, sigma=None, free_offset=False) -> FitResult:
    """Fit ``x(V) = a sqrt(V - V0)``; ``V0`` is 0 unless ``free_offset``.

    During iteration ``V0`` is clamped just below the smallest voltage.
    """
    V = np.asarray(volts, dtype=float)
    x = np.asarray(x, dtype=float)
    n_min = 3 if free_offset else 2
    if V.size < n_min:
        raise ValueError(f"need at least {n_min} calibration points")
    s = np.ones_like(x) if sigma is None else np.asarray(sigma, dtype=float)
    w = 1.0 / s
    if np.any(V <= 0) and not free_offset:
        raise DomainViolation("voltages must be > 0 when V0 is fixed at 0")
    root = np.sqrt(np.clip(V, 0, None))
    a0 = float(np.sum(w**2 * x * root) / np.sum(w**2 * root**2))
    if not free_offset:
        def resid(p):
            return (x - sqrt_voltage_model(V, p[0])) * w
        return levenberg_marquardt(resid, [a0], names=("a",))

    v_hi = V.min() - 1e-9 * max(np.ptp(V), abs(V.min()), 1e-12)

    def resid2(p):
        return (x - sqrt_voltage_model(V, p[0], min(p[1], v_hi))) * w

    res = levenberg_marquardt(resid2, [a0, min(0.0, v_hi)], bounds=([-np.inf, -np.inf], [np.inf, v_hi]),
                              names=("a", "V0"))
    if np.any(V <= res.estimates[1]):
        raise DomainViolation("a voltage lies at or below the fitted offset", res)
    return res
