"""Closed-form and numeric analysis: schedules, correlations, error amplitudes,
thermal mode counting, perturbation locality, and power-law fits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import ellipe, ellipk

from . import ed
from .model import InterpolationSpec, PauliTerm


# ------------------------------------------------------------------ schedules


@dataclass
class Schedule:
    """Monotone time parameterization s(t) with s(0)=0, s(T)=1."""

    epsilon: float
    samples: np.ndarray  # (N, 2) columns (t, s)
    total_time: float
    _s_func: Callable[[float], float] | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        t, s = self.samples[:, 0], self.samples[:, 1]
        if abs(s[0]) > 1e-12 or abs(s[-1] - 1.0) > 1e-12:
            raise ValueError("schedule must run from s=0 to s=1")
        if np.any(np.diff(s) <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("schedule samples must be strictly increasing")
        if not np.all(np.isfinite(np.diff(s) / np.diff(t))):
            raise ValueError("ds/dt must be finite on samples")

    def s_at(self, t: float) -> float:
        if self._s_func is not None:
            return self._s_func(min(max(t, 0.0), self.total_time))
        return float(np.interp(t, self.samples[:, 0], self.samples[:, 1]))


def _beta(l: int) -> float:
    return math.pi / (2 * (l + 1))


def schedule_total_time(l: int, epsilon: float) -> float:
    """T = (pi l / (4 eps (l+1))) csc(pi/(l+1))."""
    a = math.pi / (l + 1)
    return math.pi * l / (4.0 * epsilon * (l + 1)) / math.sin(a)


def schedule_time_at(l: int, epsilon: float, s: float) -> float:
    """t(s) = (1/4eps) csc(pi/(l+1)) [pi l/(2(l+1)) + arctan((2s-1) cot(pi/(2(l+1))))]."""
    a = math.pi / (l + 1)
    b = _beta(l)
    return (1.0 / (4.0 * epsilon)) / math.sin(a) * (
        math.pi * l / (2 * (l + 1)) + math.atan((2 * s - 1) / math.tan(b)))


def schedule_closed_form(l: int, epsilon: float, n_samples: int = 2001) -> Schedule:
    """Schedule satisfying ds/dt = eps * omega_l(s)^2 for the length-l chain.

    Sampled by inverting t(s) in closed form on a uniform t-grid.
    """
    if l < 1 or epsilon <= 0:
        raise ValueError("need l >= 1 and epsilon > 0")
    T = schedule_total_time(l, epsilon)
    b = _beta(l)
    a = math.pi / (l + 1)
    tanb = math.tan(b)

    def s_func(t: float) -> float:
        u = 4.0 * epsilon * t * math.sin(a) - math.pi * l / (2 * (l + 1))
        return min(max(0.5 * (1.0 + math.tan(u) * tanb), 0.0), 1.0)

    tgrid = np.linspace(0.0, T, n_samples)
    samples = np.column_stack([tgrid, [s_func(t) for t in tgrid]])
    samples[0, 1], samples[-1, 1] = 0.0, 1.0
    return Schedule(epsilon, samples, T, _s_func=s_func)


def schedule_numeric(s_grid: Sequence[float], gaps: Sequence[float],
                     epsilon: float) -> Schedule:
    """Trapezoid integration of dt = ds/(eps gap(s)^2) on the given grid."""
    s = np.asarray(s_grid, dtype=float)
    g = np.asarray(gaps, dtype=float)
    if np.any(g <= 0):
        raise ValueError("gap curve must be strictly positive")
    if s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
        raise ValueError("s grid must increase from 0 to 1")
    integrand = 1.0 / (epsilon * g ** 2)
    dt = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(s)
    t = np.concatenate([[0.0], np.cumsum(dt)])
    return Schedule(epsilon, np.column_stack([t, s]), float(t[-1]))


def schedule_from_curve(curve: "ed.GapCurve", epsilon: float) -> Schedule:
    return schedule_numeric(curve.s_values, curve.gaps, epsilon)


def window_time(l: int, epsilon: float, eta: float) -> float:
    """Time the closed-form schedule spends with 1-eta <= s <= 1 (integrated)."""
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta in (0, 1] required")
    return schedule_total_time(l, epsilon) - schedule_time_at(l, epsilon, 1.0 - eta)


def window_time_printed(l: int, epsilon: float, eta: float) -> float:
    """The printed closed-form window-time expression, reported for comparison.

    Its T/(2 eps) prefactor is dimensionally suspect (the integrated window
    equals this expression with T/2 instead); the value is returned as-is
    and never asserted against ``window_time``.
    """
    T = schedule_total_time(l, epsilon)
    b = _beta(l)
    return (T / (2.0 * epsilon)) * (
        1.0 + (2 * (l + 1) / (math.pi * l)) * math.atan((2 * eta - 1) / math.tan(b)))


# --------------------------------------------------------------- correlations


@dataclass
class CorrelationResult:
    s: float
    alpha: float
    value: float
    method: str


def _xx_quadrature(s: float) -> float:
    if s >= 1.0:
        return 1.0
    alpha = s / (1.0 - s)

    def integrand(k):
        return (math.cos(k) + alpha) / math.sqrt(1.0 + alpha ** 2 + 2.0 * alpha * math.cos(k))

    val, _ = quad(integrand, 0.0, math.pi, epsabs=1e-12, epsrel=1e-12, limit=200)
    return val / math.pi


def _xx_elliptic(s: float) -> float:
    if s == 0.0:
        return 0.0
    m = 4.0 * s * (1.0 - s)  # parameter convention: m = modulus squared
    if m == 1.0:  # s = 1/2: K(m) diverges but its coefficient vanishes
        return ellipe(m) / (math.pi * s)
    return ((2.0 * s - 1.0) * ellipk(m) + ellipe(m)) / (math.pi * s)


def xx_correlation(s: float, method: str = "elliptic") -> CorrelationResult:
    """Nearest-neighbor XX ground-state correlation of the mapped Ising chain.

    ``method`` is "quadrature" (adaptive integral of [cos k + alpha]/Omega(k)),
    "elliptic" (complete elliptic integrals), or "both" (cross-checked to 1e-8).
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError("s in [0, 1] required")
    alpha = s / (1.0 - s) if s < 1.0 else math.inf
    if method == "quadrature":
        if s == 1.0:
            raise ValueError("quadrature form needs s < 1")
        return CorrelationResult(s, alpha, _xx_quadrature(s), method)
    if method == "elliptic":
        return CorrelationResult(s, alpha, _xx_elliptic(s), method)
    if method == "both":
        q = _xx_quadrature(s)
        e = _xx_elliptic(s)
        if abs(q - e) > 1e-8:
            raise RuntimeError(
                f"correlation methods disagree at s={s}: {q} vs {e} (convention bug)")
        return CorrelationResult(s, alpha, e, method)
    raise ValueError(f"unknown method {method!r}")


def error_amplitude(n: int, s: float) -> float:
    """Vacuum-persistence amplitude <XX>^(n/2) for an n-site error string."""
    if n < 2 or n % 2:
        raise ValueError("n must be even and >= 2")
    xx = _xx_elliptic(s)
    if xx <= 0.0:
        return 0.0
    return math.exp(0.5 * n * math.log(xx))


def error_amplitude_series(n: int, s: float) -> float:
    """Quartic series of the amplitude about s=1."""
    d = s - 1.0
    return (1.0 - n / 8.0 * d ** 2 + n / 4.0 * d ** 3
            + (2.0 * n ** 2 - 53.0 * n) / 128.0 * d ** 4)


# ------------------------------------------------------------- thermal counts


def thermal_fraction(l: int, temperature: float) -> float:
    """Fraction of modes at the gap minimum with energy below k_B T."""
    if not 0.0 < temperature < 2.0:
        raise ValueError("temperature must lie in (0, 2), below the bare gap")
    k = np.arange(1, l + 1)
    excitable = np.sum(2.0 * np.cos(k * np.pi / (2 * (l + 1))) < temperature)
    return float(excitable) / l


def thermal_fraction_limit(temperature: float) -> float:
    """Large-l limit 1 - (2/pi) arccos(k_B T / 2)."""
    return 1.0 - (2.0 / math.pi) * math.acos(temperature / 2.0)


# --------------------------------------------------- first-order perturbation


def first_order_support(spec: InterpolationSpec, V: PauliTerm | None) -> int:
    """Max number of vertex-term eigenvalues flipped in the first-order correction.

    Valid at s=0 where the initial terms commute: the correction of a Pauli
    perturbation lives in a single joint eigensector, classified by how many
    term eigenvalues it flips relative to the ground sector.
    """
    if V is None:
        return 0
    n = spec.n_qubits
    if n > 12:
        raise ValueError("perturbation census bounded to 12 qubits")
    for i, a in enumerate(spec.h_init):
        for b in spec.h_init[i + 1:]:
            if not a.commutes_with(b):
                raise ValueError("initial terms must commute")
    signs = ed.ground_signs(spec)
    g = ed.joint_eigenstate(n, signs)
    op = ed.PauliAction([PauliTerm(1.0, V.factors)], n)
    phi = op.apply(g)
    overlap = np.vdot(g, phi)
    phi = phi - overlap * g
    nrm = np.linalg.norm(phi)
    if nrm < 1e-12:
        return 0
    phi /= nrm
    flips = 0
    for term, sign in signs:
        e = ed.PauliAction([PauliTerm(1.0, term.factors)], n).expectation(phi)
        if abs(abs(e) - 1.0) > 1e-9:
            raise RuntimeError(
                "correction is not sharp in a stabilizer sector (degenerate ambiguity)")
        if round(e) != sign:
            flips += 1
    if flips == 0:
        raise RuntimeError(
            "perturbation mixes the degenerate ground manifold; first-order "
            "coefficients are not defined there")
    return flips


# ------------------------------------------------------------------- fitting


@dataclass
class FitResult:
    """Power-law fit gap ~ c * n^p via least squares on (log n, log gap)."""

    exponent: float
    coefficient: float
    stderr_exponent: float
    stderr_coefficient: float
    r_squared: float
    n_points: int


def fit_power_law(points: Sequence[tuple[float, float]]) -> FitResult:
    pts = [(float(n), float(g)) for n, g in points]
    if any(g <= 0 or n <= 0 for n, g in pts):
        raise ValueError("power-law fit needs positive sizes and gaps")
    if len({n for n, _ in pts}) < 4:
        raise ValueError("need at least 4 distinct sizes")
    x = np.log([n for n, _ in pts])
    y = np.log([g for _, g in pts])
    if np.ptp(x) == 0:
        raise ValueError("singular design: all sizes equal")
    X = np.column_stack([np.ones_like(x), x])
    beta, res, *_ = np.linalg.lstsq(X, y, rcond=None)
    yhat = X @ beta
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    dof = max(len(pts) - 2, 1)
    sigma2 = ss_res / dof
    cov = sigma2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(np.diag(cov))
    c = math.exp(beta[0])
    return FitResult(
        exponent=float(beta[1]),
        coefficient=c,
        stderr_exponent=float(se[1]),
        stderr_coefficient=c * float(se[0]),
        r_squared=1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0,
        n_points=len(pts),
    )
