"""Bijective map between the area radius r and the stretched coordinate x.

The coordinate is defined by dx/dr = 1/F and integrates in closed form to

    x(r) = -(3/Lambda) * sum_alpha A_alpha r_alpha^2 * ln((r - r_alpha)/(frak_r - r_alpha))

anchored so that x = 0 at the photon sphere.  The map sends
r_minus -> -inf and r_plus -> +inf, with |r(x) - r_pm| ~ exp(2 kappa_pm x).

The inverse is evaluated two ways and the chart switches between them at
``a_threshold``:

* |x| <= a_threshold: safeguarded Newton on the monotone closed form,
  seeded from a uniform-in-x lookup table (the table is only a seed cache;
  accuracy comes from Newton);
* |x| >  a_threshold: truncated inverse series r = r_pm + sum c_l z^l in
  z = exp(2 kappa_pm x), whose coefficients come from Lagrange inversion of
  the closed form, computed by power-series arithmetic at r_pm.

The potentials on the x-line are W0 = F/r^2 (photon-sphere barrier),
W1 = (F/r) F' + m^2 F (curvature + mass term), V = 1/r and the
gauge-shifted Vt = 1/r - 1/r_plus which vanishes at the cosmological end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConvergenceFailure, OutOfExterior, TruncationUnstable
from .spacetime import (
    Horizons,
    ROOT_LABELS,
    SpacetimeParams,
    metric_function,
    metric_function_deriv,
)

_SINGLE_EXP_TOL = 1e-12      # where the 1-term series already reproduces r
_THRESHOLD_FLOOR = 2.0
_THRESHOLD_CEIL = 60.0


@dataclass(frozen=True)
class PotentialSample:
    """Potential values at one point of the x-line."""

    W0: float
    W1: float
    V: float
    V_tilde: float
    V_minus_shifted: float


@dataclass(frozen=True)
class InverseSeries:
    """Truncated Lagrange-inversion data for one horizon side."""

    side: int                 # +1 for r_plus, -1 for r_minus
    r_h: float
    two_kappa: float          # exponent rate: z = exp(two_kappa * x)
    coefficients: np.ndarray  # c_1..c_N of r = r_h + sum c_l z^l
    appendix_threshold: float  # |x| beyond which the majorant guarantees convergence
    single_exp_threshold: float  # |x| beyond which c_1 z alone is accurate to 1e-12
    use_threshold: float      # |x| from which this truncation is actually used

    def eval(self, x):
        z = np.exp(self.two_kappa * np.asarray(x, dtype=float))
        acc = np.zeros_like(z)
        for c in self.coefficients[::-1]:
            acc = acc * z + c
        return self.r_h + acc * z


@dataclass(frozen=True)
class RWChart:
    params: SpacetimeParams
    horizons: Horizons
    weights: np.ndarray          # w_alpha = -(3/Lambda) A_alpha r_alpha^2
    series_plus: InverseSeries
    series_minus: InverseSeries
    a_threshold: float
    x_table: np.ndarray          # uniform x grid, Newton seeds only
    r_table: np.ndarray
    newton_tol: float
    max_newton_iter: int

    @property
    def v_minus_shifted(self) -> float:
        """1/r_minus - 1/r_plus, the left limit of the shifted potential."""
        return 1.0 / self.horizons.r_minus - 1.0 / self.horizons.r_plus


def x_of_r(chart: RWChart, r):
    """Closed-form x(r); raises OutOfExterior unless r in (r_minus, r_plus)."""
    hz = chart.horizons
    scalar = np.isscalar(r)
    r = np.asarray(r, dtype=float)
    if np.any(r <= hz.r_minus) or np.any(r >= hz.r_plus):
        raise OutOfExterior(f"r outside ({hz.r_minus}, {hz.r_plus})")
    acc = np.zeros_like(r)
    for w, root in zip(chart.weights, hz.roots):
        if w != 0.0:
            acc += w * np.log((r - root) / (hz.frak_r - root))
    return float(acc) if scalar else acc


def _x_of_r_unchecked(chart: RWChart, r: float) -> float:
    hz = chart.horizons
    acc = 0.0
    for w, root in zip(chart.weights, hz.roots):
        if w != 0.0:
            acc += w * math.log((r - root) / (hz.frak_r - root))
    return acc


# --- power-series helpers (plain coefficient arrays, index = power) ------


def _series_exp(p: np.ndarray) -> np.ndarray:
    """exp of a power series with p[0] = 0, same truncation order."""
    n = len(p)
    e = np.zeros(n)
    e[0] = 1.0
    for k in range(1, n):
        # e' = p' e  =>  k e_k = sum_{j=1}^{k} j p_j e_{k-j}
        e[k] = sum(j * p[j] * e[k - j] for j in range(1, k + 1)) / k
    return e


def _series_mul(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    return np.convolve(a, b)[:order]


def _phi_series(chart: RWChart, side: int, order: int) -> np.ndarray:
    """Taylor coefficients at r_pm of phi(u) = (r - r_pm)/g_pm(r), u = r - r_pm.

    g_pm is the product form of exp(2 kappa_pm x); phi is analytic and
    nonzero at the horizon, so log/exp series arithmetic applies directly.
    """
    hz = chart.horizons
    roots = hz.roots
    label = "+" if side > 0 else "-"
    idx = ROOT_LABELS.index(label)
    r_h = roots[idx]
    a_h = hz.A[label] * r_h**2

    log_series = np.zeros(order)
    c0 = hz.frak_r - r_h
    for j, (lab, root) in enumerate(zip(ROOT_LABELS, roots)):
        if j == idx:
            continue
        b = hz.A[lab] * root**2 / a_h
        ratio = (hz.frak_r - root) / (r_h - root)
        c0 *= ratio**b
        t = 1.0 / (r_h - root)
        # -b * ln(1 + u t) as a series in u
        for k in range(1, order):
            log_series[k] -= b * ((-1.0) ** (k + 1)) * t**k / k
    return c0 * _series_exp(log_series)


def _lagrange_coefficients_from_phi(phi: np.ndarray, n_terms: int) -> np.ndarray:
    """c_l = (1/l) [u^(l-1)] phi(u)^l for l = 1..n_terms."""
    order = n_terms
    coeff = np.zeros(n_terms)
    power = np.zeros(order)
    power[0] = 1.0
    for ell in range(1, n_terms + 1):
        power = _series_mul(power, phi, order)
        coeff[ell - 1] = power[ell - 1] / ell
    return coeff


def lagrange_coefficients(
    params: SpacetimeParams,
    horizons: Horizons,
    side: int,
    n_terms: int = 12,
) -> InverseSeries:
    """Inverse-series data r = r_pm + sum_l c_l z^l with z = exp(2 kappa_pm x).

    The Appendix-style majorant |term_l| <= (Kt |z| l)^l / l! yields the
    convergence threshold |x| > ln(Kt)/(2|kappa_pm|); the single-exponential
    threshold records where c_1 z alone reproduces r to 1e-12.  Raises
    ``TruncationUnstable`` when a coefficient-ratio estimate of the
    convergence radius contradicts use of the series at its own threshold.
    """
    chart_stub = _chart_stub(params, horizons)
    label = "+" if side > 0 else "-"
    idx = ROOT_LABELS.index(label)
    roots = horizons.roots
    r_h = roots[idx]
    two_kappa = 2.0 * (horizons.kappa_plus if side > 0 else horizons.kappa_minus)
    a_h = horizons.A[label] * r_h**2

    phi = _phi_series(chart_stub, side, max(n_terms, 4))
    coeff = _lagrange_coefficients_from_phi(phi, max(n_terms, 4))[:n_terms]

    # majorant constants for the convergence threshold
    b_vals, k_prod, inv_sum, pow_prod = [], 1.0, 0.0, 1.0
    for j, (lab, root) in enumerate(zip(ROOT_LABELS, roots)):
        if j == idx:
            continue
        b = horizons.A[lab] * root**2 / a_h
        b_vals.append(abs(b))
        k_prod *= abs(horizons.frak_r - root) ** b
        pow_prod *= abs(r_h - root) ** (-b)
        inv_sum += 1.0 / abs(r_h - root)
    k_tilde = k_prod * (max(b_vals) + 1.0) * pow_prod * inv_sum
    appendix_threshold = max(0.0, math.log(max(k_tilde, 1e-300)) / abs(two_kappa))

    c1, c2 = coeff[0], coeff[1] if n_terms > 1 else 0.0
    if c2 != 0.0:
        z_star = math.sqrt(_SINGLE_EXP_TOL * abs(c1) / abs(c2))
    else:
        z_star = 1.0
    single_exp_threshold = max(0.0, -math.log(min(z_star, 1.0)) / abs(two_kappa))

    # The majorant bound only guarantees convergence, not accuracy of the
    # N-term truncation; when its constant is near 1 the bound lands where
    # the tail is still O(1).  Floor the threshold where the estimated
    # truncation tail |c_N z^N| / (1 - g z) drops below 1e-13.
    ratios = [
        abs(coeff[i + 1] / coeff[i])
        for i in range(len(coeff) - 1)
        if coeff[i] != 0.0 and abs(coeff[i + 1]) > 1e-300
    ]
    growth = max(ratios) if ratios else 1.0
    n = len(coeff)
    c_last = abs(coeff[-1]) if coeff[-1] != 0.0 else abs(c1) * growth ** (n - 1)
    z_acc = (1e-13 / max(c_last, 1e-300)) ** (1.0 / n)
    z_acc = min(z_acc, 0.5 / max(growth, 1e-300))
    accuracy_threshold = max(0.0, -math.log(min(z_acc, 1.0)) / abs(two_kappa))

    threshold = max(min(appendix_threshold, single_exp_threshold), accuracy_threshold)
    z_thr = math.exp(-abs(two_kappa) * max(threshold, _THRESHOLD_FLOOR))
    if growth * z_thr > 0.75:
        raise TruncationUnstable(
            f"series ratio {growth} too large at threshold z={z_thr}"
        )

    return InverseSeries(
        side=side,
        r_h=r_h,
        two_kappa=two_kappa,
        coefficients=coeff,
        appendix_threshold=appendix_threshold,
        single_exp_threshold=single_exp_threshold,
        use_threshold=threshold,
    )


def _chart_stub(params: SpacetimeParams, horizons: Horizons) -> RWChart:
    weights = np.array(
        [-(3.0 / params.Lambda) * horizons.A[lab] * root**2
         for lab, root in zip(ROOT_LABELS, horizons.roots)]
    )
    return RWChart(
        params=params, horizons=horizons, weights=weights,
        series_plus=None, series_minus=None, a_threshold=math.inf,  # type: ignore[arg-type]
        x_table=np.zeros(0), r_table=np.zeros(0),
        newton_tol=1e-13, max_newton_iter=60,
    )


def _bisect_r_of_x(chart: RWChart, xs: np.ndarray, n_iter: int = 200) -> np.ndarray:
    """Vectorized bisection inverse used to build the seed table."""
    hz = chart.horizons
    span = hz.r_plus - hz.r_minus
    lo = np.full_like(xs, hz.r_minus + 1e-15 * span)
    hi = np.full_like(xs, hz.r_plus - 1e-15 * span)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        acc = np.zeros_like(mid)
        for w, root in zip(chart.weights, hz.roots):
            if w != 0.0:
                acc += w * np.log((mid - root) / (hz.frak_r - root))
        takes_hi = acc < xs
        lo = np.where(takes_hi, mid, lo)
        hi = np.where(takes_hi, hi, mid)
    return 0.5 * (lo + hi)


def build_chart(
    params: SpacetimeParams,
    horizons: Horizons,
    *,
    series_terms: int = 12,
    table_points: int = 2048,
    newton_tol: float = 1e-13,
) -> RWChart:
    """Assemble the chart: weights, inverse series, threshold, seed table."""
    stub = _chart_stub(params, horizons)
    ser_p = lagrange_coefficients(params, horizons, +1, series_terms)
    ser_m = lagrange_coefficients(params, horizons, -1, series_terms)
    threshold = max(ser_p.use_threshold, ser_m.use_threshold)
    threshold = min(max(threshold, _THRESHOLD_FLOOR), _THRESHOLD_CEIL)

    x_core = threshold + 12.0
    xs = np.linspace(-x_core, x_core, table_points)
    rs = _bisect_r_of_x(stub, xs)

    return RWChart(
        params=params, horizons=horizons, weights=stub.weights,
        series_plus=ser_p, series_minus=ser_m,
        a_threshold=threshold,
        x_table=xs, r_table=rs,
        newton_tol=newton_tol, max_newton_iter=60,
    )


def _newton_r_of_x(chart: RWChart, x: float, r_seed: float | None = None) -> float:
    hz = chart.horizons
    span = hz.r_plus - hz.r_minus
    if r_seed is None:
        r_seed = float(np.interp(x, chart.x_table, chart.r_table))
    lo, hi = hz.r_minus, hz.r_plus
    r = min(max(r_seed, lo + 1e-15 * span), hi - 1e-15 * span)
    for _ in range(chart.max_newton_iter):
        resid = _x_of_r_unchecked(chart, r) - x
        f_val = float(metric_function(chart.params, r))
        step = resid * f_val  # dx/dr = 1/F
        if abs(resid) <= chart.newton_tol * (1.0 + abs(x)) and abs(step) <= 1e-12 * span:
            return r - step
        if resid > 0.0:
            hi = r
        else:
            lo = r
        r_new = r - step
        if not (lo < r_new < hi):
            r_new = 0.5 * (lo + hi)  # bisection fallback keeps the bracket
        if abs(r_new - r) <= 1e-16 * span + 1e-16 * abs(r):
            return r_new
        r = r_new
    raise ConvergenceFailure(f"r_of_x Newton stalled at x={x}; chart may be corrupt")


def r_of_x(chart: RWChart, x):
    """Inverse map; Newton in the core, series beyond ``a_threshold``."""
    if np.isscalar(x):
        xf = float(x)
        if xf > chart.a_threshold:
            return float(chart.series_plus.eval(xf))
        if xf < -chart.a_threshold:
            return float(chart.series_minus.eval(xf))
        return _newton_r_of_x(chart, xf)
    xs = np.asarray(x, dtype=float)
    out = np.empty_like(xs)
    flat_x = xs.ravel()
    flat_o = out.ravel()
    for i, xi in enumerate(flat_x):
        flat_o[i] = r_of_x(chart, float(xi))
    return out


def radius_evaluator(chart: RWChart) -> Callable[[float], float]:
    """Scalar r(x) closure with warm-started Newton, for ODE inner loops."""
    state = {"r": chart.horizons.frak_r, "x": 0.0}

    def ev(x: float) -> float:
        if x > chart.a_threshold:
            return float(chart.series_plus.eval(x))
        if x < -chart.a_threshold:
            return float(chart.series_minus.eval(x))
        seed = None
        if abs(x - state["x"]) < 2.0:
            f_val = float(metric_function(chart.params, state["r"]))
            seed = state["r"] + f_val * (x - state["x"])
        r = _newton_r_of_x(chart, x, r_seed=seed)
        state["r"] = r
        state["x"] = x
        return r

    return ev


def potentials_at(chart: RWChart, x) -> PotentialSample:
    """W0, W1, V, Vt at one x (scalar)."""
    r = r_of_x(chart, float(x))
    p = chart.params
    f = float(metric_function(p, r))
    fp = float(metric_function_deriv(p, r))
    return PotentialSample(
        W0=f / r**2,
        W1=(f / r) * fp + p.m**2 * f,
        V=1.0 / r,
        V_tilde=1.0 / r - 1.0 / chart.horizons.r_plus,
        V_minus_shifted=chart.v_minus_shifted,
    )


def potential_arrays(chart: RWChart, xs: np.ndarray):
    """Vectorized (W0, W1, V, Vt) over an x grid."""
    rs = r_of_x(chart, np.asarray(xs, dtype=float))
    p = chart.params
    f = metric_function(p, rs)
    fp = metric_function_deriv(p, rs)
    w0 = f / rs**2
    w1 = (f / rs) * fp + p.m**2 * f
    v = 1.0 / rs
    vt = v - 1.0 / chart.horizons.r_plus
    return w0, w1, v, vt


def w0_second_derivative_at_peak(chart: RWChart, h: float = 0.1) -> float:
    """W0''(0) by Richardson-extrapolated central differences on the chart."""

    def w0(x: float) -> float:
        return potentials_at(chart, x).W0

    w0_0 = w0(0.0)

    def d2(step: float) -> float:
        return (w0(step) - 2.0 * w0_0 + w0(-step)) / step**2

    coarse, fine = d2(h), d2(0.5 * h)
    return (4.0 * fine - coarse) / 3.0


def write_chart_csv(chart: RWChart, path, x_min: float, x_max: float, n: int) -> None:
    """Dump (x, r, W0, W1, V_tilde) rows for external plotting."""
    xs = np.linspace(x_min, x_max, n)
    w0, w1, _, vt = potential_arrays(chart, xs)
    rs = r_of_x(chart, xs)
    with open(path, "w") as fh:
        fh.write("x,r,W0,W1,V_tilde\n")
        for row in zip(xs, rs, w0, w1, vt):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
