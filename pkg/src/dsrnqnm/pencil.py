"""Jost solutions and Wronskian of the mode pencil P_ell - (z - s*Vt)^2.

Per angular mode ell the radial problem on the x-line is

    e'' = (Wt_ell(x) - (z - s*Vt(x))^2) e,
    Wt_ell = ell(ell+1) W0 + W1,

with the gauge-shifted Coulomb term Vt = 1/r - 1/r_plus, so Vt -> 0 at the
cosmological end and Vt -> vm := 1/r_minus - 1/r_plus at the horizon.  The
two Jost solutions are normalized to pure outgoing exponentials at the
cutoffs:

    e_plus(x)  ~ exp(+i z x)                 as x -> +inf,
    e_minus(x) ~ exp(-i (z - s*vm) x)        as x -> -inf,

and resonances are the zeros of their Wronskian
W(z) = e_plus e_minus' - e_plus' e_minus (x-independent).

Numerically each solution is integrated in envelope form,
e_plus = exp(izx) g(x) with g = 1, g' = 0 imposed at x = +X_plus (same on
the other side), which keeps every stored quantity O(1) across the strip:
the oscillatory factor is carried analytically, the free problem is exact,
and the Wronskian assembles directly from the envelopes with no large
cancellations.  The derivative dW/dz used by the resonance solver comes
from integrating the variational system alongside (exact to integrator
tolerance); see the module tests for the equivalence with complex
finite-difference quotients.

Construction is justified for Im z > -kappa (strip of the meromorphic
continuation); ``jost`` enforces Im z > -kappa(1 - margin).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._ode import BatchSolution, integrate_batch
from .errors import AtResonance, StripViolation, ValidationError
from .regge_wheeler import RWChart, potentials_at, radius_evaluator
from .spacetime import metric_function, metric_function_deriv

_DEFAULT_ODE_TOL = 1e-11
_DEFAULT_MARGIN = 0.05
_X_CAP = 200.0


@dataclass(frozen=True)
class ModeProblem:
    """Frozen per-(ell, parameters) context for pencil evaluations.

    ``x_plus``/``x_minus`` are the positive cutoff magnitudes where the
    asymptotic initial data are imposed; they satisfy the tail condition
    |Wt_ell| + |s|*|Vt - Vt(end)| < asymptotic_cut at the cutoff (or sit at
    the 200 cap).  ``w_override``/``v_override`` replace the physical
    potentials for test harnesses (e.g. the free problem); overrides take
    scalars and must decay at the cutoffs.
    """

    ell: int
    chart: RWChart | None
    x_plus: float
    x_minus: float
    ode_tol: float = _DEFAULT_ODE_TOL
    strip_margin: float = _DEFAULT_MARGIN
    asymptotic_cut: float = 0.0
    kappa_override: float | None = None
    w_override: Callable[[float], float] | None = None
    v_override: Callable[[float], float] | None = None
    v_minus_override: float | None = None

    @property
    def s(self) -> float:
        return self.chart.params.s if self.chart is not None else 0.0

    @property
    def kappa(self) -> float:
        if self.kappa_override is not None:
            return self.kappa_override
        return self.chart.horizons.kappa

    @property
    def v_minus(self) -> float:
        """Left limit of the shifted Coulomb potential."""
        if self.v_minus_override is not None:
            return self.v_minus_override
        return self.chart.v_minus_shifted

    def min_im(self) -> float:
        """Lower edge of the justified strip, -kappa*(1 - margin)."""
        if math.isinf(self.kappa):
            return -math.inf
        return -self.kappa * (1.0 - self.strip_margin)


def effective_potential(problem: ModeProblem, x):
    """Wt_ell(x) = ell(ell+1) W0 + W1 (or the harness override)."""
    if problem.w_override is not None:
        if np.isscalar(x):
            return problem.w_override(float(x))
        return np.array([problem.w_override(float(xi)) for xi in np.asarray(x, float)])
    ll = problem.ell * (problem.ell + 1)
    if np.isscalar(x):
        ps = potentials_at(problem.chart, float(x))
        return ll * ps.W0 + ps.W1
    from .regge_wheeler import potential_arrays

    w0, w1, _, _ = potential_arrays(problem.chart, np.asarray(x, float))
    return ll * w0 + w1


def _shifted_coulomb(problem: ModeProblem, x: float) -> float:
    if problem.v_override is not None:
        return problem.v_override(float(x))
    return potentials_at(problem.chart, float(x)).V_tilde


def _tail_measure(problem: ModeProblem, x: float, side: int) -> float:
    w = abs(effective_potential(problem, x))
    s = problem.s
    if s != 0.0:
        v_end = 0.0 if side > 0 else problem.v_minus
        w += abs(s) * abs(_shifted_coulomb(problem, x) - v_end)
    return w


def _find_cutoff(problem: ModeProblem, side: int, cut: float) -> float:
    lo, hi = 5.0, _X_CAP
    if _tail_measure(problem, side * hi, side) >= cut:
        return _X_CAP
    if _tail_measure(problem, side * lo, side) < cut:
        return lo
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _tail_measure(problem, side * mid, side) < cut:
            hi = mid
        else:
            lo = mid
    return hi


def build_mode_problem(
    chart: RWChart,
    ell: int,
    *,
    ode_tol: float = _DEFAULT_ODE_TOL,
    asymptotic_cut_scale: float = 1e-12,
    strip_margin: float = _DEFAULT_MARGIN,
) -> ModeProblem:
    """Choose the cutoffs for (chart, ell) and freeze the mode problem.

    The cutoff per side is the smallest |x| >= 5 where the tail measure
    |Wt_ell| + |s||Vt - Vt(end)| drops below 1e-12 * max(1, ell(ell+1)),
    capped at 200.
    """
    if ell < 0:
        raise ValidationError("ell must be a nonnegative integer")
    cut = asymptotic_cut_scale * max(1.0, float(ell * (ell + 1)))
    stub = ModeProblem(ell=ell, chart=chart, x_plus=0.0, x_minus=0.0, ode_tol=ode_tol)
    x_p = _find_cutoff(stub, +1, cut)
    x_m = _find_cutoff(stub, -1, cut)
    return ModeProblem(
        ell=ell, chart=chart, x_plus=x_p, x_minus=x_m,
        ode_tol=ode_tol, strip_margin=strip_margin, asymptotic_cut=cut,
    )


def free_mode_problem(*, x_inf: float = 12.0, ode_tol: float = _DEFAULT_ODE_TOL) -> ModeProblem:
    """Zero-potential harness: Wt = 0, Vt = 0, no strip restriction."""
    return ModeProblem(
        ell=0, chart=None, x_plus=x_inf, x_minus=x_inf,
        ode_tol=ode_tol, kappa_override=math.inf,
        w_override=lambda x: 0.0, v_override=lambda x: 0.0,
        v_minus_override=0.0,
    )


# --- envelope integration -------------------------------------------------


def _coefficient_functions(problem: ModeProblem):
    """Scalar (Wt(x), Vt(x)) evaluators, warm-started on the chart."""
    if problem.w_override is not None or problem.v_override is not None:
        w_ov = problem.w_override or (lambda x: 0.0)
        v_ov = problem.v_override or (lambda x: 0.0)
        return (lambda x: float(w_ov(x))), (lambda x: float(v_ov(x)))
    chart = problem.chart
    params = chart.params
    ll = float(problem.ell * (problem.ell + 1))
    m2 = params.m ** 2
    inv_rp = 1.0 / chart.horizons.r_plus
    r_eval = radius_evaluator(chart)

    cache: dict[float, tuple[float, float]] = {}

    def both(x: float) -> tuple[float, float]:
        got = cache.get(x)
        if got is not None:
            return got
        r = r_eval(x)
        f = float(metric_function(params, r))
        fp = float(metric_function_deriv(params, r))
        wt = ll * f / (r * r) + (f / r) * fp + m2 * f
        vt = 1.0 / r - inv_rp
        if len(cache) > 64:
            cache.clear()
        cache[x] = (wt, vt)
        return wt, vt

    return (lambda x: both(x)[0]), (lambda x: both(x)[1])


def _envelope_rhs(problem: ModeProblem, zs: np.ndarray, side: int, variational: bool):
    """RHS of the envelope system (g, g') [+ (g_z, g_z')].

    side +1: g'' = U g - 2 i z g',        U = Wt + 2 s z Vt - s^2 Vt^2
    side -1: g'' = U g + 2 i w g',        w = z - s*vm,
             U = Wt + 2 s z (Vt - vm) + s^2 (vm^2 - Vt^2)
    """
    w_fn, v_fn = _coefficient_functions(problem)
    s = problem.s
    vm = problem.v_minus
    zs = np.asarray(zs, dtype=complex)

    if side > 0:
        def rhs(x: float, y: np.ndarray) -> np.ndarray:
            wt = w_fn(x)
            vt = v_fn(x)
            u = wt + (2.0 * s * vt) * zs - (s * vt) ** 2
            out = np.empty_like(y)
            out[:, 0] = y[:, 1]
            out[:, 1] = u * y[:, 0] - (2j * zs) * y[:, 1]
            if variational:
                du = 2.0 * s * vt
                out[:, 2] = y[:, 3]
                out[:, 3] = u * y[:, 2] + du * y[:, 0] - (2j * zs) * y[:, 3] - 2j * y[:, 1]
            return out
    else:
        def rhs(x: float, y: np.ndarray) -> np.ndarray:
            wt = w_fn(x)
            vt = v_fn(x)
            dv = vt - vm
            u = wt + (2.0 * s * dv) * zs + s * s * (vm * vm - vt * vt)
            om = zs - s * vm
            out = np.empty_like(y)
            out[:, 0] = y[:, 1]
            out[:, 1] = u * y[:, 0] + (2j * om) * y[:, 1]
            if variational:
                du = 2.0 * s * dv
                out[:, 2] = y[:, 3]
                out[:, 3] = u * y[:, 2] + du * y[:, 0] + (2j * om) * y[:, 3] + 2j * y[:, 1]
            return out

    return rhs


def _check_strip(problem: ModeProblem, zs: np.ndarray) -> None:
    lo = problem.min_im()
    if np.any(np.asarray(zs).imag <= lo):
        raise StripViolation(
            f"Im z must exceed {lo} (kappa={problem.kappa}, margin={problem.strip_margin})"
        )


def _integrate_envelope(
    problem: ModeProblem,
    zs: np.ndarray,
    side: int,
    stop: float,
    record: Sequence[float] = (),
    variational: bool = False,
) -> BatchSolution:
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    n = len(zs)
    dim = 4 if variational else 2
    y0 = np.zeros((n, dim), dtype=complex)
    y0[:, 0] = 1.0
    x_start = problem.x_plus if side > 0 else -problem.x_minus
    rhs = _envelope_rhs(problem, zs, side, variational)
    freq = np.max(np.abs(zs)) + 1.0
    return integrate_batch(
        rhs, x_start, stop, y0,
        rtol=problem.ode_tol, atol=problem.ode_tol,
        record_xs=record,
        first_step=0.05 / freq,
        max_step=10.0,
    )


@dataclass(frozen=True)
class JostSolution:
    """One Jost solution sampled on query points.

    ``values``/``derivatives`` are the solution e and e' (the envelope g
    and the analytic oscillatory factor recombined); ``envelope`` and
    ``envelope_prime`` expose g, g' for scale-free work.  ``exp2`` is the
    power-of-two renormalization exponent (0 unless the integrator had to
    rescale; then true values carry an extra 2**exp2).
    """

    side: int
    z: complex
    asymptotic_frequency: complex
    xs: np.ndarray
    envelope: np.ndarray
    envelope_prime: np.ndarray
    exp2: np.ndarray
    rescaled: bool

    @property
    def values(self) -> np.ndarray:
        phase = np.exp(1j * self.side * self.asymptotic_frequency * self.xs)
        return self.envelope * phase * np.exp2(self.exp2.astype(float))

    @property
    def derivatives(self) -> np.ndarray:
        om = self.asymptotic_frequency
        phase = np.exp(1j * self.side * om * self.xs)
        dpart = self.envelope_prime + 1j * self.side * om * self.envelope
        return dpart * phase * np.exp2(self.exp2.astype(float))


def jost(problem: ModeProblem, z: complex, side: int, query_points: Sequence[float]) -> JostSolution:
    """Integrate one Jost solution inward and sample it on query points.

    ``side`` is +1 (outgoing at the cosmological end, e ~ exp(izx)) or -1
    (outgoing at the event horizon, e ~ exp(-i(z - s*vm)x)).  All query
    points must lie between the side's cutoff and the opposite cutoff.
    """
    if side not in (+1, -1):
        raise ValidationError("side must be +1 or -1")
    _check_strip(problem, z)
    qs = np.asarray(sorted(set(float(q) for q in query_points)), dtype=float)
    if side > 0:
        if np.any(qs > problem.x_plus) or np.any(qs < -problem.x_minus):
            raise ValidationError("query points outside the integration range")
        stop = float(qs.min())
    else:
        if np.any(qs > problem.x_plus) or np.any(qs < -problem.x_minus):
            raise ValidationError("query points outside the integration range")
        stop = float(qs.max())
    sol = _integrate_envelope(problem, np.array([z]), side, stop, record=list(qs))
    order = np.argsort(sol.record_xs)
    xs = sol.record_xs[order]
    env = sol.record_ys[order, 0, 0]
    envp = sol.record_ys[order, 0, 1]
    exp2 = sol.record_exp2[order, 0]
    om = z if side > 0 else z - problem.s * problem.v_minus
    return JostSolution(
        side=side, z=complex(z), asymptotic_frequency=complex(om),
        xs=xs, envelope=env, envelope_prime=envp, exp2=exp2,
        rescaled=sol.rescaled,
    )


@dataclass(frozen=True)
class WronskianValue:
    """W(z) with diagnostics.

    ``value`` is the Wronskian in the Jost normalization above; ``scale``
    is |e+||e-'| + |e+'||e-| at the reference point, so
    ``residual = |value|/scale`` is a dimensionless cancellation measure
    (order 1 away from resonances, tiny at them).  ``spread`` is the
    relative x-independence defect over the diagnostic points (nan when
    not requested).  ``exp2`` carries power-of-two rescaling (0 normally;
    ratios of values with equal exp2 are exact).
    """

    z: complex
    value: complex
    derivative: complex | None
    scale: float
    spread: float
    exp2: int

    @property
    def residual(self) -> float:
        return abs(self.value) / self.scale if self.scale > 0.0 else math.inf


def _combine(problem, zs, yp, ym, ep, em, x0):
    """Assemble W, dW/dz, scale at reference point x0 from both envelopes."""
    s = problem.s
    vm = problem.v_minus
    om = zs - s * vm
    gp, gpp = yp[:, 0], yp[:, 1]
    gm, gmp = ym[:, 0], ym[:, 1]
    bracket = gp * (gmp - 1j * om * gm) - (gpp + 1j * zs * gp) * gm
    phase = np.exp(1j * (s * vm) * x0)
    w = bracket * phase
    # dimensionless residual scale from the materialized factors
    amp_p = np.exp(-np.imag(zs) * x0)
    amp_m = np.exp(+np.imag(om) * x0)
    scale = (np.abs(gp) * np.abs(gmp - 1j * om * gm)
             + np.abs(gpp + 1j * zs * gp) * np.abs(gm)) * amp_p * amp_m
    dw = None
    if yp.shape[1] == 4:
        gpz, gppz = yp[:, 2], yp[:, 3]
        gmz, gmpz = ym[:, 2], ym[:, 3]
        dbracket = (
            gpz * (gmp - 1j * om * gm)
            + gp * (gmpz - 1j * gm - 1j * om * gmz)
            - (gppz + 1j * gp + 1j * zs * gpz) * gm
            - (gpp + 1j * zs * gp) * gmz
        )
        dw = dbracket * phase
    return w, dw, scale, (ep + em)


def wronskian_batch(
    problem: ModeProblem,
    zs,
    *,
    derivative: bool = False,
    x0: float = 0.0,
):
    """Vectorized W (and optionally dW/dz) at one reference point.

    Returns (w, dw, scale, exp2) arrays aligned with ``zs``; ``dw`` is None
    unless requested.  True values are w * 2.0**exp2 (exp2 is 0 unless the
    envelope had to be renormalized mid-integration).
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    _check_strip(problem, zs)
    sol_p = _integrate_envelope(problem, zs, +1, x0, variational=derivative)
    sol_m = _integrate_envelope(problem, zs, -1, x0, variational=derivative)
    w, dw, scale, exp2 = _combine(
        problem, zs, sol_p.y_final, sol_m.y_final, sol_p.exp2_final, sol_m.exp2_final, x0
    )
    return w, dw, scale, exp2


def wronskian(
    problem: ModeProblem,
    z: complex,
    *,
    derivative: bool = False,
    diagnostic_points: Sequence[float] = (-5.0, 0.0, 5.0),
) -> WronskianValue:
    """W(z) evaluated at x0 = 0 with an x-independence diagnostic.

    The Wronskian is evaluated at every point of ``diagnostic_points``
    (all must lie inside the cutoffs); ``spread`` reports the maximum
    relative deviation across them.  The returned value is the one at the
    point closest to 0.
    """
    zarr = np.array([z], dtype=complex)
    _check_strip(problem, zarr)
    pts = sorted(set(float(p) for p in diagnostic_points))
    sol_p = _integrate_envelope(problem, zarr, +1, min(pts), record=pts, variational=derivative)
    sol_m = _integrate_envelope(problem, zarr, -1, max(pts), record=pts, variational=derivative)
    order_p = np.argsort(sol_p.record_xs)
    order_m = np.argsort(sol_m.record_xs)
    values, scales, exps, dvals = [], [], [], []
    for i, x0 in enumerate(pts):
        ip = order_p[np.searchsorted(sol_p.record_xs[order_p], x0)]
        im = order_m[np.searchsorted(sol_m.record_xs[order_m], x0)]
        w, dw, sc, ex = _combine(
            problem, zarr,
            sol_p.record_ys[ip], sol_m.record_ys[im],
            sol_p.record_exp2[ip], sol_m.record_exp2[im],
            x0,
        )
        values.append(w[0])
        scales.append(sc[0])
        exps.append(int(ex[0]))
        dvals.append(None if dw is None else dw[0])
    values = np.array(values)
    if len(pts) > 1 and all(e == exps[0] for e in exps):
        ref = np.max(np.abs(values))
        spread = float(np.max(np.abs(values - values[np.argmin(np.abs(pts))])) / ref) if ref > 0 else 0.0
    else:
        spread = math.nan
    i0 = int(np.argmin(np.abs(pts)))
    return WronskianValue(
        z=complex(z), value=complex(values[i0]),
        derivative=dvals[i0], scale=float(scales[i0]),
        spread=spread, exp2=exps[i0],
    )


def resolvent_kernel(
    problem: ModeProblem,
    z: complex,
    x,
    y,
    *,
    at_resonance_tol: float = 1e-8,
):
    """Kernel K(z; x, y) of the pencil inverse from the Jost pair.

    K = (e+(max) e-(min)) / W with the convention K(x,y) = K(y,x); raises
    ``AtResonance`` when the normalized Wronskian residual is below
    ``at_resonance_tol``.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    pts = sorted(set(np.concatenate([xs, ys]).tolist()) | {0.0})
    jp = jost(problem, z, +1, pts)
    jm = jost(problem, z, -1, pts)
    wv = wronskian(problem, z, diagnostic_points=(0.0,))
    if wv.residual < at_resonance_tol:
        raise AtResonance(f"|W| residual {wv.residual} below {at_resonance_tol} at z={z}")

    def ev(sol: JostSolution, q: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(sol.xs, q)
        return sol.values[idx]

    hi = np.maximum(xs, ys)
    lo = np.minimum(xs, ys)
    out = ev(jp, hi) * ev(jm, lo) / wv.value
    return out[0] if (np.isscalar(x) and np.isscalar(y)) else out


def write_wronskian_map(
    problem: ModeProblem,
    path,
    re_range: tuple[float, float, int],
    im_range: tuple[float, float, int],
) -> None:
    """Dump (Re z, Im z, Re W, Im W, |W|) on a rectangular grid as CSV."""
    res = np.linspace(*re_range)
    ims = np.linspace(*im_range)
    with open(path, "w") as fh:
        fh.write("re_z,im_z,re_w,im_w,abs_w\n")
        for b in ims:
            zs = res + 1j * b
            w, _, _, exp2 = wronskian_batch(problem, zs)
            w = w * np.exp2(exp2.astype(float))
            for zr, wv in zip(res, w):
                fh.write(
                    f"{zr!r},{b!r},{wv.real!r},{wv.imag!r},{abs(wv)!r}\n"
                )
