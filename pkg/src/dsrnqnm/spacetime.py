"""Black-hole geometry: metric function, horizons, surface gravities.

Conventions (geometric units): the static exterior metric is governed by

    F(r) = 1 - 2M/r + Q**2/r**2 - Lambda*r**2/3

with mass M > 0, electric charge Q, cosmological constant Lambda > 0.
``r**2 * F(r)`` is a quartic with four distinct real roots

    r_n < 0 <= r_c < r_minus < r_plus

once the parameter window enforced by :func:`validate_params` holds; F is
positive between the event horizon ``r_minus`` and the cosmological horizon
``r_plus``.  The Q = 0 limit is supported as a documented degenerate case
with ``r_c = 0`` exactly and the remaining three roots from a cubic.

Everything in this module is immutable after construction and safe to
share across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from typing import Mapping

import numpy as np

from .errors import (
    DegenerateRoots,
    DeltaViolation,
    MassWindowViolation,
    NariaiViolation,
    NonPositive,
    ValidationError,
)

ROOT_LABELS = ("n", "c", "-", "+")

#: documented flat-config keys for parameter ingestion
CONFIG_KEYS = ("mass", "bh_charge", "lambda", "field_charge", "field_mass")


@dataclass(frozen=True)
class SpacetimeParams:
    """Validated physical parameters of the problem.

    ``s = q*Q`` is the charge product that couples the field to the
    black-hole charge; it is stored explicitly so downstream code never
    recomputes it inconsistently.  ``delta``, ``M1`` and ``M2`` record the
    quantities used by the admissibility window.
    """

    M: float
    Q: float
    Lambda: float
    q: float
    m: float
    s: float
    delta: float
    M1: float
    M2: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Horizons:
    """Roots of r**2 F(r), partial-fraction data and derived scales.

    ``A`` maps the root label alpha in {"n", "c", "-", "+"} to
    ``A_alpha = prod_{beta != alpha} (r_alpha - r_beta)**-1``.  The surface
    gravities are ``kappa_pm = F'(r_pm)/2`` (kappa_minus > 0 at the event
    horizon, kappa_plus < 0 at the cosmological horizon) and
    ``kappa = min(kappa_minus, |kappa_plus|)`` bounds the resonance strip.
    ``frak_r`` is the photon-sphere radius, the unique maximum of F/r**2.
    """

    r_n: float
    r_c: float
    r_minus: float
    r_plus: float
    A: Mapping[str, float]
    kappa_minus: float
    kappa_plus: float
    kappa: float
    frak_r: float
    q_zero_degenerate: bool

    @property
    def roots(self) -> tuple[float, float, float, float]:
        return (self.r_n, self.r_c, self.r_minus, self.r_plus)

    def coefficient(self, label: str) -> float:
        return self.A[label]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["A"] = dict(self.A)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def validate_params(
    M: float,
    Q: float,
    Lambda: float,
    q: float,
    m: float,
) -> SpacetimeParams:
    """Validate raw parameters and return a :class:`SpacetimeParams`.

    Enforces, in order:

    * finiteness of every field and M, Lambda, m > 0 (``NonPositive``);
    * Delta = 1 - 4*Lambda*Q**2 > 0 (``DeltaViolation``);
    * M strictly inside (M1, M2) where
      ``m_k = sqrt((1 + (-1)**k sqrt(Delta)) / (2 Lambda))`` and
      ``M_k = m_k - (2/3) Lambda m_k**3`` (``MassWindowViolation``);
    * 9*Lambda*M**2 < 1 (``NariaiViolation``).

    Together these guarantee the four distinct roots of r**2 F(r) and the
    positivity of F on the exterior.
    """
    raw = (M, Q, Lambda, q, m)
    if not all(math.isfinite(v) for v in raw):
        raise ValidationError(f"non-finite parameter in {raw!r}")
    if M <= 0.0 or Lambda <= 0.0 or m <= 0.0:
        raise NonPositive(f"require M, Lambda, m > 0, got M={M}, Lambda={Lambda}, m={m}")

    delta = 1.0 - 4.0 * Lambda * Q * Q
    if delta <= 0.0:
        raise DeltaViolation(f"4*Lambda*Q^2 = {4.0 * Lambda * Q * Q} >= 1")

    sqrt_delta = math.sqrt(delta)
    m1 = math.sqrt((1.0 - sqrt_delta) / (2.0 * Lambda))
    m2 = math.sqrt((1.0 + sqrt_delta) / (2.0 * Lambda))
    M1 = m1 - (2.0 / 3.0) * Lambda * m1**3
    M2 = m2 - (2.0 / 3.0) * Lambda * m2**3
    if not (M1 < M < M2):
        raise MassWindowViolation(f"M={M} outside open window ({M1}, {M2})")
    if 9.0 * Lambda * M * M >= 1.0:
        raise NariaiViolation(f"9*Lambda*M^2 = {9.0 * Lambda * M * M} >= 1")

    return SpacetimeParams(
        M=float(M), Q=float(Q), Lambda=float(Lambda), q=float(q), m=float(m),
        s=float(q) * float(Q), delta=delta, M1=M1, M2=M2,
    )


def params_from_mapping(cfg: Mapping[str, float]) -> SpacetimeParams:
    """Build parameters from the flat config keys (see ``CONFIG_KEYS``)."""
    missing = [k for k in CONFIG_KEYS if k not in cfg]
    if missing:
        raise ValidationError(f"missing config keys: {missing}")
    return validate_params(
        M=float(cfg["mass"]),
        Q=float(cfg["bh_charge"]),
        Lambda=float(cfg["lambda"]),
        q=float(cfg["field_charge"]),
        m=float(cfg["field_mass"]),
    )


def metric_function(params: SpacetimeParams, r):
    """F(r) = 1 - 2M/r + Q^2/r^2 - Lambda r^2 / 3.  Total on r != 0."""
    r = np.asarray(r, dtype=float) if not np.isscalar(r) else r
    return 1.0 - 2.0 * params.M / r + params.Q**2 / r**2 - params.Lambda * r**2 / 3.0


def metric_function_deriv(params: SpacetimeParams, r):
    """F'(r) = 2M/r^2 - 2Q^2/r^3 - 2 Lambda r / 3."""
    return 2.0 * params.M / r**2 - 2.0 * params.Q**2 / r**3 - 2.0 * params.Lambda * r / 3.0


def photon_sphere_radius(params: SpacetimeParams) -> float:
    """Radius of the unstable null circular orbit, (3M + sqrt(9M^2-8Q^2))/2."""
    return 0.5 * (3.0 * params.M + math.sqrt(9.0 * params.M**2 - 8.0 * params.Q**2))


def _quartic_coefficients(params: SpacetimeParams) -> np.ndarray:
    # monic quartic with the same roots as r^2 F(r):
    #   r^4 - (3/Lambda) r^2 + (6M/Lambda) r - 3 Q^2 / Lambda
    lam = params.Lambda
    return np.array([1.0, 0.0, -3.0 / lam, 6.0 * params.M / lam, -3.0 * params.Q**2 / lam])


def _polish_root(coeffs: np.ndarray, r0: float, max_iter: int = 60) -> float:
    """Newton-polish a simple real root of the monic polynomial ``coeffs``."""
    dcoeffs = np.polyder(coeffs)
    r = float(r0)
    for _ in range(max_iter):
        p = float(np.polyval(coeffs, r))
        dp = float(np.polyval(dcoeffs, r))
        if dp == 0.0:
            break
        step = p / dp
        r -= step
        if abs(step) <= 1e-16 * (1.0 + abs(r)):
            break
    return r


def horizon_roots(params: SpacetimeParams, *, degenerate_tol: float = 1e-9) -> Horizons:
    """Solve for the four roots and assemble all derived horizon data.

    Roots come from companion-matrix eigenvalues (``numpy.roots``) and are
    polished with Newton on the monic quartic; for Q = 0, ``r_c = 0`` is
    exact and the three remaining roots come from the cubic factor.

    Raises ``DegenerateRoots`` if two roots approach within
    ``degenerate_tol`` relative to the root spread (the documented Q = 0
    coincidence r_c = 0 is exempt).
    """
    lam = params.Lambda
    q_zero = params.Q == 0.0
    if q_zero:
        cubic = np.array([1.0, 0.0, -3.0 / lam, 6.0 * params.M / lam])
        raw = np.roots(cubic)
        polish_on = cubic
    else:
        quartic = _quartic_coefficients(params)
        raw = np.roots(quartic)
        polish_on = quartic

    if np.max(np.abs(raw.imag)) > 1e-6 * np.max(np.abs(raw)):
        raise DegenerateRoots(f"complex root pair in {raw!r}; parameters too close to extremality")
    roots = sorted(_polish_root(polish_on, float(r)) for r in raw.real)
    if q_zero:
        roots = [roots[0], 0.0, roots[1], roots[2]]

    r_n, r_c, r_minus, r_plus = roots
    spread = r_plus - r_n
    gaps = np.diff(roots)
    if np.min(gaps) < degenerate_tol * spread and not (q_zero and np.argmin(gaps) == 0):
        raise DegenerateRoots(f"root gap {np.min(gaps)} below tolerance for roots {roots}")
    if not (r_n < 0.0 <= r_c < r_minus < r_plus):
        raise DegenerateRoots(f"unexpected root ordering {roots}")

    A = {}
    for i, label in enumerate(ROOT_LABELS):
        prod = 1.0
        for j, other in enumerate(roots):
            if j != i:
                prod *= roots[i] - other
        A[label] = 1.0 / prod

    kappa_minus = 0.5 * float(metric_function_deriv(params, r_minus))
    kappa_plus = 0.5 * float(metric_function_deriv(params, r_plus))
    if not (kappa_minus > 0.0 > kappa_plus):
        raise DegenerateRoots(
            f"surface gravities have wrong signs: {kappa_minus}, {kappa_plus}"
        )
    # cross-check against the partial-fraction form -Lambda/(6 A_pm r_pm^2)
    for label, r_h, kap in (("-", r_minus, kappa_minus), ("+", r_plus, kappa_plus)):
        alt = -lam / (6.0 * A[label] * r_h**2)
        if abs(alt - kap) > 1e-6 * abs(kap):
            raise DegenerateRoots(
                f"surface-gravity formulas disagree at r_{label}: {kap} vs {alt}"
            )

    return Horizons(
        r_n=r_n, r_c=r_c, r_minus=r_minus, r_plus=r_plus,
        A=A,
        kappa_minus=kappa_minus,
        kappa_plus=kappa_plus,
        kappa=min(kappa_minus, abs(kappa_plus)),
        frak_r=photon_sphere_radius(params),
        q_zero_degenerate=q_zero,
    )


def surface_gravity_from_coefficients(params: SpacetimeParams, horizons: Horizons, label: str) -> float:
    """kappa_pm via -Lambda/(6 A_pm r_pm^2); cross-check for F'(r_pm)/2."""
    r_h = horizons.r_minus if label == "-" else horizons.r_plus
    return -params.Lambda / (6.0 * horizons.A[label] * r_h**2)


def inverse_metric_partial_fractions(params: SpacetimeParams, horizons: Horizons, r):
    """Evaluate -(3 r^2 / Lambda) * sum_alpha A_alpha / (r - r_alpha).

    This equals 1/F(r) identically; exposed so tests can measure the
    identity residual.
    """
    r = np.asarray(r, dtype=float)
    acc = np.zeros_like(r)
    for label, root in zip(ROOT_LABELS, horizons.roots):
        acc += horizons.A[label] / (r - root)
    return -(3.0 * r**2 / params.Lambda) * acc


def schwarzschild_de_sitter_horizons_closed_form(params: SpacetimeParams) -> tuple[float, float]:
    """Closed-form (r_minus, r_plus) for Q = 0 via the trigonometric cubic solution.

    With alpha = 3 sqrt(Lambda) M, the cubic r^3 - (3/Lambda) r + 6M/Lambda
    is solved exactly by r = (2/sqrt(Lambda)) sin(theta), sin(3 theta) = alpha,
    equivalently r_pm = (2/sqrt(Lambda)) Im((mp sqrt(1-alpha^2) + i alpha)^(1/3)).
    Only valid for Q = 0.
    """
    if params.Q != 0.0:
        raise ValidationError("closed form only valid for Q = 0")
    alpha = 3.0 * math.sqrt(params.Lambda) * params.M
    out = []
    for sign in (-1.0, +1.0):
        w = complex(sign * math.sqrt(1.0 - alpha * alpha), alpha)
        out.append(2.0 * (w ** (1.0 / 3.0)).imag / math.sqrt(params.Lambda))
    r_minus, r_plus = sorted(out)
    return r_minus, r_plus
