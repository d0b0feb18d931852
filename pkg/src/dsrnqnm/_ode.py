"""Batched adaptive Dormand-Prince 5(4) integration over a shared x-axis.

The pencil solver evaluates many Jost integrations at once (Newton seeds,
contour samples).  All batch members share the same coefficient functions
of x up to their spectral parameter, so one shared step sequence driven by
the worst member is both correct and fast: the state is a complex array of
shape (batch, dim) and each Runge-Kutta stage is a single vectorized RHS
call.

Step control: embedded 5(4) error estimate, scaled by atol + rtol*|y|,
worst component over the whole batch; standard safety/clip factors.  The
integrator can land exactly on requested record points and optionally
renormalizes a batch member by an exact power of two when its magnitude
approaches overflow; the accumulated exponent is reported so callers can
restore true scales (phases are never touched by the renormalization).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import IntegratorFailure

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1.0 / 5.0]),
    np.array([3.0 / 40.0, 9.0 / 40.0]),
    np.array([44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0]),
    np.array([19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0]),
    np.array([9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0]),
    np.array([35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0]),
]
_B5 = np.array([35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0])
_B4 = np.array([5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0,
                -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0])
_ERR = _B5 - _B4

_RENORM_LIMIT = 1e200


@dataclass
class BatchSolution:
    """Integration output: snapshots at the record points plus final state."""

    record_xs: np.ndarray          # shape (n_rec,)
    record_ys: np.ndarray          # shape (n_rec, batch, dim)
    record_exp2: np.ndarray        # shape (n_rec, batch) int, power-of-two offsets
    y_final: np.ndarray            # shape (batch, dim)
    exp2_final: np.ndarray         # shape (batch,) int
    n_steps: int
    n_rejected: int

    @property
    def rescaled(self) -> bool:
        return bool(np.any(self.exp2_final != 0) or np.any(self.record_exp2 != 0))


def integrate_batch(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    x0: float,
    x1: float,
    y0: np.ndarray,
    *,
    rtol: float,
    atol: float,
    record_xs: Sequence[float] = (),
    max_step: float = 10.0,
    first_step: float | None = None,
    max_steps: int = 2_000_000,
) -> BatchSolution:
    """Integrate y' = rhs(x, y) from x0 to x1 with shared adaptive steps.

    ``record_xs`` must lie between x0 and x1 (inclusive) and is visited in
    integration order; the true state at a record point is
    ``record_ys[i] * 2.0**record_exp2[i][:, None]``.
    """
    y = np.array(y0, dtype=complex)
    if y.ndim != 2:
        raise ValueError("y0 must have shape (batch, dim)")
    batch, _ = y.shape
    exp2 = np.zeros(batch, dtype=np.int64)

    direction = 1.0 if x1 >= x0 else -1.0
    span = abs(x1 - x0)
    if span == 0.0:
        rec = np.array(sorted(record_xs, reverse=direction < 0), dtype=float)
        ys = np.repeat(y[None, :, :], len(rec), axis=0)
        ex = np.repeat(exp2[None, :], len(rec), axis=0)
        return BatchSolution(rec, ys, ex, y, exp2, 0, 0)

    records = np.array(sorted(record_xs, reverse=direction < 0), dtype=float)
    for r in records:
        if (r - x0) * direction < -1e-12 * span or (x1 - r) * direction < -1e-12 * span:
            raise ValueError(f"record point {r} outside [{x0}, {x1}]")
    rec_ys = np.empty((len(records), batch, y.shape[1]), dtype=complex)
    rec_ex = np.empty((len(records), batch), dtype=np.int64)
    next_rec = 0

    def snapshot_if_due(x: float) -> None:
        nonlocal next_rec
        while next_rec < len(records) and (x - records[next_rec]) * direction >= -1e-12 * span:
            rec_ys[next_rec] = y
            rec_ex[next_rec] = exp2
            next_rec += 1

    x = x0
    snapshot_if_due(x)

    h = first_step if first_step is not None else min(max_step, span / 100.0)
    h = min(h, max_step)
    k = np.empty((7, batch, y.shape[1]), dtype=complex)
    n_steps = n_rejected = 0
    h_floor = 1e-14 * span

    while (x1 - x) * direction > 1e-14 * span:
        if n_steps + n_rejected > max_steps:
            raise IntegratorFailure(f"step budget {max_steps} exhausted at x={x}")
        h = min(h, max_step)
        # land exactly on the next record point / endpoint
        target = records[next_rec] if next_rec < len(records) else x1
        dist = (target - x) * direction
        h_eff = min(h, dist)
        hs = h_eff * direction

        k[0] = rhs(x, y)
        for i in range(1, 7):
            yi = y + hs * np.tensordot(_A[i], k[:i], axes=(0, 0))
            k[i] = rhs(x + _C[i] * hs, yi)
        y_new = y + hs * np.tensordot(_B5, k, axes=(0, 0))
        err_vec = hs * np.tensordot(_ERR, k, axes=(0, 0))
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale))

        if err <= 1.0 or h_eff <= h_floor:
            x = x + hs
            y = y_new
            n_steps += 1
            # renormalize members drifting toward overflow (exact powers of 2)
            mags = np.max(np.abs(y), axis=1)
            big = mags > _RENORM_LIMIT
            if np.any(big):
                shift = np.where(big, np.frexp(mags)[1], 0).astype(np.int64)
                y = y * np.exp2(-shift)[:, None]
                exp2 = exp2 + shift
            snapshot_if_due(x)
            if err == 0.0:
                h = h_eff * 6.0
            else:
                h = h_eff * min(6.0, max(0.25, 0.9 * err ** -0.2))
        else:
            n_rejected += 1
            h = h_eff * max(0.1, 0.9 * err ** -0.2)
            if h <= h_floor:
                raise IntegratorFailure(f"step underflow at x={x} (err={err})")

    snapshot_if_due(x1)
    if next_rec != len(records):
        raise IntegratorFailure("record points missed; inconsistent direction")
    return BatchSolution(records, rec_ys, rec_ex, y, exp2, n_steps, n_rejected)
