"""Relaxation-limit study: slow-time-scaled solutions against the drift limit.

The scaled solution at slow time t is the gas solution at t/tau with the
velocity amplified by 1/tau; its potential weights are computed directly
from (tau, t) so that nothing overflows as tau shrinks. The convergence
study tabulates sup errors of the scaled mass on a shock-free grid and of
the scaled cluster velocities at the drift clusters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .drift import drift_cluster_snapshot, eval_mbar_grid
from .errors import TauOutOfRange
from .euler_poisson import _frame, _hull_clusters, _velocity_from_frame
from .measure import InitialData
from .potentials import PotentialCoefficients, minimize_Fbar

__all__ = ["RelaxationReport", "eval_scaled", "convergence_study", "scaled_cluster_snapshot"]

# monotone-decrease assertion allows this multiplicative slack per step,
# plus an additive floor so errors at roundoff level compare as equal
MONOTONE_SLACK = 1.05
MONOTONE_FLOOR = 1e-12


@dataclass(frozen=True)
class RelaxationReport:
    """Per-tau sup errors of the scaled solution against the drift limit."""

    t: float
    tau_sequence: tuple
    err_m: tuple
    err_u: tuple
    grid: tuple
    monotone_m: bool
    monotone_u: bool
    decay_ratios_m: tuple = field(default=())
    decay_ratios_u: tuple = field(default=())

    @property
    def passed(self) -> bool:
        return self.monotone_m and self.monotone_u

    def rows(self):
        for tau, em, eu in zip(self.tau_sequence, self.err_m, self.err_u):
            yield tau, em, eu


def _check_tau(tau: float):
    if not 0.0 < tau <= 1.0:
        raise TauOutOfRange(f"tau must lie in (0, 1], got {tau}")


def eval_scaled(data: InitialData, x: float, t: float, tau: float):
    """(m_tau, u_tau, q_tau/tau) of the slow-time-scaled solution at (x, t)."""
    _check_tau(tau)
    scaled = data.with_tau(tau)
    coeffs = PotentialCoefficients.scaled(tau, t)
    frame = _frame(scaled, None, coeffs=coeffs)
    _, k_min, _ = frame.argmin(x)
    u, _, _, _ = _velocity_from_frame(frame, scaled, x)
    return float(frame.P[k_min]), u / tau, float(frame.Q[k_min]) / tau


def scaled_cluster_snapshot(data: InitialData, t: float, tau: float):
    """(lo, hi, position, velocity/tau) clusters of the scaled solution."""
    _check_tau(tau)
    scaled = data.with_tau(tau)
    coeffs = PotentialCoefficients.scaled(tau, t)
    frame = _frame(scaled, None, coeffs=coeffs)
    return [(lo, hi, pos, vel / tau) for lo, hi, pos, vel in _hull_clusters(frame)]


def _filtered_grid(measure, xs, t):
    """Drop grid points sitting exactly on a drift shock, where m is one-sided."""
    keep = []
    for x in np.asarray(xs, dtype=float):
        if not minimize_Fbar(measure, float(x), t).has_jump:
            keep.append(float(x))
    return np.array(keep)


def convergence_study(
    data: InitialData, t: float, x_grid, tau_sequence
) -> RelaxationReport:
    """Tabulate err_m(tau) on the shock-free grid and err_u(tau) at drift clusters.

    The velocity comparison pairs each drift cluster with the nearest
    cluster of the scaled solution, since at finite tau the concentration
    sits at a slightly shifted position.
    """
    measure = data.measure
    taus = [float(v) for v in tau_sequence]
    for tau in taus:
        _check_tau(tau)
    grid = _filtered_grid(measure, x_grid, t)
    mbar = eval_mbar_grid(measure, grid, t)
    drift_clusters = drift_cluster_snapshot(measure, t)

    err_m = []
    err_u = []
    for tau in taus:
        scaled = data.with_tau(tau)
        coeffs = PotentialCoefficients.scaled(tau, t)
        frame = _frame(scaled, None, coeffs=coeffs)
        if grid.size:
            _, k_min, _ = frame.argmin_grid(grid)
            err_m.append(float(np.max(np.abs(frame.P[k_min] - mbar))))
        else:
            err_m.append(0.0)
        clusters = [
            (pos, vel / tau) for _, _, pos, vel in _hull_clusters(frame)
        ]
        worst = 0.0
        for c in drift_clusters:
            pos, vel = min(clusters, key=lambda pv: abs(pv[0] - c.position))
            worst = max(worst, abs(vel - c.velocity))
        err_u.append(worst)

    def monotone(errs):
        return all(
            b <= MONOTONE_SLACK * a + MONOTONE_FLOOR
            for a, b in zip(errs[:-1], errs[1:])
        )

    def ratios(errs):
        return tuple(
            (b / a) if a > 0.0 else 0.0 for a, b in zip(errs[:-1], errs[1:])
        )

    return RelaxationReport(
        t=t,
        tau_sequence=tuple(taus),
        err_m=tuple(err_m),
        err_u=tuple(err_u),
        grid=tuple(grid.tolist()),
        monotone_m=monotone(err_m),
        monotone_u=monotone(err_u),
        decay_ratios_m=ratios(err_m),
        decay_ratios_u=ratios(err_u),
    )
