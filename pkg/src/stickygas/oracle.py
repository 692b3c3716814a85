"""Event-driven sticky-particle reference simulator.

Independent brute-force layer used to validate every formula-layer output.
Clusters follow closed-form trajectories between collisions (damped motion
under the piecewise-constant self-attraction for the gas, straight lines
for the drift dynamics); collision times are bracketed and bisected on the
closed forms, and colliding clusters merge conserving mass and momentum.

This module deliberately shares nothing with the potential-minimization
layer except the input data model.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import (
    EventHorizonExceeded,
    IdentityViolation,
    NoClusterAt,
    NonPositiveTime,
    RootBracketFailure,
)
from .measure import AtomicMeasure, InitialData

__all__ = [
    "OracleCluster",
    "ClusterState",
    "MergeEvent",
    "Trajectory",
    "simulate_ep",
    "simulate_drift",
    "oracle_cdf",
    "oracle_velocity",
]

_ROOT_REL_TOL = 1e-13
_EXP_FLUSH = 700.0


def _exp_neg(z):
    return math.exp(-z) if z <= _EXP_FLUSH else 0.0


def _em1(z):
    """1 - e^{-z}, accurate near zero."""
    return -math.expm1(-z) if z <= _EXP_FLUSH else 1.0


@dataclass(frozen=True)
class OracleCluster:
    """One cluster: atoms lo..hi-1 merged at position with common velocity."""

    position: float
    mass: float
    velocity: float
    lo: int
    hi: int


@dataclass(frozen=True)
class ClusterState:
    """Snapshot of all clusters at one time, ordered by position."""

    time: float
    clusters: tuple

    def positions(self):
        return np.array([c.position for c in self.clusters])

    def masses(self):
        return np.array([c.mass for c in self.clusters])

    def velocities(self):
        return np.array([c.velocity for c in self.clusters])

    def momentum(self) -> float:
        return float(sum(c.mass * c.velocity for c in self.clusters))

    def mtilde(self):
        """Centered cumulative mass at each cluster: prefix + own/2 - M/2."""
        w = self.masses()
        prefix = np.concatenate(([0.0], np.cumsum(w)))
        return prefix[:-1] + 0.5 * w - 0.5 * prefix[-1]


@dataclass(frozen=True)
class MergeEvent:
    """One collision: the ranges merged and the resulting cluster range."""

    time: float
    merged: tuple  # ((lo, hi), ...) of the participating clusters
    result: tuple  # (lo, hi) of the merged cluster
    position: float


class _EpDynamics:
    """Damped motion under constant self-attraction between events."""

    kind = "euler_poisson"

    def __init__(self, tau: float):
        self.tau = tau

    def advance(self, x, v, mt, dt):
        tau = self.tau
        em1 = _em1(dt / tau)
        A = tau * em1
        B = tau * A - tau * dt
        return x + v * A + mt * B, v * _exp_neg(dt / tau) - mt * A

    def pair_root(self, gap0, dv, dmt):
        """First positive root of gap(d) = gap0 + dv*A(d) + dmt*B(d), dmt > 0.

        The gap derivative has at most one sign change (gap rises then
        falls when dv > 0, falls throughout otherwise) and the attraction
        drives the gap to -infinity, so the first root is unique and lies
        past the interior maximum.
        """
        tau = self.tau

        def gap(d):
            em1 = _em1(d / tau)
            A = tau * em1
            return gap0 + dv * A + dmt * (tau * A - tau * d)

        lo = tau * math.log1p(dv / (dmt * tau)) if dv > 0.0 else 0.0
        # asymptotic straight-line estimate of the root
        hi = max(lo, (gap0 + abs(dv) * tau + dmt * tau * tau) / (dmt * tau)) + 1.0
        for _ in range(200):
            if gap(hi) <= 0.0:
                break
            hi = 2.0 * hi + 1.0
        else:
            raise RootBracketFailure("collision root bracket expansion failed")
        while hi - lo > _ROOT_REL_TOL * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if gap(mid) > 0.0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


class _DriftDynamics:
    """Straight-line motion with velocity minus the centered cumulative mass."""

    kind = "drift"

    def advance(self, x, v, mt, dt):
        return x + v * dt, v

    def pair_root(self, gap0, dv, dmt):
        # dv = -dmt < 0 always: the gap closes linearly
        return gap0 / (-dv)

    def reset_velocity(self, mt):
        return -mt


@dataclass(frozen=True)
class Trajectory:
    """Full event history of one simulation plus closed-form interpolation."""

    kind: str
    tau: float
    t_end: float
    states: tuple  # ClusterState at t=0 and after each event, plus t_end
    events: tuple

    @property
    def event_times(self):
        return [e.time for e in self.events]

    def state_at(self, t: float) -> ClusterState:
        """Closed-form state at any 0 <= t <= t_end."""
        if not 0.0 <= t <= self.t_end * (1.0 + 1e-12) + 1e-300:
            raise ValueError(f"time {t} outside simulated horizon {self.t_end}")
        times = [s.time for s in self.states]
        idx = bisect_right(times, t) - 1
        base = self.states[idx]
        if base.time == t:
            return base
        dyn = _EpDynamics(self.tau) if self.kind == "euler_poisson" else _DriftDynamics()
        mts = base.mtilde()
        dt = t - base.time
        advanced = []
        for c, mt in zip(base.clusters, mts):
            x, v = dyn.advance(c.position, c.velocity, mt, dt)
            advanced.append(OracleCluster(x, c.mass, v, c.lo, c.hi))
        return ClusterState(time=t, clusters=tuple(advanced))

    def resume(self, state_index: int) -> "Trajectory":
        """Re-run the remaining trajectory from a recorded snapshot."""
        base = self.states[state_index]
        dyn = _EpDynamics(self.tau) if self.kind == "euler_poisson" else _DriftDynamics()
        return _simulate(list(base.clusters), base.time, self.t_end, dyn)


def _mtilde_list(clusters):
    total = sum(c.mass for c in clusters)
    out = []
    acc = 0.0
    for c in clusters:
        out.append(acc + 0.5 * c.mass - 0.5 * total)
        acc += c.mass
    return out


def _merge_pair(clusters, i):
    a, b = clusters[i], clusters[i + 1]
    w = a.mass + b.mass
    clusters[i : i + 2] = [
        OracleCluster(
            position=(a.mass * a.position + b.mass * b.position) / w,
            mass=w,
            velocity=(a.mass * a.velocity + b.mass * b.velocity) / w,
            lo=a.lo,
            hi=b.hi,
        )
    ]
    return a, b


def _simulate(clusters, t0, t_end, dyn) -> Trajectory:
    n_atoms = clusters[-1].hi if clusters else 0
    total_mass = sum(c.mass for c in clusters)
    q0 = sum(c.mass * c.velocity for c in clusters)
    states = [ClusterState(time=t0, clusters=tuple(clusters))]
    events = []
    t = t0
    while len(clusters) > 1:
        mts = _mtilde_list(clusters)
        roots = []
        for i in range(len(clusters) - 1):
            a, b = clusters[i], clusters[i + 1]
            delta = dyn.pair_root(
                b.position - a.position, b.velocity - a.velocity, mts[i + 1] - mts[i]
            )
            roots.append(t + delta)
        t_ev = min(roots)
        if t_ev > t_end:
            break
        tol_event = 1e-11 * (1.0 + t_ev)
        # advance everything to the event time, then merge every pair due now
        advanced = []
        for c, mt in zip(clusters, mts):
            x, v = dyn.advance(c.position, c.velocity, mt, t_ev - t)
            advanced.append(OracleCluster(x, c.mass, v, c.lo, c.hi))
        clusters = advanced
        due = [i for i, r in enumerate(roots) if r <= t_ev + tol_event]
        for i in reversed(due):
            a, b = _merge_pair(clusters, i)
            events.append(
                MergeEvent(
                    time=t_ev,
                    merged=((a.lo, a.hi), (b.lo, b.hi)),
                    result=(a.lo, b.hi),
                    position=clusters[i].position,
                )
            )
        # chain merges: a multi-collision can leave the new cluster touching
        changed = True
        while changed:
            changed = False
            for i in range(len(clusters) - 1):
                gap = clusters[i + 1].position - clusters[i].position
                if gap <= 1e-12 * (1.0 + abs(clusters[i].position)):
                    a, b = _merge_pair(clusters, i)
                    events.append(
                        MergeEvent(
                            time=t_ev,
                            merged=((a.lo, a.hi), (b.lo, b.hi)),
                            result=(a.lo, b.hi),
                            position=clusters[i].position,
                        )
                    )
                    changed = True
                    break
        if dyn.kind == "drift":
            mts = _mtilde_list(clusters)
            clusters = [
                OracleCluster(c.position, c.mass, dyn.reset_velocity(mt), c.lo, c.hi)
                for c, mt in zip(clusters, mts)
            ]
        t = t_ev
        states.append(ClusterState(time=t, clusters=tuple(clusters)))
        if len(events) > max(n_atoms - 1, 0):
            raise EventHorizonExceeded("more merge events than atoms minus one")
        # conservation checks at every event
        mass_err = abs(sum(c.mass for c in clusters) - total_mass)
        if mass_err > 1e-12 * (1.0 + total_mass):
            raise IdentityViolation(f"mass conservation violated by {mass_err}")
        q_now = sum(c.mass * c.velocity for c in clusters)
        if dyn.kind == "euler_poisson":
            q_ref = q0 * _exp_neg((t - t0) / dyn.tau)
        else:
            q_ref = 0.0
        if abs(q_now - q_ref) > 1e-11 * (1.0 + abs(q0) + total_mass):
            raise IdentityViolation(
                f"momentum decay law violated at t={t}: {q_now} vs {q_ref}"
            )
    # final state at the horizon
    mts = _mtilde_list(clusters)
    final = []
    for c, mt in zip(clusters, mts):
        x, v = dyn.advance(c.position, c.velocity, mt, t_end - t)
        final.append(OracleCluster(x, c.mass, v, c.lo, c.hi))
    states.append(ClusterState(time=t_end, clusters=tuple(final)))
    return Trajectory(
        kind=dyn.kind,
        tau=getattr(dyn, "tau", math.nan),
        t_end=t_end,
        states=tuple(states),
        events=tuple(events),
    )


def simulate_ep(data: InitialData, t_end: float) -> Trajectory:
    """Exact sticky-particle evolution of the damped self-gravitating gas."""
    if t_end <= 0.0:
        raise NonPositiveTime(f"t_end must be positive, got {t_end}")
    clusters = [
        OracleCluster(
            position=float(p), mass=float(w), velocity=float(v), lo=i, hi=i + 1
        )
        for i, (p, w, v) in enumerate(
            zip(data.measure.positions, data.measure.masses, data.velocities)
        )
    ]
    return _simulate(clusters, 0.0, t_end, _EpDynamics(data.tau))


def simulate_drift(measure: AtomicMeasure, t_end: float) -> Trajectory:
    """Exact evolution of the drift dynamics: clusters move at minus the centered CDF."""
    if t_end <= 0.0:
        raise NonPositiveTime(f"t_end must be positive, got {t_end}")
    mts = (
        measure.prefix_mass[:-1] + 0.5 * measure.masses - 0.5 * measure.total_mass
    )
    clusters = [
        OracleCluster(position=float(p), mass=float(w), velocity=float(-mt), lo=i, hi=i + 1)
        for i, (p, w, mt) in enumerate(zip(measure.positions, measure.masses, mts))
    ]
    return _simulate(clusters, 0.0, t_end, _DriftDynamics())


def oracle_cdf(state: ClusterState, x: float) -> float:
    """Cumulative mass strictly left of x."""
    return float(sum(c.mass for c in state.clusters if c.position < x))


def oracle_velocity(state: ClusterState, x: float, atol: float = 1e-9) -> float:
    """Velocity of the cluster located at x, within an absolute tolerance."""
    best = None
    best_gap = math.inf
    for c in state.clusters:
        gap = abs(c.position - x)
        if gap < best_gap:
            best, best_gap = c, gap
    if best is None or best_gap > atol:
        raise NoClusterAt(f"no cluster within {atol} of x={x}")
    return float(best.velocity)
