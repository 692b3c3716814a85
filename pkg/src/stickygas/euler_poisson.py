"""Entropy-solution evaluation for the damped self-gravitating gas.

Every field at a point (x, t) comes from the prefix argmin of the first
generalized potential: the mass is the prefix mass at the smallest argmin,
momentum and energy are matching prefix sums, and the velocity follows the
branch analysis of the forward generalized characteristics (delta shock,
vacuum escape, or plain characteristic).

The cluster decomposition at a fixed time equals the lower convex hull of
the prefix points (P_k, S_k): hull vertices are the exposed prefixes and
each hull edge is one cluster whose position and velocity are the edge
slopes in S and Q. ``forward_position`` keeps the contract-level monotone
bisection; the hull is the batch fast path and the two are cross-checked
in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import BisectionFailure, NonPositiveTime
from .measure import InitialData
from .potentials import PotentialCoefficients, PrefixFrame

__all__ = [
    "Branch",
    "SolutionSample",
    "ShockCurve",
    "Cluster",
    "eval_m",
    "eval_q",
    "eval_u",
    "eval_E",
    "eval_nu_theta_omega",
    "sample",
    "eval_m_grid",
    "eval_q_grid",
    "forward_position",
    "cluster_snapshot",
    "trace_shock",
    "speed_bound",
]

# Tolerance scale for classifying c(y*; x, t) against u0(y*) and +-U0.
DEFAULT_SPEED_TOL = 1e-9

# Bisection tolerance scale: tol_pos = DEFAULT_POS_TOL_SCALE * (1 + x-range).
DEFAULT_POS_TOL_SCALE = 1e-12


class Branch(Enum):
    VACUUM_RIGHT = "vacuum_right"
    VACUUM_LEFT = "vacuum_left"
    DELTA_SHOCK = "delta_shock"
    CHARACTERISTIC = "characteristic"


@dataclass(frozen=True)
class SolutionSample:
    """All solution fields at one point, with the velocity branch that fired."""

    x: float
    t: float
    m: float
    q: float
    u: float
    E: float
    branch: Branch


@dataclass(frozen=True)
class Cluster:
    """One cluster at a fixed time: atoms lo..hi-1 concentrated at position."""

    lo: int
    hi: int
    position: float
    velocity: float
    mass: float


@dataclass(frozen=True)
class ShockCurve:
    """Sampled forward generalized characteristic from (x0, t0)."""

    x0: float
    t0: float
    times: tuple
    positions: tuple
    velocities: tuple
    ranges: tuple  # (k_min, k_max) prefix pair per sample


def speed_bound(data: InitialData) -> float:
    """Global bound U0 + tau*M/2 on every velocity of the solution."""
    return data.max_speed + 0.5 * data.tau * data.measure.total_mass


def _frame(data, t, coeffs=None, tie_tol=None):
    if coeffs is None:
        coeffs = PotentialCoefficients.euler_poisson(data.tau, t)
    return PrefixFrame(data.measure, data.velocities, coeffs, tie_tol)


# -- pointwise fields --------------------------------------------------------


def eval_m(data: InitialData, x: float, t: float) -> float:
    """Cumulative mass strictly left of x: left-continuous, nondecreasing."""
    if t == 0.0:
        return float(data.measure.cdf_left(x))
    frame = _frame(data, t)
    _, k_min, _ = frame.argmin(x)
    return float(frame.P[k_min])


def eval_q(data: InitialData, x: float, t: float) -> float:
    """Momentum integral over the same prefix as eval_m."""
    if t == 0.0:
        n = int(np.searchsorted(data.measure.positions, x, side="left"))
        return float(np.sum(data.measure.masses[:n] * data.velocities[:n]))
    frame = _frame(data, t)
    _, k_min, _ = frame.argmin(x)
    return float(frame.Q[k_min])


def _velocity_from_frame(frame, data, x):
    """Velocity and branch tag at x from an existing prefix frame."""
    coeffs = frame.coeffs
    m = data.measure
    _, k_min, k_max = frame.argmin(x)
    if k_max > k_min:
        # positive mass at x; when the backward cone is degenerate (lone
        # leading atom exactly on its path, prefix tie 0..1) this is the
        # characteristic case and [q]/[m] reduces to the atom velocity
        u = (frame.Q[k_max] - frame.Q[k_min]) / (frame.P[k_max] - frame.P[k_min])
        shock = max(k_min, 1) != max(k_max, 1)
        branch = Branch.DELTA_SHOCK if shock else Branch.CHARACTERISTIC
        return float(u), branch, k_min, k_max
    a = max(k_min, 1) - 1
    y = m.positions[a]
    half_m = 0.5 * m.total_mass
    mt_mid = m.prefix_mass[a] + 0.5 * m.masses[a] - half_m
    ratio = coeffs.force_speed_ratio()
    c_mid = (x - y) / coeffs.A - mt_mid * ratio
    u0a = data.velocities[a]
    tol = DEFAULT_SPEED_TOL * (1.0 + abs(c_mid) + abs(u0a))
    u_bound = data.max_speed
    if c_mid > u0a + tol:
        mt_side = m.prefix_mass[a + 1] - half_m
        c_side = (x - y) / coeffs.A - mt_side * ratio
        if c_side > u_bound + tol:
            u = u_bound * coeffs.decay - mt_side * coeffs.A
            return float(u), Branch.VACUUM_RIGHT, k_min, k_max
        u = (x - y) * coeffs.decay / coeffs.A + mt_side * coeffs.char_force_weight()
        return float(u), Branch.CHARACTERISTIC, k_min, k_max
    if c_mid < u0a - tol:
        mt_side = m.prefix_mass[a] - half_m
        c_side = (x - y) / coeffs.A - mt_side * ratio
        if c_side < -u_bound - tol:
            u = -u_bound * coeffs.decay - mt_side * coeffs.A
            return float(u), Branch.VACUUM_LEFT, k_min, k_max
        u = (x - y) * coeffs.decay / coeffs.A + mt_side * coeffs.char_force_weight()
        return float(u), Branch.CHARACTERISTIC, k_min, k_max
    # on the atom's own path: velocity is the atom's free-flight velocity
    return float(frame.vel[a]), Branch.CHARACTERISTIC, k_min, k_max


def eval_u(data: InitialData, x: float, t: float):
    """Velocity at (x, t) and the branch that produced it.

    Off the support the field is an extension convention: interior vacuum
    gaps take the rightward max-speed tracer (+U0, anchored at the atom on
    the left), while only the leftmost infinite vacuum takes -U0. The
    extension is therefore deliberately not mirror-symmetric; on the
    support (at clusters) the value is the physical cluster velocity.
    """
    if t == 0.0:
        i = data.measure.atom_index(x)
        u0 = float(data.velocities[i]) if i >= 0 else 0.0
        return u0, Branch.CHARACTERISTIC
    frame = _frame(data, t)
    u, branch, _, _ = _velocity_from_frame(frame, data, x)
    return u, branch


def _atom_cluster_fields(frame):
    """Per-atom cluster position and velocity arrays from the hull snapshot."""
    n = len(frame.measure)
    pos = np.empty(n)
    vel = np.empty(n)
    for lo, hi, p, v in _hull_clusters(frame):
        pos[lo:hi] = p
        vel[lo:hi] = v
    return pos, vel


def eval_E(data: InitialData, x: float, t: float) -> float:
    """Energy integral: free momenta weighted by the actual cluster velocities."""
    if t == 0.0:
        n = int(np.searchsorted(data.measure.positions, x, side="left"))
        w = data.measure.masses[:n]
        return float(np.sum(w * data.velocities[:n] ** 2))
    frame = _frame(data, t)
    _, k_min, _ = frame.argmin(x)
    if k_min == 0:
        return 0.0
    _, cluster_vel = _atom_cluster_fields(frame)
    w = data.measure.masses[:k_min]
    return float(np.sum(w * frame.vel[:k_min] * cluster_vel[:k_min]))


def eval_nu_theta_omega(data: InitialData, x: float, t: float):
    """Potential minimum nu plus the auxiliary fields (theta, omega, h) at (x, t)."""
    if t <= 0.0:
        raise NonPositiveTime(f"auxiliary fields require t > 0, got {t}")
    frame = _frame(data, t)
    nu, k_min, _ = frame.argmin(x)
    if k_min == 0:
        return float(nu), 0.0, 0.0, 0.0
    cluster_pos, cluster_vel = _atom_cluster_fields(frame)
    m = data.measure
    w = m.masses[:k_min]
    off = cluster_pos[:k_min] - x
    theta = float(np.sum(w * frame.vel[:k_min] * off))
    coeffs = frame.coeffs
    mt = m.atom_mtilde()[:k_min]
    omega = float(
        -(coeffs.decay / data.tau)
        * np.sum(w * (data.velocities[:k_min] + data.tau * mt) * off)
    )
    h = float(np.sum(w * cluster_vel[:k_min]))
    return float(nu), theta, omega, h


def sample(data: InitialData, x: float, t: float) -> SolutionSample:
    """All solution fields at one point."""
    if t == 0.0:
        return SolutionSample(
            x=x,
            t=0.0,
            m=eval_m(data, x, 0.0),
            q=eval_q(data, x, 0.0),
            u=eval_u(data, x, 0.0)[0],
            E=eval_E(data, x, 0.0),
            branch=Branch.CHARACTERISTIC,
        )
    frame = _frame(data, t)
    _, k_min, _ = frame.argmin(x)
    u, branch, _, _ = _velocity_from_frame(frame, data, x)
    if k_min == 0:
        E = 0.0
    else:
        _, cluster_vel = _atom_cluster_fields(frame)
        w = data.measure.masses[:k_min]
        E = float(np.sum(w * frame.vel[:k_min] * cluster_vel[:k_min]))
    return SolutionSample(
        x=x,
        t=t,
        m=float(frame.P[k_min]),
        q=float(frame.Q[k_min]),
        u=u,
        E=E,
        branch=branch,
    )


# -- grid evaluation ---------------------------------------------------------


def eval_m_grid(data: InitialData, xs, t: float):
    """Vectorized eval_m over an array of positions."""
    xs = np.asarray(xs, dtype=float)
    if t == 0.0:
        k = np.searchsorted(data.measure.positions, xs, side="left")
        return data.measure.prefix_mass[k]
    frame = _frame(data, t)
    _, k_min, _ = frame.argmin_grid(xs)
    return frame.P[k_min]


def eval_q_grid(data: InitialData, xs, t: float):
    """Vectorized eval_q over an array of positions."""
    xs = np.asarray(xs, dtype=float)
    if t == 0.0:
        k = np.searchsorted(data.measure.positions, xs, side="left")
        qp = np.concatenate(([0.0], np.cumsum(data.measure.masses * data.velocities)))
        return qp[k]
    frame = _frame(data, t)
    _, k_min, _ = frame.argmin_grid(xs)
    return frame.Q[k_min]


# -- cluster structure -------------------------------------------------------


def _lower_hull_vertices(P, S):
    """Indices of the lower convex hull of the points (P_k, S_k), k ascending."""
    verts = []
    for k in range(P.size):
        while len(verts) >= 2:
            a, b = verts[-2], verts[-1]
            cross = (P[b] - P[a]) * (S[k] - S[a]) - (P[k] - P[a]) * (S[b] - S[a])
            if cross <= 0.0:
                verts.pop()
            else:
                break
        verts.append(k)
    return verts


def _hull_clusters(frame):
    """(lo, hi, position, velocity) per cluster from the hull of the frame."""
    verts = _lower_hull_vertices(frame.P, frame.S)
    out = []
    for a, b in zip(verts[:-1], verts[1:]):
        dm = frame.P[b] - frame.P[a]
        out.append(
            (
                a,
                b,
                float((frame.S[b] - frame.S[a]) / dm),
                float((frame.Q[b] - frame.Q[a]) / dm),
            )
        )
    return out


def cluster_snapshot(data: InitialData, t: float, coeffs=None):
    """Cluster decomposition of the solution at time t.

    Fast hull-based path; agrees with per-atom ``forward_position`` bisection
    to within its tolerance (property-tested).
    """
    if t == 0.0 and coeffs is None:
        m = data.measure
        return [
            Cluster(i, i + 1, float(m.positions[i]), float(data.velocities[i]), float(m.masses[i]))
            for i in range(len(m))
        ]
    frame = _frame(data, t, coeffs)
    return [
        Cluster(lo, hi, p, v, float(frame.P[hi] - frame.P[lo]))
        for lo, hi, p, v in _hull_clusters(frame)
    ]


# -- forward generalized characteristics --------------------------------------


def _default_pos_tol(data) -> float:
    m = data.measure
    span = float(m.positions[-1] - m.positions[0]) if len(m) else 0.0
    return DEFAULT_POS_TOL_SCALE * (1.0 + span)


def forward_position(data: InitialData, atom_index: int, t: float, tol_pos=None) -> float:
    """Position x(eta_i, t) of the forward characteristic through atom i.

    Monotone bisection over x of the predicate k_max(x, t) >= i + 1, valid
    because the argmin prefix index is nondecreasing in x.
    """
    m = data.measure
    if not 0 <= atom_index < len(m):
        raise IndexError(f"atom index {atom_index} out of range")
    if t == 0.0:
        return float(m.positions[atom_index])
    if tol_pos is None:
        tol_pos = _default_pos_tol(data)
    # exact-argmin frame: the position-metric tie window would blur the
    # predicate boundary by more than the bisection tolerance
    frame = PrefixFrame(
        data.measure,
        data.velocities,
        PotentialCoefficients.euler_poisson(data.tau, t),
        tie_pos_tol=0.0,
    )
    coeffs = frame.coeffs
    reach = data.max_speed * coeffs.A + 0.5 * m.total_mass * abs(coeffs.B)
    lo = float(m.positions[0]) - reach - 1.0
    hi = float(m.positions[-1]) + reach + 1.0
    want = atom_index + 1

    def pred(x):
        return frame.argmin(x)[2] >= want

    if pred(lo) or not pred(hi):
        raise BisectionFailure(
            f"could not bracket forward position of atom {atom_index} at t={t}"
        )
    while hi - lo > tol_pos:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _backward_char_at(frame, data, x, t1, coeffs0):
    """History curve of (x, t1) evaluated at the earlier time of coeffs0.

    Follows the same case split as the velocity formula: a plain backward
    characteristic where the needed initial speed is admissible, and the
    max-speed vacuum tracer (initial speed capped at +-U0) where it is not.
    The curves are ordered in x, which makes the forward-trace bisection
    monotone.
    """
    m = data.measure
    coeffs = frame.coeffs
    _, k_min, _ = frame.argmin(x)
    a = max(k_min, 1) - 1
    y = m.positions[a]
    half_m = 0.5 * m.total_mass
    mt_mid = m.prefix_mass[a] + 0.5 * m.masses[a] - half_m
    ratio = coeffs.force_speed_ratio()
    c_mid = (x - y) / coeffs.A - mt_mid * ratio
    u0a = data.velocities[a]
    u_bound = data.max_speed
    tol = DEFAULT_SPEED_TOL * (1.0 + abs(c_mid) + abs(u0a))
    if c_mid > u0a + tol:
        mt = m.prefix_mass[a + 1] - half_m
        c = (x - y) / coeffs.A - mt * ratio
        if c > u_bound + tol:
            return (
                x
                - u_bound * (coeffs.A - coeffs0.A)
                - mt * (coeffs.B - coeffs0.B)
            )
    elif c_mid < u0a - tol:
        mt = m.prefix_mass[a] - half_m
        c = (x - y) / coeffs.A - mt * ratio
        if c < -u_bound - tol:
            return (
                x
                + u_bound * (coeffs.A - coeffs0.A)
                - mt * (coeffs.B - coeffs0.B)
            )
    else:
        mt = mt_mid
        c = c_mid
    return y + c * coeffs0.A + mt * coeffs0.B


def trace_shock(
    data: InitialData, x0: float, t0: float, t_end: float, dt: float
) -> ShockCurve:
    """Sample the unique forward generalized characteristic from (x0, t0).

    At each sample time the position is recovered by monotone bisection:
    the backward characteristics of candidate points at that time are
    ordered in x and exactly one passes through (x0, t0).
    """
    if not 0.0 < t0 < t_end:
        raise NonPositiveTime(f"need 0 < t0 < t_end, got t0={t0}, t_end={t_end}")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    tol_pos = _default_pos_tol(data)
    vmax = speed_bound(data)
    coeffs0 = PotentialCoefficients.euler_poisson(data.tau, t0)

    times = [t0]
    n_steps = int(math.floor((t_end - t0) / dt + 1e-12))
    times += [t0 + j * dt for j in range(1, n_steps + 1)]
    if times[-1] < t_end - 1e-12 * (1.0 + t_end):
        times.append(t_end)

    xs = [float(x0)]
    for t1 in times[1:]:
        frame = PrefixFrame(
            data.measure,
            data.velocities,
            PotentialCoefficients.euler_poisson(data.tau, t1),
            tie_pos_tol=0.0,
        )
        reach = vmax * (t1 - t0) + 1.0
        lo, hi = x0 - reach, x0 + reach

        def pred(x):
            return _backward_char_at(frame, data, x, t1, coeffs0) < x0

        if not pred(lo) or pred(hi):
            raise BisectionFailure(f"shock trace bracket failed at t={t1}")
        while hi - lo > tol_pos:
            mid = 0.5 * (lo + hi)
            if pred(mid):
                lo = mid
            else:
                hi = mid
        xs.append(0.5 * (lo + hi))

    vels = []
    ranges = []
    for t1, x1 in zip(times, xs):
        frame = _frame(data, t1)
        u, _, k_min, k_max = _velocity_from_frame(frame, data, x1)
        vels.append(u)
        ranges.append((k_min, k_max))
    return ShockCurve(
        x0=float(x0),
        t0=float(t0),
        times=tuple(times),
        positions=tuple(xs),
        velocities=tuple(vels),
        ranges=tuple(ranges),
    )
