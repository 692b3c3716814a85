"""Generalized potentials and their exact prefix-sum minimization.

For atomic initial data every potential is a left-continuous step function
of the lower integration limit y, so minimizing over y reduces to an exact
argmin over the N+1 prefix sums T_k(x, t). The same machinery serves the
damped self-gravitating system (time weights A, B), its drift limit
(weights 0, -t), and the slow-time-scaled family used in the relaxation
study.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadConstantK, EmptyMeasure, NonPositiveTime
from .measure import AtomicMeasure, InitialData

__all__ = [
    "DEFAULT_TIE_TOL",
    "DEFAULT_TIE_POS_TOL",
    "PotentialCoefficients",
    "MinimizerResult",
    "eval_F",
    "eval_F_right",
    "minimize_F",
    "initial_speed_c",
    "eval_Fbar",
    "minimize_Fbar",
    "eval_G",
    "eval_H",
]

# Prefix sums T_j and the minimum nu tie when
#   T_j - nu <= DEFAULT_TIE_TOL * (1 + |nu|)
#              + DEFAULT_TIE_POS_TOL * (1 + |x|) * |P_j - P_argmin|.
# The second term measures the distance from x to the position where the
# two prefixes would tie exactly; the value-relative term alone misses
# ties at late-time clusters where nu is incidentally near zero.
DEFAULT_TIE_TOL = 1e-12
DEFAULT_TIE_POS_TOL = 1e-9

# e^{-z} is flushed to exactly 0 beyond this exponent; avoids inf * 0.
_EXP_FLUSH = 700.0


def _exp_neg(z: float) -> float:
    return math.exp(-z) if z <= _EXP_FLUSH else 0.0


def _one_minus_exp_neg(z: float) -> float:
    return -math.expm1(-z) if z <= _EXP_FLUSH else 1.0


@dataclass(frozen=True)
class PotentialCoefficients:
    """Time weights multiplying the velocity and force terms of a potential.

    A = tau(1 - e^{-t/tau}) weights the initial velocity, B = tau^2
    - tau^2 e^{-t/tau} - tau*t (always <= 0 for t >= 0) weights the
    centered CDF. ``decay`` carries e^{-t/tau} for the velocity formulas;
    ``t`` is the evaluation time in the system's own clock.
    """

    A: float
    B: float
    decay: float
    tau: float
    t: float

    @classmethod
    def euler_poisson(cls, tau: float, t: float) -> "PotentialCoefficients":
        if t <= 0.0:
            raise NonPositiveTime(f"potential coefficients require t > 0, got {t}")
        z = t / tau
        em1 = _one_minus_exp_neg(z)
        A = tau * em1
        B = tau * tau * em1 - tau * t
        return cls(A=A, B=B, decay=_exp_neg(z), tau=tau, t=t)

    @classmethod
    def drift(cls, t: float) -> "PotentialCoefficients":
        if t <= 0.0:
            raise NonPositiveTime(f"potential coefficients require t > 0, got {t}")
        return cls(A=0.0, B=-t, decay=0.0, tau=math.inf, t=t)

    @classmethod
    def scaled(cls, tau: float, slow_t: float) -> "PotentialCoefficients":
        """Weights of the slow-time-scaled system evaluated at t/tau.

        Computed directly from slow_t so that B never forms the product
        tau * (slow_t / tau); exponentials beyond the flush threshold are
        exactly zero.
        """
        if slow_t <= 0.0:
            raise NonPositiveTime(f"potential coefficients require t > 0, got {slow_t}")
        z = slow_t / (tau * tau)
        em1 = _one_minus_exp_neg(z)
        A = tau * em1
        B = tau * tau * em1 - slow_t
        return cls(A=A, B=B, decay=_exp_neg(z), tau=tau, t=slow_t / tau)

    def force_speed_ratio(self) -> float:
        """B/A = tau - t/(1 - e^{-t/tau}), the force weight of c(y; x, t)."""
        return self.B / self.A

    def char_force_weight(self) -> float:
        """t e^{-t/tau}/(1 - e^{-t/tau}) - tau: force weight along characteristics."""
        if self.decay == 0.0:
            return -self.tau
        return self.t * self.decay * self.tau / self.A - self.tau


@dataclass(frozen=True)
class MinimizerResult:
    """Outcome of minimizing a generalized potential over y at fixed (x, t).

    k_min and k_max are the smallest/largest prefix indices attaining the
    minimum under the tie tolerance; y_star and y_star_up are the matching
    atom positions (left minimizer and its right limit in x).
    """

    nu: float
    y_star: float
    y_star_up: float
    attained_at_y_star: bool
    k_min: int
    k_max: int

    @property
    def has_jump(self) -> bool:
        return self.k_max > self.k_min


def free_positions(
    measure: AtomicMeasure, velocities, coeffs: PotentialCoefficients
):
    """Collision-free atom positions eta + u*A + mtilde0*B at the coefficient time."""
    X = measure.positions + coeffs.B * measure.atom_mtilde()
    if velocities is not None and coeffs.A != 0.0:
        X = X + coeffs.A * velocities
    return X


class PrefixFrame:
    """Prefix sums of one potential at fixed coefficients, queryable in x.

    T_k(x) = S[k] - x * P[k]; the argmin over k is the minimizer of the
    potential. Also carries the prefix momentum Q used by the solution
    formulas.
    """

    __slots__ = (
        "measure",
        "coeffs",
        "P",
        "S",
        "Q",
        "X",
        "vel",
        "tie_tol",
        "tie_pos_tol",
    )

    def __init__(
        self,
        measure,
        velocities,
        coeffs,
        tie_tol=None,
        tie_pos_tol=None,
    ):
        self.measure = measure
        self.coeffs = coeffs
        # resolved at call time so runtime overrides of the module
        # defaults (CLI --tol-tie) take effect
        self.tie_tol = DEFAULT_TIE_TOL if tie_tol is None else tie_tol
        self.tie_pos_tol = (
            DEFAULT_TIE_POS_TOL if tie_pos_tol is None else tie_pos_tol
        )
        w = measure.masses
        self.X = free_positions(measure, velocities, coeffs)
        mt = measure.atom_mtilde()
        if velocities is None:
            velocities = np.zeros_like(w)
        # free-flight velocity of each atom at the coefficient time
        self.vel = coeffs.decay * velocities - coeffs.A * mt
        self.P = measure.prefix_mass
        self.S = np.concatenate(([0.0], np.cumsum(w * self.X)))
        self.Q = np.concatenate(([0.0], np.cumsum(w * self.vel)))

    def prefix_values(self, x: float):
        return self.S - x * self.P

    def argmin(self, x: float):
        """(nu, k_min, k_max) of the prefix sums at x under the tie tolerance."""
        T = self.S - x * self.P
        k0 = int(np.argmin(T))
        nu = float(T[k0])
        tol = self.tie_tol * (1.0 + abs(nu)) + self.tie_pos_tol * (
            1.0 + abs(x)
        ) * np.abs(self.P - self.P[k0])
        ties = np.flatnonzero(T - nu <= tol)
        return nu, int(ties[0]), int(ties[-1])

    def argmin_grid(self, xs):
        """Vectorized argmin over a grid of x values: (nu, k_min, k_max) arrays."""
        xs = np.asarray(xs, dtype=float)
        T = self.S[None, :] - xs[:, None] * self.P[None, :]
        k0 = T.argmin(axis=1)
        nu = T[np.arange(xs.size), k0]
        tol = self.tie_tol * (1.0 + np.abs(nu))[:, None] + self.tie_pos_tol * (
            1.0 + np.abs(xs)
        )[:, None] * np.abs(self.P[None, :] - self.P[k0][:, None])
        tied = (T - nu[:, None]) <= tol
        k_min = tied.argmax(axis=1)
        n = self.P.size
        k_max = n - 1 - tied[:, ::-1].argmax(axis=1)
        return nu, k_min, k_max

    def result(self, x: float) -> MinimizerResult:
        if len(self.measure) == 0:
            raise EmptyMeasure("cannot minimize a potential over an empty measure")
        nu, k_min, k_max = self.argmin(x)
        pos = self.measure.positions
        # y_star_up is read off k_max instead of re-minimizing at x + eps:
        # increasing x lowers every prefix sum by eps * P_k, which strictly
        # favours the largest tied prefix, so the argmin at x + eps is k_max
        return MinimizerResult(
            nu=nu,
            y_star=float(pos[max(k_min, 1) - 1]),
            y_star_up=float(pos[max(k_max, 1) - 1]),
            attained_at_y_star=(k_min == 0),
            k_min=k_min,
            k_max=k_max,
        )


def _prefix_count(measure: AtomicMeasure, y: float, side: str) -> int:
    return int(np.searchsorted(measure.positions, y, side=side))


# -- first generalized potential ------------------------------------------


def eval_F(data: InitialData, y: float, x: float, t: float) -> float:
    """F(y; x, t): left-continuous Stieltjes sum over atoms strictly below y."""
    coeffs = PotentialCoefficients.euler_poisson(data.tau, t)
    frame = PrefixFrame(data.measure, data.velocities, coeffs)
    return float(frame.prefix_values(x)[_prefix_count(data.measure, y, "left")])


def eval_F_right(data: InitialData, y: float, x: float, t: float) -> float:
    """F(y+; x, t): right limit, atoms at y included."""
    coeffs = PotentialCoefficients.euler_poisson(data.tau, t)
    frame = PrefixFrame(data.measure, data.velocities, coeffs)
    return float(frame.prefix_values(x)[_prefix_count(data.measure, y, "right")])


def minimize_F(
    data: InitialData, x: float, t: float, tie_tol: float | None = None
) -> MinimizerResult:
    """Minimize F(.; x, t) over y by exact prefix-sum argmin."""
    if len(data) == 0:
        raise EmptyMeasure("cannot minimize a potential over an empty measure")
    coeffs = PotentialCoefficients.euler_poisson(data.tau, t)
    return PrefixFrame(data.measure, data.velocities, coeffs, tie_tol).result(x)


def initial_speed_c(
    data: InitialData, y: float, x: float, t: float, side: int = 0
) -> float:
    """Initial speed of the backward characteristic from (x, t) through (y, 0).

    side selects the centered CDF convention at y: -1 left limit, 0 the
    symmetric atom value, +1 right limit. Uses the expm1-stable weights so
    small t does not cancel catastrophically.
    """
    coeffs = PotentialCoefficients.euler_poisson(data.tau, t)
    m = data.measure
    if side < 0:
        mt = m.mtilde0_left(y)
    elif side > 0:
        mt = m.mtilde0_right(y)
    else:
        mt = m.mtilde0(y)
    return (x - y) / coeffs.A - mt * coeffs.force_speed_ratio()


# -- drift potential --------------------------------------------------------


def eval_Fbar(measure: AtomicMeasure, y: float, x: float, t: float) -> float:
    """Drift potential: sum over atoms below y of w (eta - t*mtilde0 - x)."""
    coeffs = PotentialCoefficients.drift(t)
    frame = PrefixFrame(measure, None, coeffs)
    return float(frame.prefix_values(x)[_prefix_count(measure, y, "left")])


def eval_Fbar_right(measure: AtomicMeasure, y: float, x: float, t: float) -> float:
    coeffs = PotentialCoefficients.drift(t)
    frame = PrefixFrame(measure, None, coeffs)
    return float(frame.prefix_values(x)[_prefix_count(measure, y, "right")])


def minimize_Fbar(
    measure: AtomicMeasure, x: float, t: float, tie_tol: float | None = None
) -> MinimizerResult:
    """Minimize the drift potential: identical argmin structure with weights (0, -t)."""
    if len(measure) == 0:
        raise EmptyMeasure("cannot minimize a potential over an empty measure")
    coeffs = PotentialCoefficients.drift(t)
    return PrefixFrame(measure, None, coeffs, tie_tol).result(x)


# -- auxiliary potentials ----------------------------------------------------


def _check_k(data: InitialData, k) -> float:
    bound = data.max_speed + 0.5 * data.measure.total_mass * data.tau
    if k is None:
        return bound + 1.0
    if not k > bound:
        raise BadConstantK(f"constant k must exceed U0 + M*tau/2 = {bound}, got {k}")
    return float(k)


def eval_G(
    data: InitialData, forward_positions, y: float, x: float, t: float, k=None
) -> float:
    """Second auxiliary potential; forward_positions supplies x(eta_i, t) per atom.

    Any k above U0 + M*tau/2 is admissible and all give the same minimizer;
    the default is that bound plus one.
    """
    k = _check_k(data, k)
    coeffs = PotentialCoefficients.euler_poisson(data.tau, t)
    m = data.measure
    fp = np.asarray(forward_positions, dtype=float)
    if fp.shape != m.positions.shape:
        raise ValueError("forward_positions must supply one position per atom")
    n = _prefix_count(m, y, "left")
    vel = coeffs.decay * data.velocities - coeffs.A * m.atom_mtilde()
    terms = m.masses[:n] * (vel[:n] + k) * (fp[:n] - x)
    return float(np.sum(terms))


def eval_H(
    data: InitialData, forward_positions, y: float, x: float, t: float, k=None
) -> float:
    """Third auxiliary potential; shares its minimizers with F and G."""
    k = _check_k(data, k)
    coeffs = PotentialCoefficients.euler_poisson(data.tau, t)
    m = data.measure
    fp = np.asarray(forward_positions, dtype=float)
    if fp.shape != m.positions.shape:
        raise ValueError("forward_positions must supply one position per atom")
    n = _prefix_count(m, y, "left")
    terms = (
        m.masses[:n]
        * (data.velocities[:n] + data.tau * m.atom_mtilde()[:n] + k)
        * (fp[:n] - x)
    )
    return float(-(coeffs.decay / data.tau) * np.sum(terms))
