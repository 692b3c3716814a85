"""Finite atomic measures on the line with exact one-sided CDF queries.

All Stieltjes integrals downstream reduce to prefix sums over the sorted
atom array, so construction caches the prefix-mass table once and every
query is a binary search. Instances are immutable after construction and
safe for unlimited concurrent reads.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import TauOutOfRange

__all__ = ["AtomicMeasure", "InitialData"]


def _merge_duplicates(positions, masses, velocities=None):
    """Collapse exact duplicate positions, summing mass.

    Velocity, when present, is merged mass-averaged: the only choice that
    preserves the momentum of the merged atom.
    """
    keep_pos = [positions[0]]
    keep_mass = [masses[0]]
    keep_mom = None if velocities is None else [masses[0] * velocities[0]]
    merged = False
    for i in range(1, len(positions)):
        if positions[i] == keep_pos[-1]:
            merged = True
            keep_mass[-1] += masses[i]
            if keep_mom is not None:
                keep_mom[-1] += masses[i] * velocities[i]
        else:
            keep_pos.append(positions[i])
            keep_mass.append(masses[i])
            if keep_mom is not None:
                keep_mom.append(masses[i] * velocities[i])
    if merged:
        warnings.warn(
            "duplicate atom positions merged (mass added, velocity mass-averaged)",
            stacklevel=3,
        )
    pos = np.array(keep_pos, dtype=float)
    mass = np.array(keep_mass, dtype=float)
    vel = None
    if keep_mom is not None:
        vel = np.array(keep_mom, dtype=float) / mass
    return pos, mass, vel


class AtomicMeasure:
    """Sorted finite atomic measure: atoms (position, mass > 0).

    Positions are strictly increasing; exact duplicates passed to the
    constructor are merged (masses added) with a warning.
    """

    __slots__ = ("positions", "masses", "prefix_mass", "total_mass")

    def __init__(self, positions, masses):
        positions = np.atleast_1d(np.asarray(positions, dtype=float))
        masses = np.atleast_1d(np.asarray(masses, dtype=float))
        if positions.shape != masses.shape or positions.ndim != 1:
            raise ValueError("positions and masses must be 1-d arrays of equal length")
        if positions.size:
            if not np.all(np.isfinite(positions)) or not np.all(np.isfinite(masses)):
                raise ValueError("positions and masses must be finite")
            if np.any(masses <= 0.0):
                raise ValueError("all masses must be strictly positive")
            order = np.argsort(positions, kind="stable")
            positions = positions[order]
            masses = masses[order]
            if np.any(np.diff(positions) == 0.0):
                positions, masses, _ = _merge_duplicates(positions, masses)
        self.positions = positions
        self.masses = masses
        # prefix_mass[k] = sum of the first k masses, k = 0..N
        self.prefix_mass = np.concatenate(([0.0], np.cumsum(masses)))
        self.total_mass = float(self.prefix_mass[-1])
        for arr in (self.positions, self.masses, self.prefix_mass):
            arr.setflags(write=False)

    def __len__(self):
        return self.positions.size

    def __repr__(self):
        return f"AtomicMeasure(n={len(self)}, total_mass={self.total_mass!r})"

    # -- one-sided CDF queries -------------------------------------------

    def cdf_left(self, x):
        """Mass strictly left of x: nondecreasing, left-continuous."""
        k = np.searchsorted(self.positions, x, side="left")
        return self.prefix_mass[k]

    def cdf_right(self, x):
        """Mass left of or at x: the right-continuous companion."""
        k = np.searchsorted(self.positions, x, side="right")
        return self.prefix_mass[k]

    def mtilde0(self, x):
        """Symmetric centered CDF: (cdf_left + cdf_right - M) / 2."""
        return 0.5 * (self.cdf_left(x) + self.cdf_right(x) - self.total_mass)

    def mtilde0_left(self, x):
        """Left limit of mtilde0 at x: cdf_left(x) - M/2."""
        return self.cdf_left(x) - 0.5 * self.total_mass

    def mtilde0_right(self, x):
        """Right limit of mtilde0 at x: cdf_right(x) - M/2."""
        return self.cdf_right(x) - 0.5 * self.total_mass

    def atom_mtilde(self):
        """mtilde0 evaluated at every atom: prefix + half own mass - M/2."""
        return self.prefix_mass[:-1] + 0.5 * self.masses - 0.5 * self.total_mass

    def atom_index(self, y):
        """Index of the atom at position y, or -1 if y is not an atom."""
        k = int(np.searchsorted(self.positions, y, side="left"))
        if k < len(self) and self.positions[k] == y:
            return k
        return -1


class InitialData:
    """Atomic measure plus per-atom velocities and the relaxation time tau."""

    __slots__ = ("measure", "velocities", "tau", "max_speed")

    def __init__(self, measure: AtomicMeasure, velocities, tau: float):
        velocities = np.atleast_1d(np.asarray(velocities, dtype=float))
        if velocities.shape != measure.positions.shape:
            raise ValueError("velocities must match the atom count")
        if velocities.size and not np.all(np.isfinite(velocities)):
            raise ValueError("velocities must be finite")
        if not (0.0 < tau <= 1.0):
            raise TauOutOfRange(f"tau must lie in (0, 1], got {tau}")
        self.measure = measure
        self.velocities = velocities
        self.velocities.setflags(write=False)
        self.tau = float(tau)
        self.max_speed = float(np.max(np.abs(velocities))) if velocities.size else 0.0

    @classmethod
    def from_atoms(cls, positions, masses, velocities, tau):
        """Build from raw arrays, merging duplicate positions momentum-consistently."""
        positions = np.atleast_1d(np.asarray(positions, dtype=float))
        masses = np.atleast_1d(np.asarray(masses, dtype=float))
        velocities = np.atleast_1d(np.asarray(velocities, dtype=float))
        if not (positions.shape == masses.shape == velocities.shape):
            raise ValueError("positions, masses, velocities must have equal length")
        if positions.size:
            order = np.argsort(positions, kind="stable")
            positions, masses, velocities = (
                positions[order],
                masses[order],
                velocities[order],
            )
            if np.any(masses <= 0.0):
                raise ValueError("all masses must be strictly positive")
            if np.any(np.diff(positions) == 0.0):
                positions, masses, velocities = _merge_duplicates(
                    positions, masses, velocities
                )
        return cls(AtomicMeasure(positions, masses), velocities, tau)

    def with_tau(self, tau: float) -> "InitialData":
        """Same atoms and velocities under a different relaxation time."""
        return InitialData(self.measure, self.velocities, tau)

    def __len__(self):
        return len(self.measure)

    def __repr__(self):
        return f"InitialData(n={len(self)}, tau={self.tau!r}, U0={self.max_speed!r})"
