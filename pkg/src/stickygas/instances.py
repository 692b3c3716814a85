"""Seeded random problem instances shared by the compare command and tests."""

from __future__ import annotations

import numpy as np

from .measure import InitialData

__all__ = ["random_instance", "sample_times_avoiding_events"]

TAU_CHOICES = (1.0, 0.5, 0.1)


def random_instance(rng: np.random.Generator, n_max: int = 50) -> InitialData:
    """One random atomic instance from the documented desk-scale ranges.

    N in 1..n_max, positions uniform on [-10, 10], masses on [0.01, 2],
    velocities on [-2, 2], tau drawn from {1, 0.5, 0.1}.
    """
    n = int(rng.integers(1, n_max + 1))
    positions = np.sort(rng.uniform(-10.0, 10.0, size=n))
    masses = rng.uniform(0.01, 2.0, size=n)
    velocities = rng.uniform(-2.0, 2.0, size=n)
    tau = float(TAU_CHOICES[int(rng.integers(0, len(TAU_CHOICES)))])
    return InitialData.from_atoms(positions, masses, velocities, tau)


def sample_times_avoiding_events(
    rng: np.random.Generator, n: int, t_lo: float, t_hi: float, event_times
) -> list:
    """Draw sample times keeping a margin from collision instants.

    Pointwise layer comparison exactly at a merge instant is side-dependent,
    so times landing within 1e-3*(1+t) of an event are redrawn.
    """
    events = np.asarray(sorted(event_times), dtype=float)
    out = []
    for _ in range(n):
        for _ in range(100):
            t = float(rng.uniform(t_lo, t_hi))
            if events.size == 0 or np.min(np.abs(events - t)) > 1e-3 * (1.0 + t):
                break
        out.append(t)
    return out
