import math

import numpy as np
import pytest
from scipy.optimize import brentq

from stickygas.errors import NoClusterAt, NonPositiveTime
from stickygas.measure import AtomicMeasure, InitialData
from stickygas.oracle import (
    oracle_cdf,
    oracle_velocity,
    simulate_drift,
    simulate_ep,
)
from tests.conftest import make_random_instance


class TestSingleAtom:
    def test_free_flight_closed_form(self, single_atom):
        traj = simulate_ep(single_atom, 3.0)
        assert traj.events == ()
        for t in (0.2, 1.0, 2.7):
            state = traj.state_at(t)
            (c,) = state.clusters
            assert c.position == pytest.approx(1.0 - math.exp(-t), rel=1e-13)
            assert c.velocity == pytest.approx(math.exp(-t), rel=1e-13)


class TestTwoAtomBenchmark:
    def test_collision_time_against_independent_root(self, two_atom_symmetric):
        traj = simulate_ep(two_atom_symmetric, 6.0)
        assert len(traj.events) == 1
        # gap equation reduces to t + e^{-t} = 5; brentq is the oracle here
        root = brentq(lambda s: s + math.exp(-s) - 5.0, 4.0, 6.0, xtol=1e-14)
        assert abs(traj.events[0].time - root) <= 1e-10
        assert traj.events[0].position == pytest.approx(0.0, abs=1e-12)

    def test_merged_cluster_at_rest(self, two_atom_symmetric):
        traj = simulate_ep(two_atom_symmetric, 6.0)
        state = traj.state_at(6.0)
        (c,) = state.clusters
        assert c.velocity == 0.0
        assert c.position == pytest.approx(0.0, abs=1e-12)
        assert (c.lo, c.hi) == (0, 2)


class TestConservation:
    def test_momentum_decay_law(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            data = make_random_instance(rng)
            q0 = float(np.sum(data.measure.masses * data.velocities))
            traj = simulate_ep(data, 7.0)
            for t in np.linspace(0.1, 7.0, 9):
                state = traj.state_at(float(t))
                expect = q0 * math.exp(-t / data.tau)
                assert state.momentum() == pytest.approx(
                    expect, abs=1e-12 * (1.0 + abs(q0))
                )

    def test_mass_conserved_and_order_kept(self):
        rng = np.random.default_rng(32)
        for _ in range(20):
            data = make_random_instance(rng)
            M = data.measure.total_mass
            traj = simulate_ep(data, 7.0)
            assert len(traj.events) <= len(data) - 1
            for state in traj.states:
                assert sum(c.mass for c in state.clusters) == pytest.approx(
                    M, rel=1e-14
                )
                pos = state.positions()
                assert np.all(np.diff(pos) > 0) or len(pos) == 1
                ranges = [(c.lo, c.hi) for c in state.clusters]
                assert ranges[0][0] == 0 and ranges[-1][1] == len(data)
                assert all(a[1] == b[0] for a, b in zip(ranges[:-1], ranges[1:]))


class TestDeterminism:
    def test_resume_reproduces_remaining_trajectory(self):
        rng = np.random.default_rng(33)
        data = make_random_instance(rng, n_max=10)
        traj = simulate_ep(data, 7.0)
        if len(traj.events) == 0:
            pytest.skip("instance produced no events")
        for idx in range(1, len(traj.states) - 1):
            resumed = simulate_ep(data, 7.0).resume(idx)
            tail = [s for s in traj.states if s.time >= traj.states[idx].time]
            assert len(resumed.states) == len(tail)
            for a, b in zip(tail, resumed.states):
                assert a.time == b.time
                assert a.clusters == b.clusters

    def test_repeat_runs_identical(self):
        rng = np.random.default_rng(34)
        data = make_random_instance(rng)
        t1 = simulate_ep(data, 5.0)
        t2 = simulate_ep(data, 5.0)
        assert t1.states == t2.states
        assert t1.events == t2.events


class TestDrift:
    def test_two_atom_collides_at_four(self, two_atom_symmetric):
        traj = simulate_drift(two_atom_symmetric.measure, 5.0)
        assert len(traj.events) == 1
        assert traj.events[0].time == 4.0
        assert traj.events[0].position == pytest.approx(0.0, abs=1e-15)
        (c,) = traj.state_at(5.0).clusters
        assert c.velocity == 0.0

    def test_initial_speeds(self, two_atom_symmetric):
        traj = simulate_drift(two_atom_symmetric.measure, 1.0)
        state = traj.states[0]
        assert state.clusters[0].velocity == 0.25
        assert state.clusters[1].velocity == -0.25

    def test_single_atom_stationary(self):
        m = AtomicMeasure([0.7], [2.0])
        traj = simulate_drift(m, 3.0)
        (c,) = traj.state_at(3.0).clusters
        assert c.position == 0.7 and c.velocity == 0.0

    def test_three_equal_atoms_symmetric(self):
        w = 0.6
        m = AtomicMeasure([-2.0, 0.0, 2.0], [w, w, w])
        traj = simulate_drift(m, 0.5)
        state = traj.states[0]
        assert state.clusters[1].velocity == pytest.approx(0.0, abs=1e-15)
        assert state.clusters[0].velocity == pytest.approx(w, rel=1e-14)
        assert state.clusters[2].velocity == pytest.approx(-w, rel=1e-14)

    def test_total_drift_momentum_zero(self):
        rng = np.random.default_rng(35)
        for _ in range(10):
            data = make_random_instance(rng)
            traj = simulate_drift(data.measure, 6.0)
            for state in traj.states:
                assert state.momentum() == pytest.approx(
                    0.0, abs=1e-12 * (1 + data.measure.total_mass)
                )


class TestStateQueries:
    def test_oracle_cdf_examples(self, two_atom_symmetric):
        traj = simulate_ep(two_atom_symmetric, 6.0)
        post = traj.state_at(6.0)
        assert oracle_cdf(post, 0.1) == 1.0
        assert oracle_cdf(post, -5.0) == 0.0
        pre = traj.state_at(1.0)
        assert oracle_cdf(pre, 0.0) == 0.5

    def test_velocity_lookup(self, two_atom_symmetric):
        traj = simulate_ep(two_atom_symmetric, 6.0)
        state = traj.state_at(1.0)
        x = state.clusters[0].position
        assert oracle_velocity(state, x) == state.clusters[0].velocity
        with pytest.raises(NoClusterAt):
            oracle_velocity(state, 100.0)

    def test_state_at_bounds(self, single_atom):
        traj = simulate_ep(single_atom, 2.0)
        with pytest.raises(ValueError):
            traj.state_at(2.5)
        assert traj.state_at(0.0).clusters[0].position == 0.0

    def test_rejects_nonpositive_horizon(self, single_atom):
        with pytest.raises(NonPositiveTime):
            simulate_ep(single_atom, 0.0)
        with pytest.raises(NonPositiveTime):
            simulate_drift(single_atom.measure, -1.0)


class TestSimultaneousCollisions:
    def test_symmetric_triple_merge(self):
        # outer atoms reach the middle one at the same instant
        data = InitialData.from_atoms(
            [-1.0, 0.0, 1.0], [0.4, 0.4, 0.4], [0.0, 0.0, 0.0], 1.0
        )
        traj = simulate_ep(data, 20.0)
        final = traj.state_at(20.0)
        assert len(final.clusters) == 1
        assert final.clusters[0].position == pytest.approx(0.0, abs=1e-10)
        assert final.clusters[0].velocity == pytest.approx(0.0, abs=1e-12)

    def test_full_collapse_eventually(self):
        rng = np.random.default_rng(36)
        data = make_random_instance(rng, n_max=6)
        traj = simulate_ep(data, 500.0)
        assert len(traj.state_at(500.0).clusters) == 1

    def test_deep_decay_regime(self):
        # t/tau beyond the exponent flush threshold: the merged cluster
        # must sit exactly at the center of mass, at rest
        data = InitialData.from_atoms(
            [-1.0, 2.0], [1.0, 3.0], [0.5, -0.5], 0.1
        )
        traj = simulate_ep(data, 90.0)  # t/tau = 900 > 700
        (c,) = traj.state_at(90.0).clusters
        com = (1.0 * -1.0 + 3.0 * 2.0) / 4.0
        drift = 0.1 * (1.0 * 0.5 + 3.0 * -0.5) / 4.0  # tau * v_com decays in
        assert c.velocity == pytest.approx(0.0, abs=1e-15)
        assert math.isfinite(c.position)
        # center of mass obeys x_com(t) = com + tau*(1 - e^{-t/tau}) v_com(0)
        assert c.position == pytest.approx(com + drift, rel=1e-12)
