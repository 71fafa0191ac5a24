"""Tests for trajectory classification and strip geometry checks."""

import numpy as np
import pytest

from benneylab.classify import (
    Verdict,
    classify_trajectory,
    f_square_check,
    strip_check,
)
from benneylab.evolve import SolverConfig, StopReason, Trajectory, run
from benneylab.fields import FieldState, TorusGrid, sample_field

TRAVELING = "traveling: amplitude=0.1 offset=-0.3 const=0"
PERTURBED = "perturbed: amplitude=0.1 offset=-0.3 const=0 delta=0.05"


def make_traj(states, reason=StopReason.REACHED_T_END):
    return Trajectory(snapshots=states, stopped_reason=reason)


class TestFSquareCheck:
    def test_traveling_by_construction(self):
        st = sample_field(TRAVELING, TorusGrid(64))
        assert f_square_check(st) < 1e-12

    def test_constant_field(self):
        st = sample_field("constant: u1=-0.5 u2=0 u3=0", TorusGrid(16))
        # c* = mean(u3 - u1^2) = -1/4 absorbs the offset exactly
        assert f_square_check(st) == 0.0

    def test_perturbed_dominated_by_u2(self):
        st = sample_field(f"perturbed: delta=0.05", TorusGrid(128))
        q = st.grid.cell_centers()
        expected = 0.05 * float(np.max(np.abs(np.sin(2 * np.pi * q))))
        assert f_square_check(st) == pytest.approx(expected, rel=1e-12)

    def test_zero_iff_square_factorization(self):
        rng = np.random.default_rng(11)
        g = TorusGrid(32)
        q = g.cell_centers()
        for _ in range(100):
            a, b, c = rng.uniform(-0.5, 0.5, size=3)
            u1 = a + b * np.cos(2 * np.pi * q)
            U = np.column_stack([u1, np.zeros(32), u1**2 + c])
            st = FieldState(grid=g, t=0.0, U=U)
            assert f_square_check(st) < 1e-13
            # polynomial oracle: expand (p^2/2 + u1)^2 + c' cell by cell
            j = rng.integers(0, 32)
            coeffs = np.array([0.25, 0.0, u1[j], 0.0, u1[j] ** 2 + c])
            from benneylab.polycore import build_poly

            assert np.max(np.abs(build_poly(U[j]).coeffs - coeffs)) < 1e-14
            # breaking the square structure is detected
            U2 = U.copy()
            U2[:, 1] = 0.03
            assert f_square_check(FieldState(grid=g, t=0.0, U=U2)) >= 0.03 - 1e-12


class TestClassifyTrajectory:
    def test_constant_verdict(self):
        st0 = sample_field("constant: u1=-0.5", TorusGrid(32))
        traj = run(st0, SolverConfig(t_end=1.0, snapshot_every=50))
        rep = classify_trajectory(traj, tol=1e-12)
        assert rep.verdict is Verdict.CONSTANT
        assert rep.dt_residual < 1e-12

    def test_traveling_verdict(self):
        st0 = sample_field(TRAVELING, TorusGrid(128))
        traj = run(st0, SolverConfig(scheme="central", cfl=0.5, t_end=1.0,
                                     snapshot_every=100))
        drift = float(np.max(np.abs(traj.snapshots[-1].U - st0.U)))
        rep = classify_trajectory(traj, tol=5 * drift)
        assert rep.verdict is Verdict.TRAVELING_WAVE
        assert rep.u2_residual < 5 * drift
        assert rep.mu_estimate is None

    def test_perturbed_blowup_non_classical(self):
        st0 = sample_field(PERTURBED, TorusGrid(256))
        traj = run(st0, SolverConfig(scheme="riemann", cfl=0.65, t_end=6.0,
                                     blowup_threshold=2.0, snapshot_every=100))
        assert traj.stopped_reason is StopReason.BLOWUP_DETECTED
        rep = classify_trajectory(traj, tol=0.01)
        assert rep.verdict is Verdict.NON_CLASSICAL

    def test_moving_profile_reports_mu(self):
        # synthetic translation of a profile violating the square relation
        g = TorusGrid(64)
        q = g.cell_centers()
        mu = 0.4

        def state_at(t):
            u1 = -0.5 + 0.1 * np.cos(2 * np.pi * (q - mu * t))
            u2 = -2 * mu * u1 - mu**3
            u3 = u1**2
            return FieldState(grid=g, t=t, U=np.column_stack([u1, u2, u3]))

        traj = make_traj([state_at(0.0), state_at(0.1), state_at(0.2)])
        rep = classify_trajectory(traj, tol=1e-3)
        assert rep.verdict is Verdict.NON_CLASSICAL
        assert rep.mu_estimate == pytest.approx(mu, abs=1e-3)

    def test_invariant_under_rotation_and_u3_shift(self):
        st0 = sample_field(TRAVELING, TorusGrid(64))
        traj = run(st0, SolverConfig(t_end=0.5, snapshot_every=50))
        rep0 = classify_trajectory(traj, tol=1e-2)

        def transform(s, k, c):
            U = np.roll(s.U, k, axis=0).copy()
            U[:, 2] += c
            return FieldState(grid=s.grid, t=s.t, U=U)

        traj2 = make_traj([transform(s, 17, 0.7) for s in traj.snapshots],
                          traj.stopped_reason)
        rep2 = classify_trajectory(traj2, tol=1e-2)
        assert rep2.verdict is rep0.verdict
        assert rep2.dt_residual == pytest.approx(rep0.dt_residual, rel=1e-12)
        assert rep2.square_residual == pytest.approx(rep0.square_residual, abs=1e-12)

    def test_requires_two_snapshots(self):
        st0 = sample_field("constant: u1=-0.5", TorusGrid(32))
        with pytest.raises(ValueError):
            classify_trajectory(make_traj([st0]), tol=1e-3)


class TestStripCheck:
    def test_constant_single_strip(self):
        st0 = sample_field("constant: u1=-0.5", TorusGrid(32))
        traj = run(st0, SolverConfig(t_end=1.0, snapshot_every=50))
        ok, report = strip_check(traj)
        assert ok
        assert report["components_t0"][0][2] == "hyperbolic"

    def test_mixed_regime_stationary_strips(self):
        st0 = sample_field("elliptic-bump: amplitude=0.2", TorusGrid(256))
        cfg = SolverConfig(scheme="central", cfl=0.3, t_end=0.25, snapshot_every=100)
        traj = run(st0, cfg)
        assert traj.stopped_reason is StopReason.REACHED_T_END
        ok, report = strip_check(traj)
        assert ok, report
        regs = [c[2] for c in report["components_t0"]]
        assert "hyperbolic" in regs and "elliptic" in regs
        assert report["omega0_equals_omega00"]

    def test_perturbed_informational(self):
        st0 = sample_field(PERTURBED, TorusGrid(128))
        traj = run(st0, SolverConfig(scheme="central", cfl=0.5, t_end=0.3,
                                     snapshot_every=100))
        ok, report = strip_check(traj)
        # fully hyperbolic torus: one component, trivially stable
        assert report["components_t0"][0][1] == 128
        assert ok
