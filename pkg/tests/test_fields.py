"""Tests for periodic fields, initial data, regime maps, and CSV I/O."""

import numpy as np
import pytest

from benneylab.errors import BadSpecError
from benneylab.fields import (
    FieldState,
    TorusGrid,
    d_dq,
    d_dq_array,
    parse_initial_spec,
    read_snapshots_csv,
    regime_map,
    riemann_fields,
    sample_field,
    write_snapshots_csv,
)
from benneylab.polycore import Regime, discriminant, maclane_forward


class TestTorusGrid:
    def test_centers(self):
        g = TorusGrid(8)
        assert g.h == pytest.approx(0.125)
        assert np.allclose(g.cell_centers(), (np.arange(8) + 0.5) / 8)

    def test_minimum_size(self):
        with pytest.raises(ValueError):
            TorusGrid(7)


class TestSampleField:
    def test_constant(self):
        st = sample_field("constant: u1=-0.5 u2=0 u3=0", TorusGrid(64))
        assert st.t == 0.0
        assert np.allclose(st.U, np.tile([-0.5, 0.0, 0.0], (64, 1)))

    def test_traveling_structure(self):
        st = sample_field("traveling: amplitude=0.1 offset=-0.3 const=0", TorusGrid(64))
        q = st.grid.cell_centers()
        assert np.allclose(st.U[:, 0], -0.3 - 0.1 * np.cos(2 * np.pi * q))
        assert np.allclose(st.U[:, 1], 0.0)
        assert np.allclose(st.U[:, 2], st.U[:, 0] ** 2)
        # entirely hyperbolic
        assert np.all(discriminant(st.U[:, 0], st.U[:, 1]) > 0)

    def test_perturbed_stays_hyperbolic(self):
        st = sample_field(
            "perturbed: amplitude=0.1 offset=-0.3 const=0 delta=0.05", TorusGrid(128)
        )
        q = st.grid.cell_centers()
        assert np.allclose(st.U[:, 1], 0.05 * np.sin(2 * np.pi * q))
        assert np.all(discriminant(st.U[:, 0], st.U[:, 1]) > 0)

    def test_elliptic_bump_mixes_regimes(self):
        st = sample_field("elliptic-bump: amplitude=0.2", TorusGrid(64))
        d = discriminant(st.U[:, 0], st.U[:, 1])
        assert (d > 0).any() and (d < 0).any()

    def test_custom_table(self, tmp_path):
        path = tmp_path / "table.csv"
        qs = np.linspace(0, 1, 17)[:-1]
        u1 = -0.5 + 0.1 * np.sin(2 * np.pi * qs)
        rows = ["q,u1,u2,u3"] + [f"{q},{a},0.0,0.25" for q, a in zip(qs, u1)]
        path.write_text("\n".join(rows) + "\n")
        st = sample_field(f"custom-table: path={path}", TorusGrid(16))
        assert np.max(np.abs(st.U[:, 0] - (-0.5 + 0.1 * np.sin(2 * np.pi * st.grid.cell_centers())))) < 0.01
        assert np.allclose(st.U[:, 2], 0.25)

    @pytest.mark.parametrize(
        "bad",
        [
            "unknown-family: a=1",
            "traveling: amplitude",
            "traveling: amplitude=abc",
            "traveling: bogus_param=1",
            "custom-table:",
        ],
    )
    def test_bad_specs(self, bad):
        with pytest.raises(BadSpecError):
            parse_initial_spec(bad)


class TestDDq:
    def test_constant_field(self):
        st = sample_field("constant: u1=-0.5", TorusGrid(32))
        assert np.max(np.abs(d_dq(st, 0))) < 1e-14

    def test_cosine_derivative(self):
        g = TorusGrid(128)
        q = g.cell_centers()
        f = np.cos(2 * np.pi * q)
        df = d_dq_array(f, g.h)
        err = np.max(np.abs(df + 2 * np.pi * np.sin(2 * np.pi * q)))
        # truncation constant (2 pi)^5 h^4 / 30 = 1.22e-6 absolute at N=128
        assert err < 1.5e-6
        assert err / (2 * np.pi) < 1e-6

    def test_fourth_order_convergence(self):
        errs = []
        for N in (64, 128):
            g = TorusGrid(N)
            q = g.cell_centers()
            df = d_dq_array(np.cos(2 * np.pi * q), g.h)
            errs.append(np.max(np.abs(df + 2 * np.pi * np.sin(2 * np.pi * q))))
        ratio = errs[0] / errs[1]
        assert 12 < ratio < 20  # order 4 halving => ~16


class TestRegimeMap:
    def test_uniform_hyperbolic(self):
        st = sample_field("constant: u1=-0.5", TorusGrid(32))
        rm = regime_map(st)
        assert len(rm.components) == 1
        assert rm.components[0] == (0, 32, Regime.HYPERBOLIC)

    def test_uniform_elliptic(self):
        st = sample_field("constant: u1=0.5", TorusGrid(32))
        rm = regime_map(st)
        assert rm.components[0][2] is Regime.ELLIPTIC

    def test_mixed_cos_field(self):
        # u1 = -cos(2 pi q): hyperbolic around q=0, elliptic around q=1/2
        g = TorusGrid(64)
        q = g.cell_centers()
        st = FieldState(grid=g, t=0.0, U=np.column_stack(
            [-np.cos(2 * np.pi * q), np.zeros(64), np.zeros(64)]))
        rm = regime_map(st)
        regs = {c[2] for c in rm.components}
        assert Regime.HYPERBOLIC in regs and Regime.ELLIPTIC in regs
        d = discriminant(st.U[:, 0], st.U[:, 1])
        assert np.array_equal(rm.codes == 0, d > 1e-10)

    def test_degenerate_cells_tagged_with_pair(self):
        g = TorusGrid(8)
        U = np.tile([-0.5, 0.0, 0.0], (8, 1))
        U[3] = [-1.5, 2.0, 0.0]   # double root of the first pair... check below
        U[5] = [0.0, 0.0, 1.0]    # triple collision
        st = FieldState(grid=g, t=0.0, U=U)
        rm = regime_map(st)
        assert rm.codes[3] == 2 and rm.codes[5] == 3
        assert rm.degenerate_pairs[5] == "all"
        assert rm.degenerate_pairs[3] in ((1, 2), (2, 3))

    def test_coarse_tolerance_boundary_is_max_degenerate(self):
        # with a wide discriminant band the cells straddling the regime
        # boundary classify as degenerate, and with u2 = 0 they are all
        # maximally degenerate (every speed collapses to zero there)
        from benneylab.polycore import RegimeTolerance

        g = TorusGrid(64)
        q = g.cell_centers()
        st = FieldState(grid=g, t=0.0, U=np.column_stack(
            [-np.cos(2 * np.pi * q), np.zeros(64), np.zeros(64)]))
        tol = RegimeTolerance(eps_disc=1e-2, eps_zero=0.1)
        rm = regime_map(st, tol)
        degen = np.nonzero(rm.codes >= 2)[0]
        assert len(degen) > 0
        assert all(rm.codes[j] == 3 for j in degen)
        assert all(rm.degenerate_pairs[int(j)] == "all" for j in degen)

    def test_rotation_equivariance(self):
        st = sample_field("elliptic-bump: amplitude=0.2", TorusGrid(64))
        rm0 = regime_map(st)
        shift = 13
        st2 = FieldState(grid=st.grid, t=0.0, U=np.roll(st.U, shift, axis=0))
        rm2 = regime_map(st2)
        assert sorted((c[1], c[2].value) for c in rm0.components) == sorted(
            (c[1], c[2].value) for c in rm2.components
        )
        starts0 = sorted((c[0] + shift) % 64 for c in rm0.components)
        assert starts0 == sorted(c[0] for c in rm2.components)


class TestRiemannFields:
    def test_constant_matches_pointwise(self):
        st = sample_field("constant: u1=-0.5", TorusGrid(16))
        r, mask = riemann_fields(st)
        assert mask.all()
        assert np.allclose(r, np.tile([-0.25, 0.0, -0.25], (16, 1)), atol=1e-13)

    def test_traveling_outer_invariants_constant(self):
        st = sample_field("traveling: amplitude=0.1 offset=-0.3 const=0", TorusGrid(128))
        r, mask = riemann_fields(st)
        assert mask.all()
        # square structure: both outer critical values are the same constant
        assert np.max(np.abs(r[:, 0])) < 1e-10
        assert np.max(np.abs(r[:, 2])) < 1e-10
        assert np.max(np.abs(r[:, 0] - r[:, 2])) < 1e-10

    def test_mask_matches_regime_map(self):
        st = sample_field("elliptic-bump: amplitude=0.2", TorusGrid(64))
        r, mask = riemann_fields(st)
        rm = regime_map(st)
        assert np.array_equal(mask, rm.codes == 0)
        assert np.all(np.isnan(r[~mask]))

    def test_pointwise_agreement_with_scalar(self):
        st = sample_field("perturbed: delta=0.05", TorusGrid(32))
        r, mask = riemann_fields(st)
        for j in range(32):
            assert np.max(np.abs(r[j] - maclane_forward(st.U[j]))) < 1e-12


class TestCsvRoundTrip:
    def test_round_trip(self, tmp_path):
        st = sample_field("perturbed: delta=0.05", TorusGrid(16))
        st2 = FieldState(grid=st.grid, t=0.25, U=st.U * 1.01)
        path = tmp_path / "snaps.csv"
        write_snapshots_csv([st, st2], path)
        back = read_snapshots_csv(path)
        assert len(back) == 2
        assert back[0].t == 0.0 and back[1].t == 0.25
        assert np.max(np.abs(back[0].U - st.U)) < 1e-15
        assert np.max(np.abs(back[1].U - st2.U)) < 1e-15

    def test_blank_r_outside_hyperbolic(self, tmp_path):
        st = sample_field("constant: u1=0.5", TorusGrid(8))
        path = tmp_path / "snaps.csv"
        write_snapshots_csv([st], path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "t,q,u1,u2,u3,regime,r1,r2,r3"
        assert lines[1].endswith("elliptic,,,")
