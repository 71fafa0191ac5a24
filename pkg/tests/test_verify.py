"""Tests for the finite-difference oracle layer."""

import json

import numpy as np
import pytest

from benneylab.errors import StepTooLargeError
from benneylab.eigenstructure import derivative_table
from benneylab.polycore import maclane_forward, maclane_inverse
from benneylab.verify import (
    IDENTITY_SPECS,
    fd_convergence_ratio,
    fd_lambda_derivs,
    fd_u_derivs,
    run_identity_suite,
    write_report,
)

U0 = [-0.5, 0.0, 0.0]
U_GENERIC = [-0.9, 0.2, 0.1]


class TestFdLambdaDerivs:
    def test_matches_analytic(self):
        fd = fd_lambda_derivs(U0, 1e-5)
        assert np.max(np.abs(fd - derivative_table(U0).dlam)) < 1e-7

    def test_second_order_convergence(self):
        ratio = fd_convergence_ratio(U_GENERIC, h=1e-3)
        assert 3.0 < ratio < 5.0

    def test_constant_shift_leaves_speeds(self):
        # r -> r + (c, c, c) only moves the constant coefficient
        r = maclane_forward(U0)
        c = 0.37
        shifted = maclane_inverse(r + c, U0)
        assert np.max(np.abs(shifted.u[:2] - [-0.5, 0.0])) < 1e-11
        assert shifted.u[2] == pytest.approx(c, abs=1e-11)

    def test_step_too_large(self):
        with pytest.raises(StepTooLargeError):
            # r-gaps here are ~0.25; a unit step escapes the cone
            fd_lambda_derivs(U0, h=20.0)


class TestFdUDerivs:
    def test_first_derivatives(self):
        u_r, _ = fd_u_derivs(U0, 1e-5)
        assert np.max(np.abs(u_r - [0.5, -1.0, 0.5])) < 1e-6

    def test_gibbons_tsarev_corner(self):
        # u_{r1 r3} = 2 (1/2)(1/2)/(-2)^2 = 1/8 at the symmetric point
        _, u_rr = fd_u_derivs(U0, 1e-4)
        assert u_rr[0, 2] == pytest.approx(0.125, abs=1e-4)

    def test_mixed_partials_symmetric(self):
        _, u_rr = fd_u_derivs(U_GENERIC, 1e-4)
        assert np.max(np.abs(u_rr - u_rr.T)) < 1e-6


class TestIdentitySuite:
    def test_small_suite_all_pass(self):
        reports = run_identity_suite(40, seed=42)
        assert len(reports) == len(IDENTITY_SPECS) >= 7
        for rep in reports:
            assert rep.passed, f"{rep.identity}: rel={rep.max_rel_err} abs={rep.max_abs_err}"

    def test_zero_samples_vacuous_pass(self):
        reports = run_identity_suite(0, seed=1)
        assert all(r.passed for r in reports)
        assert all(r.n_samples == 0 for r in reports)

    def test_near_degenerate_band_stress(self):
        tolerances = {name: 1e-3 for name, metric, _ in IDENTITY_SPECS if metric == "rel"}
        tolerances["lagrange_delta"] = 1e-3
        # Second differences bottom out near 3e-3 in this band (double
        # precision floor at r-gaps of ~1e-5); first-order identities hold 1e-3.
        tolerances["gibbons_tsarev"] = 1e-2
        reports = run_identity_suite(
            25, seed=3, box=0.6, disc_min=0.001, disc_max=0.01, gap_min=0.0,
            second_gap_fraction=0.05, tolerances=tolerances
        )
        for rep in reports:
            assert rep.passed, f"{rep.identity}: rel={rep.max_rel_err} abs={rep.max_abs_err}"

    def test_deterministic_for_seed(self):
        a = run_identity_suite(10, seed=7)
        b = run_identity_suite(10, seed=7)
        assert a == b

    def test_impossible_tolerance_fails(self):
        tolerances = {"lambda_r_diagonal": 1e-15}
        reports = run_identity_suite(5, seed=9, tolerances=tolerances)
        by_name = {r.identity: r for r in reports}
        assert not by_name["lambda_r_diagonal"].passed

    def test_report_json_round_trip(self, tmp_path):
        reports = run_identity_suite(5, seed=11)
        out = tmp_path / "report.json"
        write_report(reports, out, extra={"seed": 11, "n_samples": 5})
        payload = json.loads(out.read_text())
        assert payload["seed"] == 11
        assert len(payload["identities"]) == len(IDENTITY_SPECS)
        assert all("pass" in entry for entry in payload["identities"])
