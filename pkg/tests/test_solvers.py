import math

import numpy as np
import pytest

from fermicool import (
    Canonical,
    CanonicalWorkspace,
    DegenerateTraceError,
    GrandCanonical,
    HamiltonianModel,
    HermitianMatrix,
    OverlapMatrix,
    SolverAbortError,
    SolverConfig,
    SystemSpec,
    bloch_rhs,
    build_huckel,
    canonical_normalization,
    canonical_rhs,
    commutator_defect,
    cool,
    default_chemical_potential,
    exact_canonical_fd,
    exact_gibbs,
    exact_grand_fd,
    grand_rhs,
    mu_rhs,
    occupation_spectrum,
    step_kraus1,
    step_kraus2,
    step_rk4,
)
from conftest import random_spd, random_symmetric


def scalar_system(level):
    return SystemSpec(HermitianMatrix([[level]]), OverlapMatrix([[1.0]]))


def logistic(p0, a, beta):
    return 1.0 / (1.0 + (1.0 - p0) / p0 * math.exp(a * beta))


class TestSolverConfig:
    def test_rejects_zero_beta_final(self):
        with pytest.raises(ValueError):
            SolverConfig("rk4", beta_final=0.0, delta_beta=0.1)

    def test_rejects_step_beyond_target(self):
        with pytest.raises(ValueError):
            SolverConfig("rk4", beta_final=1.0, delta_beta=2.0)

    def test_rejects_unknown_scheme(self):
        with pytest.raises(ValueError):
            SolverConfig("euler", beta_final=1.0, delta_beta=0.1)

    def test_snapping(self):
        cfg = SolverConfig("rk4", beta_final=1.0, delta_beta=0.03)
        assert cfg.n_steps == 33
        assert cfg.snapped_delta_beta == pytest.approx(1.0 / 33.0)
        assert cfg.n_steps * cfg.snapped_delta_beta == pytest.approx(1.0, abs=0)

    def test_single_step_allowed(self):
        cfg = SolverConfig("kraus1", beta_final=0.5, delta_beta=0.5)
        assert cfg.n_steps == 1


class TestGrandRhs:
    def test_initial_value_closed_form(self, rng):
        h = random_symmetric(rng, 5)
        mu = 0.3
        out = grand_rhs(0.5 * np.eye(5), h, np.eye(5), mu)
        np.testing.assert_allclose(out, -(h - mu * np.eye(5)) / 4.0, atol=1e-14)

    def test_zero_density_annihilates(self, rng):
        h = random_symmetric(rng, 4)
        np.testing.assert_array_equal(grand_rhs(np.zeros((4, 4)), h, np.eye(4), 0.1),
                                      np.zeros((4, 4)))

    def test_full_density_annihilates(self, rng):
        h = random_symmetric(rng, 4)
        out = grand_rhs(np.eye(4), h, np.eye(4), 0.1)
        np.testing.assert_allclose(out, np.zeros((4, 4)), atol=1e-15)

    def test_output_symmetric(self, rng):
        p = random_symmetric(rng, 6)
        h = random_symmetric(rng, 6)
        s = random_spd(rng, 6)
        out = grand_rhs(p, h, s, -0.2)
        assert np.abs(out - out.T).max() == 0.0

    def test_matches_exact_flow_derivative(self, rng):
        # centered difference of the exact state in beta, second order in h
        s = OverlapMatrix(random_spd(rng, 6))
        system = SystemSpec(HermitianMatrix(random_symmetric(rng, 6)), s)
        mu, beta = 0.15, 0.9
        p = exact_grand_fd(system, mu, beta).mat
        rhs = grand_rhs(p, system.h_core.mat, s.mat, mu, s_inv=s.inverse)
        errs = []
        for h in (1e-3, 5e-4):
            fd = (exact_grand_fd(system, mu, beta + h).mat
                  - exact_grand_fd(system, mu, beta - h).mat) / (2.0 * h)
            errs.append(np.abs(fd - rhs).max())
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)

    def test_vanishes_at_zero_temperature_projector(self):
        system = build_huckel(50, 0.569, 0.066)
        mu = default_chemical_potential(system)
        p = exact_grand_fd(system, mu, 1e4).mat
        out = grand_rhs(p, system.h_core.mat, system.s.mat, mu)
        assert np.abs(out).max() < 1e-10


class TestCanonicalRhs:
    def test_initial_scalar_is_trace_ratio(self, rng):
        s = random_spd(rng, 5)
        h = random_symmetric(rng, 5)
        norm = 0.8
        _, ws = canonical_rhs(0.5 * norm * s, h, s, norm)
        assert ws.lagrange_scalar == pytest.approx(np.trace(h) / np.trace(s), abs=1e-12)

    def test_hamiltonian_proportional_to_overlap_is_stationary(self, rng):
        s = random_spd(rng, 5)
        p = 0.4 * s + 0.05 * random_spd(rng, 5)
        rhs, _ = canonical_rhs(p, 2.7 * s, s, 1.0)
        np.testing.assert_allclose(rhs, np.zeros((5, 5)), atol=1e-12)

    def test_traceless_for_any_density(self, rng):
        system = build_huckel(6, 0.569, 0.066)
        for _ in range(5):
            p = random_spd(rng, 6, lo=0.05, hi=0.9)
            rhs, _ = canonical_rhs(p, system.h_core.mat, system.s.mat, 1.0)
            assert abs(np.trace(rhs)) < 1e-11 * 6

    def test_workspace_invariants(self, rng):
        s = random_spd(rng, 5)
        h = random_symmetric(rng, 5)
        p = random_spd(rng, 5, lo=0.1, hi=0.8)
        norm = 0.7
        rhs, ws = canonical_rhs(p, h, s, norm)
        si = np.linalg.inv(s)
        x = p @ (np.eye(5) - si @ p / norm)
        np.testing.assert_allclose(ws.fluct, x, atol=1e-12)
        scalar = np.trace(x @ si @ h + h @ si @ x.T) / np.trace(x + x.T)
        assert ws.lagrange_scalar == pytest.approx(scalar, rel=1e-12)

    def test_degenerate_trace_rejected(self, rng):
        h = random_symmetric(rng, 4)
        with pytest.raises(DegenerateTraceError):
            canonical_rhs(np.zeros((4, 4)), h, np.eye(4), 1.0)


class TestMuRhs:
    def test_stationary_when_scalar_matches(self):
        ws = CanonicalWorkspace(fluct=np.eye(2), lagrange_scalar=0.7)
        assert mu_rhs(0.7, 3.0, ws) == 0.0

    def test_arithmetic(self):
        ws = CanonicalWorkspace(fluct=np.eye(2), lagrange_scalar=1.0)
        assert mu_rhs(0.0, 2.0, ws) == pytest.approx(0.5)

    def test_requires_positive_beta(self):
        ws = CanonicalWorkspace(fluct=np.eye(2), lagrange_scalar=1.0)
        with pytest.raises(ValueError):
            mu_rhs(0.0, 0.0, ws)

    def test_plateau_at_low_temperature(self):
        # on the exact canonical state of the half-filled ring the scalar
        # equals mu for every beta, so the mu derivative vanishes
        system = build_huckel(50, 0.569, 0.066)
        for beta in (10.0, 100.0):
            p, mu = exact_canonical_fd(system, 25.0, beta)
            _, ws = canonical_rhs(p.mat, system.h_core.mat, system.s.mat, 1.0)
            assert abs(mu_rhs(mu, beta, ws)) < 1e-10


class TestBlochRhs:
    def test_identity_state(self, rng):
        h = random_symmetric(rng, 4)
        np.testing.assert_allclose(bloch_rhs(np.eye(4), h), -h, atol=1e-15)

    def test_commuting_diagonal(self):
        h = np.diag([0.0, 1.0])
        rho = np.diag([1.0, math.exp(-1.0)])
        np.testing.assert_allclose(bloch_rhs(rho, h), np.diag([0.0, -math.exp(-1.0)]),
                                   atol=1e-15)

    def test_zero_state(self, rng):
        h = random_symmetric(rng, 3)
        np.testing.assert_array_equal(bloch_rhs(np.zeros((3, 3)), h), np.zeros((3, 3)))

    def test_rk4_integration_reaches_gibbs_state(self, rng):
        h = random_symmetric(rng, 5)
        rho = np.eye(5)
        db, beta = 0.002, 2.0
        for _ in range(int(round(beta / db))):
            rho = step_rk4(rho, lambda r: bloch_rhs(r, h), db)
        exact = exact_gibbs(h, beta).mat
        assert np.abs(rho - exact).max() / np.abs(exact).max() < 1e-9


class TestStepKraus1:
    def test_zero_step_is_identity(self, rng):
        p = random_spd(rng, 4, lo=0.1, hi=0.9)
        h = random_symmetric(rng, 4)
        out, ops = step_kraus1(p, h, np.eye(4), 0.2, 0.0)
        np.testing.assert_allclose(out, p, atol=1e-15)
        np.testing.assert_array_equal(ops.generator, np.zeros((4, 4)))

    def test_hand_worked_two_level(self):
        p, ops = step_kraus1(0.5 * np.eye(2), np.diag([0.0, 1.0]), np.eye(2), 0.5, 0.1)
        np.testing.assert_allclose(ops.generator, np.diag([0.0125, -0.0125]), atol=1e-15)
        np.testing.assert_allclose(p, np.diag([0.512578125, 0.487578125]), atol=1e-15)

    def test_generator_invariant(self, rng):
        p = random_spd(rng, 5, lo=0.1, hi=0.9)
        h = random_symmetric(rng, 5)
        s = random_spd(rng, 5)
        mu, db = -0.3, 0.07
        _, ops = step_kraus1(p, h, s, mu, db)
        si = np.linalg.inv(s)
        k = -0.5 * db * (h @ si - mu * np.eye(5)) @ (np.eye(5) - p @ si)
        np.testing.assert_allclose(ops.generator, k, atol=1e-12)

    def test_positivity_preserved_for_many_steps(self, rng):
        h = random_symmetric(rng, 6)
        s = random_spd(rng, 6)
        p = 0.5 * s
        for _ in range(500):
            p, _ = step_kraus1(p, h, s, 0.1, 0.05)
            assert np.linalg.eigvalsh(p)[0] >= -1e-12


class TestStepKraus2:
    def test_zero_step_is_identity(self, rng):
        p = random_spd(rng, 4, lo=0.1, hi=0.9)
        h = random_symmetric(rng, 4)
        out, ops = step_kraus2(p, h, np.eye(4), 0.2, 0.0)
        np.testing.assert_allclose(out, p, atol=1e-15)
        np.testing.assert_allclose(ops.propagator, np.eye(4), atol=1e-15)

    def test_scalar_one_step_local_error_is_third_order(self):
        a, p0 = 1.3, 0.3
        errs = []
        for db in (0.2, 0.1, 0.05):
            p = np.array([[p0]])
            out, _ = step_kraus2(p, np.array([[a]]), np.eye(1), 0.0, db)
            errs.append(abs(out[0, 0] - logistic(p0, a, db)))
        assert errs[0] / errs[1] == pytest.approx(8.0, rel=0.25)
        assert errs[1] / errs[2] == pytest.approx(8.0, rel=0.25)

    def test_global_second_order_on_ring(self):
        system = build_huckel(6, 0.0, 1.0)
        mu = default_chemical_potential(system)
        exact = occupation_spectrum(exact_grand_fd(system, mu, 1.0), system.s)
        errs = []
        for db in (0.05, 0.025):
            traj = cool(HamiltonianModel(system), GrandCanonical(mu),
                        SolverConfig("kraus2", 1.0, db, record_every=10 ** 6))
            errs.append(np.abs(occupation_spectrum(traj.final_density, system.s) - exact).max())
        assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.2)

    def test_positivity_preserved_for_many_steps(self, rng):
        h = random_symmetric(rng, 6)
        s = random_spd(rng, 6)
        p = 0.5 * s
        for _ in range(500):
            p, _ = step_kraus2(p, h, s, -0.1, 0.05)
            assert np.linalg.eigvalsh(p)[0] >= -1e-12


class TestStepRk4:
    def test_zero_rhs_is_identity(self, rng):
        p = random_symmetric(rng, 3)
        out = step_rk4(p, lambda y: np.zeros_like(y), 0.3)
        np.testing.assert_array_equal(out, p)

    def test_scalar_exponential_decay(self):
        y = np.array(1.0)
        for _ in range(100):
            y = step_rk4(y, lambda v: -v, 0.01)
        assert float(y) == pytest.approx(math.exp(-1.0), abs=1e-10)

    def test_global_fourth_order_on_ring(self):
        system = build_huckel(6, 0.0, 1.0)
        mu = default_chemical_potential(system)
        exact = occupation_spectrum(exact_grand_fd(system, mu, 1.0), system.s)
        errs = []
        for db in (0.1, 0.05):
            traj = cool(HamiltonianModel(system), GrandCanonical(mu),
                        SolverConfig("rk4", 1.0, db, record_every=10 ** 6))
            errs.append(np.abs(occupation_spectrum(traj.final_density, system.s) - exact).max())
        assert math.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.3)


class TestCommutatorDefect:
    def test_two_by_two_hand_computed(self):
        h = np.diag([0.0, 1.0])
        h_next = h + 0.1 * np.array([[0.0, 1.0], [1.0, 0.0]])
        assert commutator_defect(h, h_next, 0.1) == pytest.approx(math.sqrt(2.0), abs=1e-12)

    def test_unchanged_hamiltonian(self, rng):
        h = random_symmetric(rng, 5)
        assert commutator_defect(h, h, 0.2) == 0.0

    def test_commuting_update(self, rng):
        h = random_symmetric(rng, 5)
        assert commutator_defect(h, h + 0.1 * h, 0.1) < 1e-13


class TestCool:
    def test_trajectory_grid_and_record_consistency(self):
        system = build_huckel(5, 0.1, 0.3)
        cfg = SolverConfig("rk4", beta_final=1.0, delta_beta=0.3, record_every=2)
        traj = cool(HamiltonianModel(system), GrandCanonical(0.1), cfg)
        # snapped to 3 steps of 1/3; records at beta = 0, 2/3, 1
        assert traj.betas[0] == 0.0
        assert traj.betas[-1] == 1.0
        assert traj.delta_beta == pytest.approx(1.0 / 3.0)
        n_rec = len(traj.betas)
        assert len(traj.densities) == n_rec
        assert len(traj.diagnostics.trace) == n_rec
        assert traj.mu_trace is None

    def test_grand_rk4_matches_oracle(self):
        system = build_huckel(8, 0.569, 0.066)
        mu = default_chemical_potential(system)
        traj = cool(HamiltonianModel(system), GrandCanonical(mu),
                    SolverConfig("rk4", 5.0, 0.01, record_every=100))
        oracle = exact_grand_fd(system, mu, 5.0)
        err = np.abs(occupation_spectrum(traj.final_density, system.s)
                     - occupation_spectrum(oracle, system.s)).max()
        assert err < 1e-9

    def test_canonical_rk4_trace_and_mu(self, data_dir):
        from fermicool import load_system

        system = load_system(data_dir / "sample_hcore.mat", data_dir / "sample_overlap.mat")
        traj = cool(HamiltonianModel(system), Canonical(4.0),
                    SolverConfig("rk4", 3.0, 0.003, record_every=50))
        assert np.abs(traj.diagnostics.trace - 4.0).max() < 1e-9
        for beta, mu_int in zip(traj.betas, traj.mu_trace):
            _, mu_oracle = exact_canonical_fd(system, 4.0, float(beta))
            assert abs(mu_int - mu_oracle) < 1e-3
        p_oracle, _ = exact_canonical_fd(system, 4.0, 3.0)
        err = np.abs(occupation_spectrum(traj.final_density, system.s)
                     - occupation_spectrum(p_oracle, system.s)).max()
        assert err < 1e-9

    def test_canonical_kraus_schemes_track_oracle(self, rng):
        s = OverlapMatrix(random_spd(rng, 5))
        system = SystemSpec(HermitianMatrix(random_symmetric(rng, 5)), s)
        ne = 2.0
        p_oracle, mu_oracle = exact_canonical_fd(system, ne, 2.0)
        occ_oracle = occupation_spectrum(p_oracle, s)
        errs = {}
        for scheme, tol_occ, tol_mu in (("kraus1", 5e-3, 5e-3), ("kraus2", 5e-6, 5e-6)):
            traj = cool(HamiltonianModel(system), Canonical(ne),
                        SolverConfig(scheme, 2.0, 0.002, record_every=100))
            errs[scheme] = np.abs(occupation_spectrum(traj.final_density, s) - occ_oracle).max()
            assert errs[scheme] < tol_occ
            assert abs(traj.final_mu - mu_oracle) < tol_mu
        assert errs["kraus2"] < errs["kraus1"]

    def test_canonical_kraus2_is_second_order(self, rng):
        s = OverlapMatrix(random_spd(rng, 4))
        system = SystemSpec(HermitianMatrix(random_symmetric(rng, 4)), s)
        occ_oracle = occupation_spectrum(exact_canonical_fd(system, 1.5, 1.0)[0], s)
        errs = []
        for db in (0.02, 0.01):
            traj = cool(HamiltonianModel(system), Canonical(1.5),
                        SolverConfig("kraus2", 1.0, db, record_every=10 ** 6))
            errs.append(np.abs(occupation_spectrum(traj.final_density, s) - occ_oracle).max())
        assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.3)

    def test_nonlinear_refresh_defect_positive_linear_zero(self):
        system = build_huckel(10, 0.569, 0.066)
        mu = default_chemical_potential(system)
        cfg = SolverConfig("rk4", 2.0, 0.01, record_every=10)
        lin = cool(HamiltonianModel(system), GrandCanonical(mu), cfg)
        assert lin.diagnostics.h_refresh_defect.max() == 0.0
        nl = cool(HamiltonianModel(system, coupling_u=0.1), GrandCanonical(mu), cfg)
        assert nl.diagnostics.h_refresh_defect.max() > 1e-6

    def test_nonlinear_per_stage_refresh_close_to_per_step(self):
        system = build_huckel(6, 0.569, 0.066)
        mu = default_chemical_potential(system)
        model = HamiltonianModel(system, coupling_u=0.1)
        cfg = SolverConfig("rk4", 2.0, 0.01, record_every=100)
        a = cool(model, GrandCanonical(mu), cfg)
        b = cool(model, GrandCanonical(mu), cfg, refresh_per_stage=True)
        diff = np.abs(a.final_density.mat - b.final_density.mat).max()
        assert 0.0 < diff < 1e-4

    def test_abort_on_blowup_reports_last_good_beta(self):
        system = build_huckel(4, 0.0, 50.0)
        with np.errstate(all="ignore"), pytest.raises(SolverAbortError) as err:
            cool(HamiltonianModel(system), GrandCanonical(0.0),
                 SolverConfig("rk4", 100.0, 50.0, record_every=1))
        assert 0.0 <= err.value.last_good_beta < 100.0

    def test_canonical_full_filling_rejected(self):
        system = build_huckel(4, 0.0, 1.0)
        from fermicool import InfeasibleEnsembleError

        with pytest.raises(InfeasibleEnsembleError):
            cool(HamiltonianModel(system), Canonical(4.0),
                 SolverConfig("rk4", 1.0, 0.1))

    def test_hermiticity_stays_tiny(self, rng):
        s = OverlapMatrix(random_spd(rng, 5))
        system = SystemSpec(HermitianMatrix(random_symmetric(rng, 5)), s)
        for scheme in ("kraus1", "kraus2", "rk4"):
            traj = cool(HamiltonianModel(system), GrandCanonical(0.0),
                        SolverConfig(scheme, 1.0, 0.01, record_every=1))
            assert traj.diagnostics.hermiticity_defect.max() <= 1e-11
            assert not traj.hermiticity_violations

    def test_grand_kraus1_is_first_order(self):
        system = build_huckel(6, 0.0, 1.0)
        mu = default_chemical_potential(system)
        exact = occupation_spectrum(exact_grand_fd(system, mu, 1.0), system.s)
        errs = []
        for db in (0.05, 0.025):
            traj = cool(HamiltonianModel(system), GrandCanonical(mu),
                        SolverConfig("kraus1", 1.0, db, record_every=10 ** 6))
            errs.append(np.abs(occupation_spectrum(traj.final_density, system.s) - exact).max())
        assert math.log2(errs[0] / errs[1]) == pytest.approx(1.0, abs=0.2)
