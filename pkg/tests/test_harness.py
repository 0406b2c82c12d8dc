"""Scenario runners and their certified verdicts."""

import numpy as np
import pytest

from kgmvar.functional import ConfigurationError, NonlinearityModel, PhysicalParams
from kgmvar.grid import BoundaryData, build_domain
from kgmvar.harness import (
    run_change_of_variables,
    run_q_limit_dirichlet,
    run_q_limit_neumann,
    run_scenario_set,
    run_th1,
    run_thmix,
    run_thnonlin,
)

GRID = 21


@pytest.fixture(scope="module")
def domain():
    return build_domain(2, (1.0, 1.0), (GRID, GRID))


PARAMS = PhysicalParams(m=1.0, omega=0.5, q=0.1)


def _const(d, kind, val):
    return BoundaryData.constant(d, kind, val)


class TestDichotomy:
    def test_nonzero_trace_branch(self, domain):
        v = run_th1(domain, PARAMS, _const(domain, "dirichlet", 1.0), _const(domain, "dirichlet", 1.0))
        assert v.passed
        assert v.name == "th1-nontrivial"
        assert v.measurements["u_l2"] > 1e-3
        assert v.measurements["residual_matter"] <= 1e-6

    def test_zero_trace_branch(self, domain):
        v = run_th1(domain, PARAMS, _const(domain, "dirichlet", 0.0), _const(domain, "dirichlet", 1.0))
        assert v.passed
        assert v.name == "th1-trivial"
        assert v.measurements["worst_v_l2"] <= 1e-6
        assert v.measurements["worst_identity"] <= 1e-8

    def test_spectral_condition_enforced(self, domain):
        bad = PhysicalParams(m=1.0, omega=10.0, q=0.1)
        with pytest.raises(ConfigurationError):
            run_th1(domain, bad, _const(domain, "dirichlet", 1.0), _const(domain, "dirichlet", 1.0))


class TestChangeOfVariables:
    def test_mapped_back_system(self, domain):
        v = run_change_of_variables(
            domain, PARAMS, _const(domain, "dirichlet", 1.0), _const(domain, "dirichlet", 1.0)
        )
        assert v.passed
        assert v.measurements["boundary_defect_u"] <= 1e-10
        assert v.measurements["boundary_defect_phi"] <= 1e-10

    def test_transformed_problem_invariances(self, domain):
        # doubling q while scaling the trace data keeps the transformed
        # inputs, hence the transformed solution, unchanged
        d = domain
        h = _const(d, "dirichlet", 1.0)
        zeta = _const(d, "dirichlet", 1.0)
        base = run_th1(d, PARAMS, h, zeta)

        q2 = 2.0 * PARAMS.q
        params2 = PhysicalParams(m=PARAMS.m, omega=PARAMS.omega, q=q2)
        h2 = h.scaled(PARAMS.q / q2)
        zeta2 = zeta.scaled(PARAMS.q / q2)
        other = run_th1(d, params2, h2, zeta2)
        assert np.isclose(
            base.measurements["u_l2"], other.measurements["u_l2"], rtol=1e-8
        )
        assert np.isclose(
            base.measurements["J_value"], other.measurements["J_value"], rtol=1e-8
        )


class TestQLimit:
    def test_dirichlet_convergence(self, domain):
        v = run_q_limit_dirichlet(
            domain, 1.0, 0.5, _const(domain, "dirichlet", 1.0), _const(domain, "dirichlet", 1.0)
        )
        assert v.passed
        errs = v.measurements["errors"]
        assert all(b < a for a, b in zip(errs[:-1], errs[1:]))
        assert all(r <= 0.7 for r in v.measurements["ratios"])

    def test_frequency_gate(self, domain):
        with pytest.raises(ConfigurationError):
            run_q_limit_dirichlet(
                domain, 1.0, 10.0, _const(domain, "dirichlet", 1.0), _const(domain, "dirichlet", 1.0)
            )

    def test_neumann_incompatibility(self, domain):
        v = run_q_limit_neumann(
            domain, 1.0, 0.5, _const(domain, "dirichlet", 1.0), _const(domain, "neumann", 1.0)
        )
        assert v.passed
        assert np.isclose(v.measurements["incompatibility"], 4.0, rtol=1e-12)

    def test_neumann_rejects_balanced_flux(self, domain):
        with pytest.raises(ConfigurationError):
            run_q_limit_neumann(
                domain, 1.0, 0.5, _const(domain, "dirichlet", 1.0), _const(domain, "neumann", 0.0)
            )


class TestMixedRegime:
    def test_nontrivial_corner(self, domain):
        params = PhysicalParams(m=1.0, omega=0.5, q=0.05)
        v = run_thmix(
            domain, params, _const(domain, "dirichlet", 1.0), _const(domain, "neumann", 0.1)
        )
        assert v.passed
        assert v.name == "thmix-nontrivial"
        assert v.measurements["flux_balance_rel_defect"] <= 1e-6

    def test_trivial_corner(self, domain):
        params = PhysicalParams(m=1.0, omega=0.5, q=0.05)
        theta_odd = BoundaryData.from_function(
            domain, "neumann", lambda x, y: np.sin(2.0 * np.pi * x)
        )
        v = run_thmix(domain, params, _const(domain, "dirichlet", 0.0), theta_odd)
        assert v.passed
        assert v.name == "thmix-trivial"

    def test_informational_corner(self, domain):
        params = PhysicalParams(m=1.0, omega=0.5, q=0.05)
        v = run_thmix(
            domain, params, _const(domain, "dirichlet", 0.0), _const(domain, "neumann", 0.3)
        )
        assert v.passed
        assert v.name == "thmix-informational"


class TestSuperlinear:
    def test_existence_and_multiplicity(self, domain):
        model = NonlinearityModel(p=4.0, mu=1.0)
        v = run_thnonlin(domain, PARAMS, _const(domain, "dirichlet", 1.0), model)
        assert v.passed
        assert v.measurements["n_points"] >= 2
        assert v.measurements["J_1"] > 0.0
        assert v.measurements["J_2"] > v.measurements["J_1"]
        assert v.measurements["grad_norm_2"] > v.measurements["grad_norm_1"]


class TestScenarioSets:
    def test_unknown_set_rejected(self):
        with pytest.raises(ConfigurationError):
            run_scenario_set("everything")

    def test_th1_set_passes(self):
        verdicts = run_scenario_set("th1", grid=GRID)
        assert len(verdicts) == 3
        assert all(v.passed for v in verdicts)

    def test_determinism(self):
        a = run_scenario_set("th1", seed=7, grid=15)
        b = run_scenario_set("th1", seed=7, grid=15)
        for va, vb in zip(a, b):
            assert va.measurements == vb.measurements


class TestCrossRegimeAgreement:
    def test_zero_flux_matches_zero_potential_trace(self, domain):
        # theta = 0 removes the flux lifting, and zeta = omega / q removes
        # the Dirichlet lifting; both reduce to the same interior problem,
        # so the physical matter fields agree
        d = domain
        h = _const(d, "dirichlet", 1.0)
        v_d = run_th1(d, PARAMS, h, _const(d, "dirichlet", PARAMS.omega / PARAMS.q))
        v_n = run_thmix(d, PARAMS, h, _const(d, "neumann", 0.0))
        assert v_d.passed and v_n.passed
        assert np.isclose(
            v_d.measurements["u_l2"], v_n.measurements["u_l2"], rtol=1e-6
        )
