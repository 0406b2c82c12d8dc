"""The reduction map and its certified estimates."""

import numpy as np
import pytest

from conftest import dense_dirichlet_solve
from kgmvar.elliptic import solve_lifting_U, solve_phi_D, solve_phi_N
from kgmvar.functional import PhysicalParams
from kgmvar.grid import (
    BoundaryData,
    ScalarField,
    build_domain,
    field_from_interior,
    zeros_field,
)
from kgmvar.reduction import (
    DegenerateOperatorError,
    dirichlet_residual,
    neumann_flux_balance,
    solve_phi_v_dirichlet,
    solve_phi_v_neumann,
    split_xi_eta,
    verify_energy_identity,
    verify_neumann_estimates,
    verify_phi_bounds,
)

PARAMS = PhysicalParams(m=1.0, omega=0.5, q=0.1)


@pytest.fixture
def setting(square15, rng):
    d = square15
    h = BoundaryData.constant(d, "dirichlet", 1.0)
    zeta = BoundaryData.constant(d, "dirichlet", 1.0)
    U = solve_lifting_U(d, PARAMS, h)
    PhiD = solve_phi_D(d, zeta, PARAMS)
    v = field_from_interior(d, 0.5 * rng.standard_normal(d.counts))
    return d, U, PhiD, v


def test_zero_lifting_gives_zero_phi(square15, rng):
    d = square15
    U = zeros_field(d)
    PhiD = zeros_field(d)
    v = field_from_interior(d, rng.standard_normal(d.counts))
    state = solve_phi_v_dirichlet(d, v, U, PhiD)
    assert np.max(np.abs(state.phi_v.values)) == 0.0


def test_dirichlet_phi_vs_dense(setting):
    d, U, PhiD, v = setting
    state = solve_phi_v_dirichlet(d, v, U, PhiD, tol=1e-12)
    pot = (v.values + U.values) ** 2
    rhs = (-PhiD.values * pot)[d.interior]
    expect = dense_dirichlet_solve(d, rhs, potential=pot)
    assert np.allclose(state.phi_v.interior, expect, atol=1e-10)
    assert dirichlet_residual(d, v, U, PhiD, state.phi_v) < 1e-8


def test_energy_identity_small(setting):
    d, U, PhiD, v = setting
    state = solve_phi_v_dirichlet(d, v, U, PhiD, tol=1e-12)
    assert verify_energy_identity(state, U, PhiD) < 1e-10


def test_phi_bounds_one_signed(setting):
    d, U, PhiD, v = setting
    state = solve_phi_v_dirichlet(d, v, U, PhiD, tol=1e-12)
    report = verify_phi_bounds(state, PhiD, U, decomposition=True)
    assert report["pass_maxmin"] and report["pass_sup"]
    assert report["decomposition_error_sub"] < 1e-8
    assert report["decomposition_error_sup"] < 1e-8
    assert report["superposition_error"] < 1e-8


def test_phi_bounds_rejects_neumann_state(square15, rng):
    d = square15
    h = BoundaryData.constant(d, "dirichlet", 1.0)
    theta = BoundaryData.constant(d, "neumann", 0.1)
    U = solve_lifting_U(d, PARAMS, h)
    PhiN, kappa = solve_phi_N(d, theta, PARAMS.q)
    v = field_from_interior(d, rng.standard_normal(d.counts))
    state = solve_phi_v_neumann(d, v, U, PhiN, PARAMS.q, kappa)
    with pytest.raises(ValueError):
        verify_phi_bounds(state, PhiN)


class TestNeumannSplit:
    @pytest.fixture
    def neumann_setting(self, square15, rng):
        d = square15
        h = BoundaryData.constant(d, "dirichlet", 1.0)
        theta = BoundaryData.from_function(
            d, "neumann", lambda x, y: 0.2 + 0.1 * np.cos(np.pi * x)
        )
        U = solve_lifting_U(d, PARAMS, h)
        PhiN, kappa = solve_phi_N(d, theta, PARAMS.q, tol=1e-12)
        v = field_from_interior(d, 0.3 * rng.standard_normal(d.counts))
        return d, U, PhiN, kappa, theta, v

    def test_superposition(self, neumann_setting):
        d, U, PhiN, kappa, theta, v = neumann_setting
        state = solve_phi_v_neumann(d, v, U, PhiN, PARAMS.q, kappa, tol=1e-12)
        xi, eta = split_xi_eta(d, v, U, PhiN, PARAMS.q, kappa, tol=1e-12)
        assert np.allclose(xi.values + eta.values, state.phi_v.values, atol=1e-9)

    def test_estimates(self, neumann_setting):
        d, U, PhiN, kappa, theta, v = neumann_setting
        xi, eta = split_xi_eta(d, v, U, PhiN, PARAMS.q, kappa, tol=1e-12)
        report = verify_neumann_estimates(xi, eta, v, U, PhiN, PARAMS.q, kappa)
        assert report["pass_coupling"]
        assert report["pass_box"]
        assert report["pass_sign"]
        assert report["eta_gradient_ratio"] is not None

    def test_flux_balance_at_lifting_level(self, neumann_setting):
        # summing the solved potential equation over all weighted nodes gives
        # the volume/surface balance identity
        d, U, PhiN, kappa, theta, v = neumann_setting
        state = solve_phi_v_neumann(d, v, U, PhiN, PARAMS.q, kappa, tol=1e-12)
        pot = (v.values + U.values) ** 2
        phi_tot = ScalarField(d, state.phi_v.values + PhiN.values)
        lhs, rhs = neumann_flux_balance(phi_tot, pot, PARAMS.q, theta, d)
        assert np.isclose(lhs, rhs, rtol=1e-8)

    def test_degenerate_potential_raises(self, square15):
        d = square15
        with pytest.raises(DegenerateOperatorError):
            solve_phi_v_neumann(
                d, zeros_field(d), zeros_field(d), zeros_field(d), 0.1, 0.0
            )
