"""Domain geometry, fields, boundary data, and quadrature."""

import numpy as np
import pytest

from kgmvar.grid import (
    BoundaryData,
    GridError,
    ScalarField,
    build_domain,
    dirichlet_form,
    field_from_function,
    field_from_interior,
    h1_seminorm,
    integrate_boundary,
    integrate_volume,
    integrate_volume_full,
    l2_norm,
    scatter_flux,
    zeros_field,
)


class TestBuildDomain:
    def test_spacing_and_shape(self):
        d = build_domain(2, (1.0, 2.0), (3, 7))
        assert d.spacing == (1.0 / 4.0, 2.0 / 8.0)
        assert d.shape == (5, 9)
        assert d.n_interior == 21

    def test_boundary_count_includes_corners(self):
        d = build_domain(2, (1.0, 1.0), (3, 3))
        assert d.n_boundary == 16

    def test_boundary_count_3d(self):
        d = build_domain(3, (1.0, 1.0, 1.0), (3, 4, 5))
        assert d.n_boundary == 5 * 6 * 7 - 3 * 4 * 5

    @pytest.mark.parametrize("dim", [0, 1, 4])
    def test_rejects_bad_dim(self, dim):
        with pytest.raises(GridError):
            build_domain(dim, (1.0,) * max(dim, 1), (3,) * max(dim, 1))

    def test_rejects_bad_lengths_and_counts(self):
        with pytest.raises(GridError):
            build_domain(2, (1.0, -1.0), (3, 3))
        with pytest.raises(GridError):
            build_domain(2, (1.0, 1.0), (1, 3))
        with pytest.raises(GridError):
            build_domain(2, (1.0,), (3, 3))


class TestScalarField:
    def test_shape_mismatch(self, square11):
        with pytest.raises(GridError):
            ScalarField(square11, np.zeros((3, 3)))

    def test_rejects_nan(self, square11):
        vals = np.zeros(square11.shape)
        vals[2, 2] = np.nan
        with pytest.raises(GridError):
            ScalarField(square11, vals)

    def test_from_interior_with_trace(self, square11):
        d = square11
        trace = BoundaryData.constant(d, "dirichlet", 3.0)
        f = field_from_interior(d, np.ones(d.counts), trace)
        assert np.all(f.interior == 1.0)
        assert np.all(f.boundary == 3.0)

    def test_boundary_view_matches_canonical_order(self, square11):
        d = square11
        f = field_from_function(d, lambda x, y: x + 10 * y)
        coords = d.boundary_coords
        assert np.allclose(f.boundary, coords[:, 0] + 10 * coords[:, 1])


class TestBoundaryData:
    def test_length_check(self, square11):
        with pytest.raises(GridError):
            BoundaryData(square11, "dirichlet", np.zeros(3))

    def test_unknown_kind(self, square11):
        with pytest.raises(GridError):
            BoundaryData.constant(square11, "robin", 1.0)

    def test_scaled_shifted(self, square11):
        g = BoundaryData.constant(square11, "neumann", 2.0)
        assert g.scaled(0.5).max_abs() == 1.0
        assert g.shifted(-2.0).is_zero()


class TestQuadrature:
    def test_trapezoid_weights_sum_to_volume(self, box3d):
        assert np.isclose(box3d.trapezoid_weights.sum(), box3d.volume, rtol=1e-14)

    def test_integrate_volume_full_constant(self, square15):
        f = ScalarField(square15, np.full(square15.shape, 2.5))
        assert np.isclose(integrate_volume_full(f), 2.5 * square15.volume, rtol=1e-14)

    def test_boundary_integral_is_perimeter(self):
        d = build_domain(2, (1.5, 2.5), (9, 13))
        one = BoundaryData.constant(d, "neumann", 1.0)
        assert np.isclose(integrate_boundary(one, d), 2 * (1.5 + 2.5), rtol=1e-14)

    def test_boundary_integral_is_surface_area(self):
        d = build_domain(3, (1.0, 2.0, 3.0), (4, 5, 6))
        one = BoundaryData.constant(d, "neumann", 1.0)
        area = 2 * (1 * 2 + 2 * 3 + 1 * 3)
        assert np.isclose(integrate_boundary(one, d), area, rtol=1e-14)

    def test_scatter_flux_total_matches_integral(self, square15, rng):
        d = square15
        g = BoundaryData(d, "neumann", rng.standard_normal(d.n_boundary))
        assert np.isclose(scatter_flux(g, d).sum(), integrate_boundary(g, d), rtol=1e-13, atol=1e-15)

    def test_scatter_flux_interior_untouched(self, square15):
        g = BoundaryData.constant(square15, "neumann", 1.0)
        s = scatter_flux(g, square15)
        assert np.all(s[square15.interior] == 0.0)


class TestNormsAndForms:
    def test_l2_norm_constant(self, square15):
        f = field_from_interior(square15, np.full(square15.counts, 3.0))
        # interior quadrature of a constant: 3 * sqrt(n_int * w)
        w = square15.volume_weight
        assert np.isclose(l2_norm(f), 3.0 * np.sqrt(square15.n_interior * w))

    def test_dirichlet_form_symmetric(self, square15, rng):
        d = square15
        f = field_from_interior(d, rng.standard_normal(d.counts))
        g = field_from_interior(d, rng.standard_normal(d.counts))
        assert np.isclose(dirichlet_form(f, g), dirichlet_form(g, f), rtol=1e-13)

    def test_summation_by_parts(self, square15, rng):
        # for zero-trace fields the form equals the interior quadrature of
        # f times the discrete negative Laplacian of g
        from kgmvar.elliptic import neg_laplacian_dirichlet

        d = square15
        f = field_from_interior(d, rng.standard_normal(d.counts))
        g = field_from_interior(d, rng.standard_normal(d.counts))
        lhs = dirichlet_form(f, g)
        rhs = float(np.sum(f.interior * neg_laplacian_dirichlet(g.values, d))) * d.volume_weight
        assert np.isclose(lhs, rhs, rtol=1e-12)

    def test_h1_seminorm_zero_for_constant_zero(self, square15):
        assert h1_seminorm(zeros_field(square15)) == 0.0

    def test_integrate_volume_interior_only(self, square11):
        vals = np.ones(square11.shape)
        vals[square11.boundary_mask] = 100.0  # must not contribute
        f = ScalarField(square11, vals)
        assert np.isclose(
            integrate_volume(f), square11.n_interior * square11.volume_weight
        )
