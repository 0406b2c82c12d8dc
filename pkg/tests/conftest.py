"""Shared fixtures and independent dense oracles for the solver tests.

The dense constructions here deliberately loop over lattice nodes instead of
reusing the package's kron/matrix-free assembly, so oracle comparisons do
not share code with the implementation under test.
"""

import itertools

import numpy as np
import pytest

from kgmvar.grid import Domain, build_domain, scatter_flux


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def square15():
    return build_domain(2, (1.0, 1.0), (15, 15))


@pytest.fixture
def square11():
    return build_domain(2, (1.0, 1.0), (11, 11))


@pytest.fixture
def box3d():
    return build_domain(3, (1.0, 1.2, 0.8), (5, 6, 4))


def interior_nodes(d: Domain):
    """Interior multi-indices in C order (matching .ravel() of interior blocks)."""
    return list(itertools.product(*(range(1, n + 1) for n in d.counts)))


def dense_dirichlet(d: Domain, potential=None, shift=0.0):
    """Dense interior matrix of the shifted operator, plus the map that sends
    boundary values to the right-hand-side contribution of each interior row."""
    nodes = interior_nodes(d)
    index = {node: i for i, node in enumerate(nodes)}
    n = len(nodes)
    A = np.zeros((n, n))
    lift_rows = []  # (row, neighbor multi-index, coefficient) for boundary neighbors
    for i, node in enumerate(nodes):
        diag = shift
        if potential is not None:
            diag += potential[node]
        for axis, h in enumerate(d.spacing):
            diag += 2.0 / h**2
            for stepdir in (-1, 1):
                nb = list(node)
                nb[axis] += stepdir
                nb = tuple(nb)
                if nb in index:
                    A[i, index[nb]] -= 1.0 / h**2
                else:
                    lift_rows.append((i, nb, 1.0 / h**2))
        A[i, i] = diag
    return A, lift_rows


def dense_dirichlet_solve(d, rhs_interior, boundary_full=None, potential=None, shift=0.0):
    """Direct-elimination reference for the interior Dirichlet problem."""
    A, lift = dense_dirichlet(d, potential, shift)
    b = np.asarray(rhs_interior, dtype=float).ravel().copy()
    if boundary_full is not None:
        for row, nb, coeff in lift:
            b[row] += coeff * boundary_full[nb]
    x = np.linalg.solve(A, b)
    return x.reshape(d.counts)


def dense_neumann(d: Domain, potential=None):
    """Dense all-nodes matrix of the reflected (zero-flux) operator."""
    shape = d.shape
    nodes = list(itertools.product(*(range(s) for s in shape)))
    index = {node: i for i, node in enumerate(nodes)}
    n = len(nodes)
    A = np.zeros((n, n))
    for i, node in enumerate(nodes):
        diag = 0.0
        if potential is not None:
            diag += potential[node]
        for axis, h in enumerate(d.spacing):
            diag += 2.0 / h**2
            for stepdir in (-1, 1):
                nb = list(node)
                nb[axis] += stepdir
                # mirror reflection across the shell
                if nb[axis] < 0:
                    nb[axis] = 1
                elif nb[axis] >= shape[axis]:
                    nb[axis] = shape[axis] - 2
                A[i, index[tuple(nb)]] -= 1.0 / h**2
        A[i, i] += diag
    return A


def dense_neumann_solve(d, rhs_full, flux=None, potential=None):
    """Reference solve of the reflected system; handles the singular case by
    least squares plus removal of the weighted mean."""
    A = dense_neumann(d, potential)
    b = np.asarray(rhs_full, dtype=float).ravel().copy()
    W = d.trapezoid_weights.ravel()
    if flux is not None:
        b += scatter_flux(flux, d).ravel() / W
    singular = potential is None or np.max(potential) <= 0.0
    if singular:
        x, *_ = np.linalg.lstsq(A, b, rcond=None)
        x = x - np.sum(W * x) / d.volume
    else:
        x = np.linalg.solve(A, b)
    return x.reshape(d.shape)
