"""Discrete elliptic operators, CG solver, boundary-data liftings, eigenvalues.

The Dirichlet operator acts on interior nodes (trace values are read from the
field's boundary layer and pre-lifted into the right-hand side before CG).
The Neumann operator acts on all lattice nodes with ghost-node reflection;
its CG path runs on the trapezoid-weighted symmetric form, where inhomogeneous
flux enters the right-hand side through the surface quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .grid import (
    BoundaryData,
    Domain,
    GridError,
    ScalarField,
    field_from_interior,
    integrate_boundary,
    l2_norm,
    scatter_flux,
    zeros_field,
)

DEFAULT_CG_TOL = 1e-10
DEFAULT_EIG_TOL = 1e-8


class SolverError(RuntimeError):
    """CG failed: non-convergence or an indefinite operator."""


class CompatibilityError(SolverError):
    """Singular Neumann system with a right-hand side outside the range."""


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    relative_residual: float
    converged: bool


@dataclass(frozen=True)
class EllipticOperator:
    """v -> -Lap_h v + (w + sigma) v with Dirichlet or Neumann boundary treatment.

    `potential` is a nodal coefficient w >= 0 (None means zero); `shift` is a
    constant zeroth-order term. SPD for Dirichlet whenever shift > -lambda_1;
    for Neumann whenever w + shift is strictly positive somewhere.
    """

    domain: Domain
    bc_kind: str  # "dirichlet" | "neumann"
    potential: np.ndarray | None = None
    shift: float = 0.0

    def __post_init__(self):
        if self.bc_kind not in ("dirichlet", "neumann"):
            raise GridError(f"unknown bc kind {self.bc_kind!r}")
        if self.potential is not None:
            pot = np.asarray(self.potential, dtype=float)
            if pot.shape != self.domain.shape:
                raise GridError("potential must be sampled on the full lattice")
            object.__setattr__(self, "potential", pot)

    @property
    def is_singular(self) -> bool:
        """True for the pure Neumann Laplacian (constant null vector)."""
        if self.bc_kind != "neumann":
            return False
        pot_max = 0.0 if self.potential is None else float(np.max(self.potential))
        return pot_max + self.shift <= 0.0


def neg_laplacian_dirichlet(values: np.ndarray, domain: Domain) -> np.ndarray:
    """-Lap_h on interior nodes; boundary values are read from the lattice."""
    out = np.zeros(domain.counts)
    core = values[domain.interior]
    for axis, h in enumerate(domain.spacing):
        lo = _offset(values, domain, axis, -1)
        hi = _offset(values, domain, axis, +1)
        out += (2.0 * core - lo - hi) / h**2
    return out


def neg_laplacian_neumann(values: np.ndarray, domain: Domain) -> np.ndarray:
    """-Lap_h on all nodes with mirror (zero-flux) ghost reflection."""
    out = np.zeros(domain.shape)
    for axis, h in enumerate(domain.spacing):
        padded = np.concatenate(
            [
                _take(values, axis, slice(1, 2)),
                values,
                _take(values, axis, slice(-2, -1)),
            ],
            axis=axis,
        )
        lo = _take(padded, axis, slice(0, -2))
        hi = _take(padded, axis, slice(2, None))
        out += (2.0 * values - lo - hi) / h**2
    return out


def _take(a: np.ndarray, axis: int, sl: slice) -> np.ndarray:
    idx: list = [slice(None)] * a.ndim
    idx[axis] = sl
    return a[tuple(idx)]


def _offset(values: np.ndarray, domain: Domain, axis: int, step: int) -> np.ndarray:
    idx: list = [slice(1, -1)] * domain.dim
    idx[axis] = slice(1 + step, -1 + step if -1 + step != 0 else None)
    return values[tuple(idx)]


def apply(op: EllipticOperator, f: ScalarField) -> ScalarField:
    """Nodal values of -Lap_h f + (w + sigma) f.

    Dirichlet: result on interior nodes (boundary of the output is zero).
    Neumann: result on all nodes, zero-flux reflection at the shell.
    """
    d = op.domain
    if f.domain != d:
        raise GridError("operator and field live on different domains")
    if op.bc_kind == "dirichlet":
        out = neg_laplacian_dirichlet(f.values, d)
        if op.potential is not None:
            out += op.potential[d.interior] * f.interior
        if op.shift:
            out += op.shift * f.interior
        return field_from_interior(d, out)
    out = neg_laplacian_neumann(f.values, d)
    if op.potential is not None:
        out += op.potential * f.values
    if op.shift:
        out += op.shift * f.values
    return ScalarField(d, out)


# ---------------------------------------------------------------------------
# Conjugate gradients
# ---------------------------------------------------------------------------

def _cg(matvec, b, tol, max_iter, project=None):
    """Plain CG on an SPD (or projected PSD) system; returns (x, iters, relres)."""
    b = b.copy()
    if project is not None:
        project(b)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    for it in range(1, max_iter + 1):
        Ap = matvec(p)
        if project is not None:
            project(Ap)
        curv = float(p @ Ap)
        if curv <= 0.0:
            raise SolverError(
                f"negative curvature encountered at iteration {it}: operator not SPD"
            )
        alpha = rs / curv
        x += alpha * p
        r -= alpha * Ap
        rs_new = float(r @ r)
        if np.sqrt(rs_new) <= tol * bnorm:
            return x, it, float(np.sqrt(rs_new) / bnorm)
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise SolverError(
        f"CG did not converge in {max_iter} iterations "
        f"(relative residual {np.sqrt(rs) / bnorm:.3e})"
    )


def cg_solve(
    op: EllipticOperator,
    rhs: ScalarField,
    tol: float = DEFAULT_CG_TOL,
    max_iter: int | None = None,
    flux: BoundaryData | None = None,
) -> tuple[ScalarField, SolveStats]:
    """Solve op x = rhs by conjugate gradients.

    Dirichlet: rhs interior values are used; the solution has zero trace
    (boundary contributions must be pre-lifted into rhs by the caller).

    Neumann: rhs is a plain nodal right-hand side; an optional `flux` adds the
    inhomogeneous normal-derivative data. CG runs on the trapezoid-weighted
    symmetric form. For the singular (pure-Laplacian) case the right-hand side
    must be discretely compatible and the solution is returned with zero
    weighted mean.
    """
    d = op.domain
    if rhs.domain != d:
        raise GridError("operator and rhs live on different domains")
    if tol <= 0:
        raise GridError("tol must be positive")

    if op.bc_kind == "dirichlet":
        if flux is not None:
            raise GridError("flux data is only meaningful for Neumann operators")
        if max_iter is None:
            max_iter = max(200, 20 * int(np.sqrt(d.n_interior)) + 100)
        shape = d.counts

        def matvec(xflat):
            full = np.zeros(d.shape)
            full[d.interior] = xflat.reshape(shape)
            out = neg_laplacian_dirichlet(full, d)
            if op.potential is not None:
                out += op.potential[d.interior] * full[d.interior]
            if op.shift:
                out += op.shift * full[d.interior]
            return out.ravel()

        b = rhs.interior.ravel()
        x, iters, relres = _cg(matvec, b, tol, max_iter)
        field = field_from_interior(d, x.reshape(shape))
        return field, SolveStats(iters, relres, True)

    # Neumann path: weighted symmetric system K x = W b + S(flux)
    if max_iter is None:
        max_iter = max(200, 20 * int(np.sqrt(d.n_nodes)) + 100)
    W = d.trapezoid_weights

    def matvec(xflat):
        xv = xflat.reshape(d.shape)
        out = neg_laplacian_neumann(xv, d)
        if op.potential is not None:
            out += op.potential * xv
        if op.shift:
            out += op.shift * xv
        return (W * out).ravel()

    b = (W * rhs.values).ravel()
    if flux is not None:
        if flux.kind != "neumann":
            raise GridError("flux data must be of Neumann kind")
        b = b + scatter_flux(flux, d).ravel()

    project = None
    if op.is_singular:
        ones = np.ones(d.n_nodes)
        defect = float(b @ ones)
        if abs(defect) > 1e-8 * (1.0 + float(np.linalg.norm(b)) * np.sqrt(d.n_nodes)):
            raise CompatibilityError(
                f"incompatible Neumann right-hand side: discrete defect {defect:.3e}"
            )

        def project(vec, _n=d.n_nodes):
            vec -= vec.sum() / _n

    x, iters, relres = _cg(matvec, b, tol, max_iter, project=project)
    xv = x.reshape(d.shape)
    if op.is_singular:
        xv = xv - np.sum(W * xv) / d.volume
    return ScalarField(d, xv), SolveStats(iters, relres, True)


# ---------------------------------------------------------------------------
# Sparse assembly (Newton refinement and dense-oracle tests)
# ---------------------------------------------------------------------------

def assemble_dirichlet(d: Domain, potential: np.ndarray | None = None, shift: float = 0.0):
    """Sparse interior matrix of -Lap_h + (w + sigma) with zero Dirichlet trace."""
    mats = []
    for axis, (n, h) in enumerate(zip(d.counts, d.spacing)):
        T = sp.diags(
            [np.full(n - 1, -1.0), np.full(n, 2.0), np.full(n - 1, -1.0)],
            offsets=(-1, 0, 1),
        ) / h**2
        eyes = [sp.identity(m) for m in d.counts]
        eyes[axis] = T
        term = eyes[0]
        for e in eyes[1:]:
            term = sp.kron(term, e)
        mats.append(term)
    K = sum(mats)
    diag = np.zeros(d.n_interior)
    if potential is not None:
        diag += potential[d.interior].ravel()
    diag += shift
    return (K + sp.diags(diag)).tocsr()


def _neumann_1d(n: int, h: float):
    size = n + 2
    A = sp.lil_matrix((size, size))
    for i in range(size):
        A[i, i] = 2.0
        if i > 0:
            A[i, i - 1] = -1.0
        if i < size - 1:
            A[i, i + 1] = -1.0
    A[0, 1] = -2.0
    A[size - 1, size - 2] = -2.0
    return (A / h**2).tocsr()


def assemble_neumann(d: Domain, potential: np.ndarray | None = None, shift: float = 0.0):
    """Weighted symmetric Neumann matrix K = W (-Lap_h + w + sigma) on all nodes."""
    mats = []
    for axis in range(d.dim):
        pieces = []
        for b in range(d.dim):
            if b == axis:
                W1 = sp.diags(d.trapezoid_weights_1d[b])
                pieces.append(W1 @ _neumann_1d(d.counts[b], d.spacing[b]))
            else:
                pieces.append(sp.diags(d.trapezoid_weights_1d[b]))
        term = pieces[0]
        for p in pieces[1:]:
            term = sp.kron(term, p)
        mats.append(term)
    K = sum(mats)
    diag = np.zeros(d.n_nodes)
    if potential is not None:
        diag += potential.ravel()
    diag += shift
    return (K + sp.diags(d.trapezoid_weights.ravel() * diag)).tocsr()


# ---------------------------------------------------------------------------
# Lifting solves
# ---------------------------------------------------------------------------

def solve_dirichlet_with_trace(
    d: Domain,
    trace: BoundaryData,
    rhs_interior: np.ndarray | None = None,
    potential: np.ndarray | None = None,
    shift: float = 0.0,
    tol: float = DEFAULT_CG_TOL,
) -> tuple[ScalarField, SolveStats]:
    """Solve (-Lap_h + w + sigma) x = rhs with a prescribed Dirichlet trace.

    Boundary values are moved to the right-hand side per stencil row, CG runs
    on the zero-trace space, and the trace is written back exactly.
    """
    if trace.kind != "dirichlet":
        raise GridError("expected a Dirichlet trace")
    op = EllipticOperator(d, "dirichlet", potential=potential, shift=shift)
    lift = np.zeros(d.shape)
    lift[d.boundary_mask] = trace.values
    rhs = np.zeros(d.counts)
    if rhs_interior is not None:
        rhs += np.asarray(rhs_interior, dtype=float).reshape(d.counts)
    # lifting: only the Laplacian couples to boundary neighbors
    rhs -= neg_laplacian_dirichlet(lift, d)
    sol, stats = cg_solve(op, field_from_interior(d, rhs), tol=tol)
    return field_from_interior(d, sol.interior, trace), stats


def solve_lifting_U(d: Domain, params, h: BoundaryData, tol: float = DEFAULT_CG_TOL) -> ScalarField:
    """Matter-field lifting: (-Lap + m^2) U = 0 with trace sqrt(4 pi) q h."""
    if params.m <= 0:
        raise GridError("mass m must be positive")
    scaled = h.scaled(np.sqrt(4.0 * np.pi) * params.q)
    field, _ = solve_dirichlet_with_trace(d, scaled, shift=params.m**2, tol=tol)
    return field


def solve_phi_D(d: Domain, zeta: BoundaryData, params, tol: float = DEFAULT_CG_TOL) -> ScalarField:
    """Harmonic lifting of the electric potential with trace q*zeta - omega."""
    trace = BoundaryData(d, "dirichlet", params.q * zeta.values - params.omega)
    field, _ = solve_dirichlet_with_trace(d, trace, tol=tol)
    return field


def solve_phi_N(
    d: Domain, theta: BoundaryData, q: float, tol: float = DEFAULT_CG_TOL
) -> tuple[ScalarField, float]:
    """Neumann lifting: Lap Phi = q*kappa, dPhi/dn = q*theta, zero-mean.

    kappa = (surface integral of theta) / |Omega| makes the singular system
    compatible by construction.
    """
    if theta.kind != "neumann":
        raise GridError("expected Neumann flux data")
    kappa = integrate_boundary(theta, d) / d.volume
    op = EllipticOperator(d, "neumann")
    rhs = ScalarField(d, np.full(d.shape, -q * kappa))
    field, _ = cg_solve(op, rhs, tol=tol, flux=theta.scaled(q))
    return field, kappa


# ---------------------------------------------------------------------------
# Eigenvalues
# ---------------------------------------------------------------------------

def smallest_eigenvalue(
    d: Domain, tol: float = DEFAULT_EIG_TOL, max_iter: int = 200
) -> tuple[float, ScalarField]:
    """Principal Dirichlet eigenvalue of -Lap_h via inverse power iteration."""
    lams, fields = eigenvalues(d, 1, tol=tol, max_iter=max_iter)
    return lams[0], fields[0]


def eigenvalues(
    d: Domain, k: int, tol: float = DEFAULT_EIG_TOL, max_iter: int = 200
) -> tuple[list[float], list[ScalarField]]:
    """First k Dirichlet eigenvalues by deflated inverse power iteration (k <= 10)."""
    if not 1 <= k <= 10:
        raise GridError("k must be between 1 and 10")
    op = EllipticOperator(d, "dirichlet")
    w = d.volume_weight
    found_vecs: list[np.ndarray] = []
    lams: list[float] = []
    rng_free = np.ones(d.n_interior)  # deterministic start overlaps low modes

    def deflate(x):
        for u in found_vecs:
            x -= (u @ x) * u
        return x

    for j in range(k):
        x = rng_free.copy() if j == 0 else _bump_start(d, j)
        x = deflate(x)
        if np.linalg.norm(x) == 0:
            x = np.arange(1.0, d.n_interior + 1)
            x = deflate(x)
        x /= np.linalg.norm(x)
        lam_old = np.inf
        lam = np.inf
        for _ in range(max_iter):
            rhs = field_from_interior(d, x.reshape(d.counts))
            y_field, _ = cg_solve(op, rhs, tol=min(1e-12, tol * 1e-2))
            y = deflate(y_field.interior.ravel().copy())
            y /= np.linalg.norm(y)
            Ky = apply(op, field_from_interior(d, y.reshape(d.counts))).interior.ravel()
            lam = float(y @ Ky)
            x = y
            if abs(lam - lam_old) <= tol * max(1.0, abs(lam)):
                break
            lam_old = lam
        else:
            raise SolverError(f"eigenvalue iteration {j + 1} did not converge")
        # fix sign (nonnegative ground mode) and normalize in the L2 quadrature
        if x.sum() < 0:
            x = -x
        found_vecs.append(x.copy())
        lams.append(lam)
    fields = []
    for x in found_vecs:
        f = field_from_interior(d, x.reshape(d.counts))
        fields.append(ScalarField(d, f.values / l2_norm(f)))
    return lams, fields


def _bump_start(d: Domain, j: int) -> np.ndarray:
    """Deterministic start vectors with varying symmetry for deflated modes."""
    grids = [g[d.interior] for g in d.coords()]
    out = np.ones(d.counts)
    for axis, (g, L) in enumerate(zip(grids, d.lengths)):
        kk = 1 + ((j >> axis) & 1) + (j // (2**d.dim))
        out = out * np.sin(kk * np.pi * g / L)
    out = out + 1e-3 * np.cos(j * np.pi * grids[0] / d.lengths[0])
    return out.ravel()


def box_eigenvalue_analytic(d: Domain, modes) -> float:
    """Continuum box eigenvalue sum_a (k_a pi / L_a)^2."""
    return float(sum((k * np.pi / L) ** 2 for k, L in zip(modes, d.lengths)))


def box_eigenvalue_discrete(d: Domain, modes) -> float:
    """Exact eigenvalue of the discrete Dirichlet Laplacian on a box."""
    return float(
        sum(
            (4.0 / h**2) * np.sin(k * np.pi * h / (2.0 * L)) ** 2
            for k, h, L in zip(modes, d.spacing, d.lengths)
        )
    )


def box_spectrum_analytic(d: Domain, k: int) -> list[tuple[float, tuple[int, ...]]]:
    """First k continuum box eigenvalues with their mode tuples."""
    kmax = k + 3
    items = []
    ranges = [range(1, kmax + 1)] * d.dim
    import itertools

    for modes in itertools.product(*ranges):
        items.append((box_eigenvalue_analytic(d, modes), modes))
    items.sort()
    return items[:k]


def check_hyp(params, zeta: BoundaryData, lambda1: float) -> tuple[bool, float]:
    """Spectral smallness condition: max_boundary (q*zeta - omega)^2 < m^2 + lambda1.

    Returns (holds, margin) with margin = m^2 + lambda1 - max (q*zeta - omega)^2;
    the condition is strict, so margin == 0 does not hold.
    """
    trace_sq = (params.q * zeta.values - params.omega) ** 2
    margin = params.m**2 + lambda1 - float(np.max(trace_sq))
    return margin > 0.0, margin
