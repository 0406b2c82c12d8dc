"""Rectangular-box discrete geometry: grids, scalar fields, boundary data, quadrature."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class GridError(ValueError):
    """Invalid domain construction or mismatched grid data."""


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box (0, L_1) x ... x (0, L_dim) with a node-centered grid.

    Interior nodes sit at x_a = i * h_a, i = 1..n_a, with h_a = L_a / (n_a + 1).
    The full lattice shell (corners included) is carried explicitly as boundary
    nodes, so nonhomogeneous traces enter through stencil neighbors instead of
    an ad hoc right-hand side.

    Immutable; all derived index structures are cached.
    """

    dim: int
    lengths: tuple[float, ...]
    counts: tuple[int, ...]
    spacing: tuple[float, ...]

    @cached_property
    def shape(self) -> tuple[int, ...]:
        """Full lattice shape, boundary layers included."""
        return tuple(n + 2 for n in self.counts)

    @property
    def interior(self) -> tuple[slice, ...]:
        return tuple(slice(1, -1) for _ in range(self.dim))

    @cached_property
    def n_interior(self) -> int:
        return int(np.prod(self.counts))

    @cached_property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def n_boundary(self) -> int:
        return self.n_nodes - self.n_interior

    @property
    def volume_weight(self) -> float:
        """Quadrature weight of one interior node."""
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @cached_property
    def axis_coords(self) -> tuple[np.ndarray, ...]:
        """Per-axis node coordinates over the full lattice (0 and L_a included)."""
        return tuple(
            np.arange(n + 2) * h for n, h in zip(self.counts, self.spacing)
        )

    def coords(self) -> tuple[np.ndarray, ...]:
        """Meshgrid of node coordinates over the full lattice (ij indexing)."""
        return tuple(np.meshgrid(*self.axis_coords, indexing="ij"))

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        mask[self.interior] = False
        mask.setflags(write=False)
        return mask

    @cached_property
    def boundary_ordinal(self) -> np.ndarray:
        """Full-lattice int array: canonical boundary index on the shell, -1 inside."""
        ordinal = np.full(self.shape, -1, dtype=np.int64)
        ordinal[self.boundary_mask] = np.arange(self.n_boundary)
        ordinal.setflags(write=False)
        return ordinal

    @cached_property
    def boundary_coords(self) -> np.ndarray:
        """(n_boundary, dim) coordinates in canonical boundary order."""
        grids = self.coords()
        return np.stack([g[self.boundary_mask] for g in grids], axis=1)

    @cached_property
    def trapezoid_weights_1d(self) -> tuple[np.ndarray, ...]:
        out = []
        for n, h in zip(self.counts, self.spacing):
            w = np.full(n + 2, h)
            w[0] = w[-1] = h / 2.0
            w.setflags(write=False)
            out.append(w)
        return tuple(out)

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        """Full-lattice tensor-product trapezoid weights; sums exactly to |Omega|."""
        w = self.trapezoid_weights_1d[0]
        for w1 in self.trapezoid_weights_1d[1:]:
            w = np.multiply.outer(w, w1)
        w.setflags(write=False)
        return w

    def faces(self):
        """Yield (axis, side, slicer) for the 2*dim faces; side is 0 or 1."""
        for axis in range(self.dim):
            for side in (0, 1):
                idx: list = [slice(None)] * self.dim
                idx[axis] = 0 if side == 0 else -1
                yield axis, side, tuple(idx)

    def face_tangential_weights(self, axis: int) -> np.ndarray:
        """Tangential trapezoid quadrature weights on a face normal to `axis`."""
        tang = [w for a, w in enumerate(self.trapezoid_weights_1d) if a != axis]
        if not tang:
            return np.asarray(1.0)
        w = tang[0]
        for w1 in tang[1:]:
            w = np.multiply.outer(w, w1)
        return w


def build_domain(dim: int, lengths, counts) -> Domain:
    """Construct a box domain, validating shape parameters.

    lengths are per-axis extents L_a > 0; counts are interior node counts
    n_a >= 2, giving spacing h_a = L_a / (n_a + 1).
    """
    if dim not in (2, 3):
        raise GridError(f"dim must be 2 or 3, got {dim}")
    lengths = tuple(float(x) for x in lengths)
    counts = tuple(int(n) for n in counts)
    if len(lengths) != dim or len(counts) != dim:
        raise GridError("lengths and counts must have one entry per axis")
    if any(L <= 0 for L in lengths):
        raise GridError(f"lengths must be positive, got {lengths}")
    if any(n < 2 for n in counts):
        raise GridError(f"interior counts must be >= 2, got {counts}")
    spacing = tuple(L / (n + 1) for L, n in zip(lengths, counts))
    return Domain(dim=dim, lengths=lengths, counts=counts, spacing=spacing)


@dataclass(frozen=True)
class ScalarField:
    """Nodal values of a function on the full lattice of a Domain.

    Values are stored over interior and boundary nodes together; the array is
    treated as immutable after construction.
    """

    domain: Domain
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.domain.shape:
            raise GridError(
                f"field shape {v.shape} does not match domain lattice {self.domain.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise GridError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def interior(self) -> np.ndarray:
        return self.values[self.domain.interior]

    @property
    def boundary(self) -> np.ndarray:
        """Boundary values in canonical boundary order."""
        return self.values[self.domain.boundary_mask]

    def copy(self) -> "ScalarField":
        return ScalarField(self.domain, self.values.copy())


def zeros_field(domain: Domain) -> ScalarField:
    return ScalarField(domain, np.zeros(domain.shape))


def field_from_function(domain: Domain, fn) -> ScalarField:
    """Sample fn(x, y[, z]) at every lattice node."""
    return ScalarField(domain, fn(*domain.coords()))


def field_from_interior(
    domain: Domain, interior: np.ndarray, boundary: "BoundaryData | None" = None
) -> ScalarField:
    """Assemble a field from interior values plus an optional Dirichlet trace."""
    values = np.zeros(domain.shape)
    values[domain.interior] = np.asarray(interior, dtype=float).reshape(domain.counts)
    if boundary is not None:
        if boundary.kind != "dirichlet":
            raise GridError("only a Dirichlet trace can be written into a field")
        values[domain.boundary_mask] = boundary.values
    return ScalarField(domain, values)


@dataclass(frozen=True)
class BoundaryData:
    """Trace (Dirichlet) or flux (Neumann) values on boundary nodes.

    Values are in the canonical boundary order of the domain; the kind is
    fixed at construction.
    """

    domain: Domain
    kind: str  # "dirichlet" | "neumann"
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann"):
            raise GridError(f"unknown boundary data kind {self.kind!r}")
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.domain.n_boundary,):
            raise GridError(
                f"boundary data length {v.shape} does not match "
                f"{self.domain.n_boundary} boundary nodes"
            )
        if not np.all(np.isfinite(v)):
            raise GridError("boundary data contains non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, domain: Domain, kind: str, value: float) -> "BoundaryData":
        return cls(domain, kind, np.full(domain.n_boundary, float(value)))

    @classmethod
    def from_function(cls, domain: Domain, kind: str, fn) -> "BoundaryData":
        xs = domain.boundary_coords
        return cls(domain, kind, fn(*(xs[:, a] for a in range(domain.dim))))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.max_abs() <= tol

    def scaled(self, factor: float) -> "BoundaryData":
        return BoundaryData(self.domain, self.kind, self.values * factor)

    def shifted(self, offset: float) -> "BoundaryData":
        return BoundaryData(self.domain, self.kind, self.values + offset)


# ---------------------------------------------------------------------------
# Quadrature and norms
# ---------------------------------------------------------------------------

def integrate_volume(f: ScalarField) -> float:
    """Midpoint volume quadrature over interior nodes: sum f_i * prod(h_a)."""
    return float(f.interior.sum() * f.domain.volume_weight)


def integrate_volume_full(f: ScalarField) -> float:
    """Trapezoid volume quadrature over all lattice nodes (boundary included).

    Used by the Neumann-regime machinery, where fields carry boundary values
    and the flux-balance identities are exact in this quadrature.
    """
    return float(np.sum(f.values * f.domain.trapezoid_weights))


def integrate_boundary(g: BoundaryData, d: Domain) -> float:
    """Face-wise surface quadrature with tangential trapezoid weights.

    Edge and corner nodes contribute to every face containing them with their
    (halved) tangential weights; this matches the discrete flux assembly, so
    divergence-theorem identities hold to round-off.
    """
    if g.domain is not d and g.domain != d:
        raise GridError("boundary data does not live on the given domain")
    total = 0.0
    for axis, _side, slicer in d.faces():
        idx = d.boundary_ordinal[slicer]
        total += float(np.sum(g.values[idx] * d.face_tangential_weights(axis)))
    return total


def scatter_flux(g: BoundaryData, d: Domain) -> np.ndarray:
    """Surface-quadrature-weighted flux contributions, scattered to the lattice.

    Entry i is the total weight-times-flux received by node i over all faces
    that contain it; summing the array reproduces integrate_boundary exactly.
    """
    out = np.zeros(d.shape)
    for axis, _side, slicer in d.faces():
        idx = d.boundary_ordinal[slicer]
        out[slicer] += g.values[idx] * d.face_tangential_weights(axis)
    return out


def l2_norm(f: ScalarField) -> float:
    """Discrete L2 norm over interior nodes."""
    return float(np.sqrt(np.sum(f.interior**2) * f.domain.volume_weight))


def l2_norm_full(f: ScalarField) -> float:
    """Discrete L2 norm in the all-nodes trapezoid quadrature."""
    return float(np.sqrt(np.sum(f.values**2 * f.domain.trapezoid_weights)))


def lp_norm_full(f: ScalarField, p: float) -> float:
    return float(
        np.sum(np.abs(f.values) ** p * f.domain.trapezoid_weights) ** (1.0 / p)
    )


def dirichlet_form(f: ScalarField, g: ScalarField) -> float:
    """Discrete Dirichlet bilinear form sum over stencil edges of df*dg/h^2 * w.

    Edges between two boundary nodes (tangential along a face) are excluded;
    for zero-trace fields this equals integrate_volume(f * (-Lap g)) exactly.
    """
    d = f.domain
    if g.domain != d:
        raise GridError("fields live on different domains")
    w = d.volume_weight
    total = 0.0
    fv, gv = f.values, g.values
    for axis, h in enumerate(d.spacing):
        df = np.diff(fv, axis=axis)
        dg = np.diff(gv, axis=axis)
        # drop edge pairs lying entirely inside the boundary shell
        both_bdry = np.logical_and(
            _shift_view(d.boundary_mask, axis, 0), _shift_view(d.boundary_mask, axis, 1)
        )
        prod = df * dg / h**2
        prod[both_bdry] = 0.0
        total += prod.sum()
    return float(total * w)


def _shift_view(mask: np.ndarray, axis: int, which: int) -> np.ndarray:
    sl: list = [slice(None)] * mask.ndim
    sl[axis] = slice(None, -1) if which == 0 else slice(1, None)
    return mask[tuple(sl)]


def h1_seminorm(f: ScalarField) -> float:
    """Discrete H1 seminorm (square root of the Dirichlet energy)."""
    return float(np.sqrt(max(dirichlet_form(f, f), 0.0)))
