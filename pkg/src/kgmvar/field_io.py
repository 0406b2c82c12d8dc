"""Scalar-field serialization: CSV tables and legacy structured-points text.

Both formats carry decimals with 17 significant digits, so float64 values
round-trip bit-exactly.
"""

from __future__ import annotations

import numpy as np

from .grid import Domain, GridError, ScalarField, build_domain

_FMT = "{:.17g}"


def write_csv(f: ScalarField, path) -> None:
    """Write `i,j[,k],x,y[,z],value` rows over all lattice nodes (C order)."""
    d = f.domain
    index_names = ["i", "j", "k"][: d.dim]
    coord_names = ["x", "y", "z"][: d.dim]
    grids = d.coords()
    lines = [",".join(index_names + coord_names + ["value"])]
    idx = np.indices(d.shape).reshape(d.dim, -1).T
    coords = np.stack([g.ravel() for g in grids], axis=1)
    vals = f.values.ravel()
    for ij, xy, v in zip(idx, coords, vals):
        cols = [str(int(c)) for c in ij]
        cols += [_FMT.format(c) for c in xy]
        cols.append(_FMT.format(v))
        lines.append(",".join(cols))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> ScalarField:
    """Reconstruct a field (and its domain) from a CSV written by write_csv."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    dim = (len(header) - 1) // 2
    if header[-1] != "value" or dim not in (2, 3):
        raise GridError(f"unrecognized CSV header {header}")
    idx = data[:, :dim].astype(int)
    shape = tuple(idx.max(axis=0) + 1)
    coords = data[:, dim : 2 * dim]
    spacing = [float(coords[:, a].max()) / (shape[a] - 1) for a in range(dim)]
    lengths = [h * (shape[a] - 1) for a, h in enumerate(spacing)]
    domain = build_domain(dim, lengths, [s - 2 for s in shape])
    values = np.zeros(shape)
    values[tuple(idx.T)] = data[:, -1]
    return ScalarField(domain, values)


def write_structured_points(f: ScalarField, path, name: str = "value") -> None:
    """Write the legacy structured-points text format (viewable in ParaView etc.)."""
    d = f.domain
    dims = list(d.shape) + [1] * (3 - d.dim)
    spacing = list(d.spacing) + [1.0] * (3 - d.dim)
    lines = [
        "# vtk DataFile Version 3.0",
        "kgmvar scalar field",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS {} {} {}".format(*dims),
        "ORIGIN 0 0 0",
        "SPACING {} {} {}".format(*(_FMT.format(s) for s in spacing)),
        f"POINT_DATA {d.n_nodes}",
        f"SCALARS {name} double 1",
        "LOOKUP_TABLE default",
    ]
    # structured-points ordering: x varies fastest
    lines.extend(_FMT.format(v) for v in f.values.ravel(order="F"))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_structured_points(path) -> ScalarField:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    dims = None
    spacing = None
    start = None
    for i, ln in enumerate(lines):
        if ln.startswith("DIMENSIONS"):
            dims = [int(x) for x in ln.split()[1:]]
        elif ln.startswith("SPACING"):
            spacing = [float(x) for x in ln.split()[1:]]
        elif ln.startswith("LOOKUP_TABLE"):
            start = i + 1
    if dims is None or spacing is None or start is None:
        raise GridError(f"not a structured-points file: {path}")
    dim = 3 if dims[2] > 1 else 2
    shape = tuple(dims[:dim])
    counts = [s - 2 for s in shape]
    lengths = [spacing[a] * (shape[a] - 1) for a in range(dim)]
    domain = build_domain(dim, lengths, counts)
    vals = np.array([float(x) for x in lines[start:]])
    values = vals.reshape(shape, order="F")
    return ScalarField(domain, values)
