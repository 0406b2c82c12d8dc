"""JSON run configuration: parsing, validation, and object construction.

Boundary data come as named analytic profiles so every scenario stays
text-reproducible; tabulated per-node values are accepted for irregular data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .functional import ConfigurationError, NonlinearityModel, PhysicalParams
from .grid import BoundaryData, Domain, build_domain
from .optimize import DescentConfig, MountainPassConfig

_REGIMES = ("dirichlet", "neumann", "nonlinear")


@dataclass(frozen=True)
class RunConfig:
    dim: int
    lengths: tuple
    counts: tuple
    m: float
    omega: float
    q: float
    regime: str
    h: dict | None = None
    zeta: dict | None = None
    theta: dict | None = None
    nonlinearity: dict | None = None
    descent: dict = field(default_factory=dict)
    mountain_pass: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "out"

    def build_domain(self) -> Domain:
        return build_domain(self.dim, self.lengths, self.counts)

    def build_params(self) -> PhysicalParams:
        return PhysicalParams(m=self.m, omega=self.omega, q=self.q)

    def build_model(self) -> NonlinearityModel | None:
        if self.nonlinearity is None:
            return None
        return NonlinearityModel(**self.nonlinearity)

    def descent_config(self) -> DescentConfig:
        return DescentConfig(**self.descent)

    def mp_config(self) -> MountainPassConfig:
        return MountainPassConfig(**self.mountain_pass)

    def boundary(self, name: str, domain: Domain) -> BoundaryData:
        spec = getattr(self, name)
        kind = "neumann" if name == "theta" else "dirichlet"
        if spec is None:
            return BoundaryData.constant(domain, kind, 0.0)
        return build_boundary(domain, kind, spec)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "lengths": list(self.lengths),
            "counts": list(self.counts),
            "m": self.m,
            "omega": self.omega,
            "q": self.q,
            "regime": self.regime,
            "h": self.h,
            "zeta": self.zeta,
            "theta": self.theta,
            "nonlinearity": self.nonlinearity,
            "descent": self.descent,
            "mountain_pass": self.mountain_pass,
            "seed": self.seed,
            "out_dir": self.out_dir,
        }


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a JSON object")
    known = {
        "dim", "lengths", "counts", "m", "omega", "q", "regime",
        "h", "zeta", "theta", "nonlinearity", "descent", "mountain_pass",
        "seed", "out_dir",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
    for req in ("dim", "lengths", "counts", "m", "regime"):
        if req not in raw:
            raise ConfigurationError(f"missing required config field {req!r}")
    regime = raw["regime"]
    if regime not in _REGIMES:
        raise ConfigurationError(f"regime must be one of {_REGIMES}, got {regime!r}")
    if regime == "nonlinear" and "nonlinearity" not in raw:
        raise ConfigurationError("nonlinear regime requires a 'nonlinearity' section")
    if regime == "neumann" and "theta" not in raw:
        raise ConfigurationError("neumann regime requires a 'theta' flux profile")
    cfg = RunConfig(
        dim=int(raw["dim"]),
        lengths=tuple(float(x) for x in raw["lengths"]),
        counts=tuple(int(x) for x in raw["counts"]),
        m=float(raw["m"]),
        omega=float(raw.get("omega", 0.0)),
        q=float(raw.get("q", 0.1)),
        regime=regime,
        h=raw.get("h"),
        zeta=raw.get("zeta"),
        theta=raw.get("theta"),
        nonlinearity=raw.get("nonlinearity"),
        descent=raw.get("descent", {}),
        mountain_pass=raw.get("mountain_pass", {}),
        seed=int(raw.get("seed", 0)),
        out_dir=str(raw.get("out_dir", "out")),
    )
    # construct everything eagerly so bad values fail before any solve
    d = cfg.build_domain()
    cfg.build_params()
    cfg.build_model()
    cfg.descent_config()
    cfg.mp_config()
    for name in ("h", "zeta", "theta"):
        cfg.boundary(name, d)
    return cfg


def build_boundary(domain: Domain, kind: str, spec: dict) -> BoundaryData:
    """Construct boundary data from a profile spec.

    Profiles: constant {value}; linear {coefficients: [a0, a1, ..]} for
    a0 + sum a_i x_i; sinusoidal {amplitude, modes: [k1, ..]} for a product of
    sin(pi k_a x_a / L_a) factors (k_a = 0 drops the factor); tabulated
    {values: [..]} with one value per boundary node in canonical order.
    """
    if not isinstance(spec, dict) or "profile" not in spec:
        raise ConfigurationError(f"boundary spec must name a profile, got {spec!r}")
    profile = spec["profile"]
    if profile == "constant":
        return BoundaryData.constant(domain, kind, _get(spec, "value"))
    if profile == "linear":
        coeffs = [float(c) for c in _get(spec, "coefficients")]
        if len(coeffs) != domain.dim + 1:
            raise ConfigurationError(
                f"linear profile needs {domain.dim + 1} coefficients, got {len(coeffs)}"
            )

        def lin(*xs):
            return coeffs[0] + sum(c * x for c, x in zip(coeffs[1:], xs))

        return BoundaryData.from_function(domain, kind, lin)
    if profile == "sinusoidal":
        amp = float(_get(spec, "amplitude"))
        modes = [int(k) for k in _get(spec, "modes")]
        if len(modes) != domain.dim:
            raise ConfigurationError(f"sinusoidal profile needs {domain.dim} modes")

        def sinus(*xs):
            out = np.full_like(np.asarray(xs[0], dtype=float), amp)
            for k, x, L in zip(modes, xs, domain.lengths):
                if k:
                    out = out * np.sin(np.pi * k * np.asarray(x) / L)
            return out

        return BoundaryData.from_function(domain, kind, sinus)
    if profile == "tabulated":
        vals = np.asarray(_get(spec, "values"), dtype=float)
        return BoundaryData(domain, kind, vals)
    raise ConfigurationError(f"unknown boundary profile {profile!r}")


def _get(spec: dict, key: str):
    if key not in spec:
        raise ConfigurationError(f"boundary profile {spec.get('profile')!r} needs {key!r}")
    return spec[key]
