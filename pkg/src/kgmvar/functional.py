"""Reduced energy functionals and their discrete gradients.

Three regimes share one context object: the linear Dirichlet problem, the
linear mixed (Dirichlet matter / Neumann potential) problem, and the
nonlinear Dirichlet problem with a power-law lower-order term. Gradients are
the exact partial derivatives of the quadrature-discretized energies (the
phi_v dependence drops out through the adjoint identity of the reduction),
so central finite differences match them to solver accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elliptic import DEFAULT_CG_TOL, neg_laplacian_dirichlet
from .grid import ScalarField, h1_seminorm, l2_norm
from .reduction import ReducedState, solve_phi_v_dirichlet, solve_phi_v_neumann


class ConfigurationError(ValueError):
    """Inconsistent physical setup for the requested regime."""


@dataclass(frozen=True)
class PhysicalParams:
    """Mass, standing-wave frequency, and electromagnetic coupling."""

    m: float
    omega: float
    q: float

    def __post_init__(self):
        if self.m <= 0:
            raise ConfigurationError(f"mass must be positive, got m={self.m}")


@dataclass(frozen=True)
class NonlinearityModel:
    """Power-law lower-order term g(t) = mu |t|^(p-2) t with antiderivative G.

    The power model satisfies the superquadratic growth conditions with
    exponent s = p and threshold r = 0; it is odd, so the energy is even.
    """

    p: float
    mu: float = 1.0
    s: float | None = None
    r: float = 0.0

    def __post_init__(self):
        if not 2.0 < self.p < 6.0:
            raise ConfigurationError(f"exponent p must lie in (2, 6), got {self.p}")
        if self.mu <= 0:
            raise ConfigurationError("amplitude mu must be positive")
        s = self.p if self.s is None else self.s
        if not 2.0 < s <= self.p:
            raise ConfigurationError(f"superquadratic exponent s={s} must lie in (2, p]")
        if self.r < 0:
            raise ConfigurationError("threshold r must be nonnegative")
        object.__setattr__(self, "s", s)

    def g(self, t):
        t = np.asarray(t, dtype=float)
        return self.mu * np.abs(t) ** (self.p - 2.0) * t

    def g_prime(self, t):
        t = np.asarray(t, dtype=float)
        return self.mu * (self.p - 1.0) * np.abs(t) ** (self.p - 2.0)

    def G(self, t):
        t = np.asarray(t, dtype=float)
        return (self.mu / self.p) * np.abs(t) ** self.p


def g_eval(model: NonlinearityModel, t: float) -> float:
    return float(model.g(t))


def G_eval(model: NonlinearityModel, t: float) -> float:
    return float(model.G(t))


def verify_AR(model: NonlinearityModel, samples: int = 200) -> dict:
    """Sample the growth conditions on a symmetric log grid of t values."""
    t = np.concatenate([-np.geomspace(1e-6, 1e3, samples // 2)[::-1],
                        np.geomspace(1e-6, 1e3, samples // 2)])
    g = model.g(t)
    G = model.G(t)
    bound = model.mu * np.abs(t) ** (model.p - 1.0)
    growth_ok = bool(np.all(np.abs(g) <= bound * (1.0 + 1e-12)))
    small_t = np.geomspace(1e-10, 1e-4, 20)
    small_bound = model.mu * small_t ** (model.p - 1.0)
    small_origin_ok = bool(np.all(np.abs(model.g(small_t)) <= small_bound * (1.0 + 1e-12)))
    superquad_defect = float(np.max(np.abs(model.p * G - t * g)))
    b1 = model.mu / model.p
    lower_ok = bool(np.all(G >= b1 * np.abs(t) ** model.p - 1e-12))
    odd_defect = float(np.max(np.abs(model.g(-t) + g)))
    return {
        "pass_growth": growth_ok,
        "pass_small_origin": small_origin_ok,
        "superquadratic_defect": superquad_defect,
        "pass_superquadratic": superquad_defect <= 1e-8 * float(np.max(np.abs(t * g))),
        "pass_lower_bound": lower_ok,
        "odd_defect": odd_defect,
        "pass_odd": odd_defect == 0.0,
    }


@dataclass(frozen=True)
class FunctionalContext:
    """Everything the reduced energy needs besides the matter field v.

    regime is one of "dirichlet", "neumann", "nonlinear". Phi is the lifted
    electric potential (harmonic lifting for the Dirichlet regimes, zero-mean
    flux lifting for the Neumann regime); kappa is the Neumann source level.
    """

    domain: Domain
    params: PhysicalParams
    regime: str
    U: ScalarField
    Phi: ScalarField
    kappa: float = 0.0
    model: NonlinearityModel | None = None
    cg_tol: float = DEFAULT_CG_TOL

    def __post_init__(self):
        if self.regime not in ("dirichlet", "neumann", "nonlinear"):
            raise ConfigurationError(f"unknown regime {self.regime!r}")
        if self.regime == "nonlinear":
            if self.model is None:
                raise ConfigurationError("nonlinear regime requires a NonlinearityModel")
            if float(np.max(np.abs(self.U.values))) > 0:
                raise ConfigurationError("nonlinear regime assumes zero matter trace (U = 0)")
        if self.regime == "neumann":
            gap = self.params.m**2 - self.Phi.values**2
            if float(np.min(gap)) < 0:
                raise ConfigurationError(
                    "coupling too large: m^2 - PhiN^2 must be nonnegative everywhere "
                    f"(worst gap {float(np.min(gap)):.3e})"
                )


def reduced_state(ctx: FunctionalContext, v: ScalarField) -> ReducedState:
    """Solve the electric-potential sub-problem for the given matter field."""
    if ctx.regime == "neumann":
        return solve_phi_v_neumann(
            ctx.domain, v, ctx.U, ctx.Phi, ctx.params.q, ctx.kappa, tol=ctx.cg_tol
        )
    return solve_phi_v_dirichlet(ctx.domain, v, ctx.U, ctx.Phi, tol=ctx.cg_tol)


def _require(ctx, regime):
    if ctx.regime != regime:
        raise ConfigurationError(f"context regime is {ctx.regime!r}, expected {regime!r}")


def eval_J(ctx: FunctionalContext, v: ScalarField, state: ReducedState | None = None) -> float:
    """Reduced energy in the context's regime."""
    if state is None:
        state = reduced_state(ctx, v)
    d = ctx.domain
    w = d.volume_weight
    m2 = ctx.params.m**2
    phi = state.phi_v.values
    quad = 0.5 * h1_seminorm(v) ** 2 + 0.5 * m2 * l2_norm(v) ** 2
    if ctx.regime == "dirichlet":
        vU2 = (v.values + ctx.U.values) ** 2
        coupling = ctx.Phi.values * (phi + ctx.Phi.values) * vU2
        return quad - 0.5 * w * float(np.sum(coupling[d.interior]))
    if ctx.regime == "neumann":
        W = d.trapezoid_weights
        vU2 = (v.values + ctx.U.values) ** 2
        mass_shift = -0.5 * float(np.sum(W * ctx.Phi.values**2 * vU2))
        coupling = -0.5 * float(np.sum(W * ctx.Phi.values * vU2 * phi))
        source = 0.5 * ctx.params.q * ctx.kappa * float(np.sum(W * phi))
        return quad + mass_shift + coupling + source
    # nonlinear: U = 0
    v2 = v.values**2
    coupling = ctx.Phi.values * (phi + ctx.Phi.values) * v2
    Gterm = ctx.model.G(v.values)
    return quad - 0.5 * w * float(np.sum(coupling[d.interior])) - w * float(
        np.sum(Gterm[d.interior])
    )


def grad_J(
    ctx: FunctionalContext, v: ScalarField, state: ReducedState | None = None
) -> ScalarField:
    """Raw discrete gradient: nodal residual times the volume weight.

    The interior entries are w * (-Lap_h v + m^2 v - (phi_v + Phi)^2 (v + U)
    [- g(v)]); the plain dot product with a perturbation equals the
    directional derivative of eval_J.
    """
    if state is None:
        state = reduced_state(ctx, v)
    res = residual_field(ctx, v, state)
    d = ctx.domain
    return ScalarField(d, res.values * d.volume_weight)


def residual_field(
    ctx: FunctionalContext, v: ScalarField, state: ReducedState | None = None
) -> ScalarField:
    """Euler-Lagrange residual of the matter equation at v (interior nodes)."""
    if state is None:
        state = reduced_state(ctx, v)
    d = ctx.domain
    m2 = ctx.params.m**2
    phi_tot = state.phi_v.values + ctx.Phi.values
    res = neg_laplacian_dirichlet(v.values, d) + m2 * v.interior
    res -= (phi_tot**2 * (v.values + ctx.U.values))[d.interior]
    if ctx.regime == "nonlinear":
        res -= ctx.model.g(v.values)[d.interior]
    out = np.zeros(d.shape)
    out[d.interior] = res
    return ScalarField(d, out)


def eval_J_dirichlet(ctx, v, state=None):
    _require(ctx, "dirichlet")
    return eval_J(ctx, v, state)


def grad_J_dirichlet(ctx, v, state=None):
    _require(ctx, "dirichlet")
    return grad_J(ctx, v, state)


def eval_J_mixed(ctx, v, state=None):
    _require(ctx, "neumann")
    return eval_J(ctx, v, state)


def grad_J_mixed(ctx, v, state=None):
    _require(ctx, "neumann")
    return grad_J(ctx, v, state)


def eval_J_nonlinear(ctx, v, state=None):
    _require(ctx, "nonlinear")
    return eval_J(ctx, v, state)


def grad_J_nonlinear(ctx, v, state=None):
    _require(ctx, "nonlinear")
    return grad_J(ctx, v, state)


def coercivity_bound(ctx: FunctionalContext, v: ScalarField, lambda1: float) -> float:
    """Lower bound on J(v) from the spectral smallness condition.

    Uses the admissible constant c = |Phi|_inf^2 |U|_2 / sqrt(lambda1) in the
    linear-in-gradient term; valid whenever the smallness condition holds for
    the discrete principal eigenvalue.
    """
    _require(ctx, "dirichlet")
    phi_inf2 = float(np.max(np.abs(ctx.Phi.values))) ** 2
    grad = h1_seminorm(v)
    u_l2 = l2_norm(ctx.U)
    lead = (lambda1 - max(0.0, phi_inf2 - ctx.params.m**2)) / (2.0 * lambda1)
    c = phi_inf2 * u_l2 / np.sqrt(lambda1)
    return lead * grad**2 - 0.5 * phi_inf2 * u_l2**2 - c * grad


def finite_difference_gradient_check(
    ctx: FunctionalContext,
    v: ScalarField,
    directions: list[ScalarField],
    eps: float = 1e-5,
) -> float:
    """Worst relative error of central differences against the raw gradient."""
    d = ctx.domain
    g = grad_J(ctx, v)
    worst = 0.0
    for w_dir in directions:
        vp = ScalarField(d, v.values + eps * w_dir.values)
        vm = ScalarField(d, v.values - eps * w_dir.values)
        fd = (eval_J(ctx, vp) - eval_J(ctx, vm)) / (2.0 * eps)
        exact = float(np.sum(g.values * w_dir.values))
        denom = max(abs(exact), abs(fd), 1e-14)
        worst = max(worst, abs(fd - exact) / denom)
    return worst
