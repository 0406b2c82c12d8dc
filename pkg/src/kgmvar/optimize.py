"""Critical-point finders for the reduced energies.

Minimization uses a Sobolev-preconditioned gradient flow with Armijo
backtracking (one (-Lap + m^2) solve per step turns the raw gradient into a
mesh-independent descent direction). Saddle points of the superlinear problem
come from a discrete-path deformation scheme. Every candidate is meant to be
polished by damped Newton on the full coupled system before certification;
the descent tolerances here are deliberately loose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .elliptic import (
    EllipticOperator,
    SolverError,
    assemble_dirichlet,
    assemble_neumann,
    cg_solve,
    eigenvalues,
    neg_laplacian_dirichlet,
)
from .functional import (
    ConfigurationError,
    FunctionalContext,
    eval_J,
    reduced_state,
    residual_field,
)
from .grid import (
    ScalarField,
    dirichlet_form,
    field_from_interior,
    h1_seminorm,
    l2_norm,
)


@dataclass(frozen=True)
class DescentConfig:
    grad_tol: float = 1e-7
    max_iters: int = 2000
    armijo_slope: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0

    def __post_init__(self):
        if min(self.grad_tol, self.max_iters, self.initial_step) <= 0:
            raise ConfigurationError("descent parameters must be positive")
        if not 0 < self.armijo_slope < 1 or not 0 < self.backtrack_factor < 1:
            raise ConfigurationError("armijo_slope and backtrack_factor must lie in (0, 1)")


@dataclass(frozen=True)
class MountainPassConfig:
    path_points: int = 21
    deform_tol: float = 1e-5
    max_deforms: int = 4000
    endpoint_scale_start: float = 1.0

    def __post_init__(self):
        if self.path_points < 3:
            raise ConfigurationError("a path needs at least 3 points")
        if min(self.deform_tol, self.max_deforms, self.endpoint_scale_start) <= 0:
            raise ConfigurationError("mountain-pass parameters must be positive")


@dataclass(frozen=True)
class CriticalPoint:
    v: ScalarField
    J_value: float
    grad_norm: float
    kind: str  # "minimizer" | "mountain-pass"
    iterations: int
    converged: bool
    residual_norm: float | None = None


def _precondition(ctx: FunctionalContext, res: ScalarField) -> ScalarField:
    """Apply (-Lap_h + m^2)^{-1} to the Euler-Lagrange residual."""
    d = ctx.domain
    op = EllipticOperator(d, "dirichlet", shift=ctx.params.m**2)
    out, _ = cg_solve(op, field_from_interior(d, res.interior), tol=ctx.cg_tol)
    return out


def _metric_norm(ctx: FunctionalContext, f: ScalarField) -> float:
    return float(
        np.sqrt(dirichlet_form(f, f) + ctx.params.m**2 * l2_norm(f) ** 2)
    )


def minimize(ctx: FunctionalContext, v0: ScalarField, cfg: DescentConfig) -> CriticalPoint:
    """Preconditioned gradient descent with Armijo backtracking.

    Terminates when the gradient norm in the preconditioned (dual) metric
    drops below grad_tol, or when the line search stalls at the noise floor
    of the inner solves; the best iterate is returned either way.
    """
    d = ctx.domain
    w = d.volume_weight
    v = v0
    state = reduced_state(ctx, v)
    Jv = eval_J(ctx, v, state)
    step = cfg.initial_step
    pre_norm = np.inf
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        res = residual_field(ctx, v, state)
        p = _precondition(ctx, res)
        slope = w * float(np.sum(res.values * p.values))
        pre_norm = float(np.sqrt(max(slope, 0.0)))
        if pre_norm <= cfg.grad_tol:
            converged = True
            break
        t = min(cfg.initial_step, step / cfg.backtrack_factor)
        accepted = False
        while t > 1e-18:
            trial = ScalarField(d, v.values - t * p.values)
            trial_state = reduced_state(ctx, trial)
            Jt = eval_J(ctx, trial, trial_state)
            if Jt <= Jv - cfg.armijo_slope * t * slope:
                v, state, Jv = trial, trial_state, Jt
                step = t
                accepted = True
                break
            t *= cfg.backtrack_factor
        if not accepted:
            # decrease smaller than inner-solve noise: report the iterate
            break
    return CriticalPoint(
        v=v,
        J_value=Jv,
        grad_norm=pre_norm,
        kind="minimizer",
        iterations=it,
        converged=converged,
    )


def find_negative_endpoint(
    ctx: FunctionalContext, direction: ScalarField, cfg: MountainPassConfig
) -> ScalarField:
    """Scale a ray until the superquadratic term drives the energy negative."""
    d = ctx.domain
    if h1_seminorm(direction) == 0.0:
        raise ConfigurationError("zero direction has no growth ray")
    t = cfg.endpoint_scale_start
    for _ in range(60):
        cand = ScalarField(d, t * direction.values)
        if eval_J(ctx, cand) < 0.0:
            return cand
        t *= 2.0
    raise SolverError(
        "energy stayed nonnegative after 60 doublings; nonlinearity too weak"
    )


def mountain_pass(
    ctx: FunctionalContext, endpoint: ScalarField, cfg: MountainPassConfig
) -> CriticalPoint:
    """Discrete-path deformation between 0 and a negative-energy endpoint.

    The path maximum is repeatedly pushed along the preconditioned negative
    gradient with Armijo steps; the path is re-parameterized by arc length in
    the preconditioned metric once per sweep so nodes do not bunch up. Once
    the deformation stops lowering the pass level, the near-critical maximum
    is polished by Newton on the coupled system; the polished point is
    accepted only if it is nontrivial, has positive energy, and meets the
    gradient tolerance.
    """
    d = ctx.domain
    w = d.volume_weight
    if eval_J(ctx, endpoint) >= 0.0:
        raise SolverError("mountain-pass endpoint must have negative energy")
    n = cfg.path_points
    ts = np.linspace(0.0, 1.0, n)
    path = [ScalarField(d, t * endpoint.values) for t in ts]
    Js = [eval_J(ctx, f) for f in path]
    step = 1.0
    best_i = int(np.argmax(Js))
    pre_norm = np.inf
    last_level = np.inf
    for k in range(1, cfg.max_deforms + 1):
        best_i = int(np.argmax(Js))
        if best_i in (0, n - 1):
            raise SolverError("path maximum collapsed to an endpoint")
        v = path[best_i]
        state = reduced_state(ctx, v)
        res = residual_field(ctx, v, state)
        p = _precondition(ctx, res)
        slope = w * float(np.sum(res.values * p.values))
        pre_norm = float(np.sqrt(max(slope, 0.0)))
        if pre_norm <= cfg.deform_tol:
            if l2_norm(v) <= 1e-6:
                raise SolverError("path maximum collapsed toward the trivial state")
            return CriticalPoint(
                v=v, J_value=Js[best_i], grad_norm=pre_norm,
                kind="mountain-pass", iterations=k, converged=True,
            )
        # cap the move by the neighbor spacing so nodes cannot tunnel off the
        # ridge between re-parameterizations
        p_len = _metric_norm(ctx, p)
        spacing = min(
            _metric_norm(ctx, ScalarField(d, v.values - path[best_i - 1].values)),
            _metric_norm(ctx, ScalarField(d, path[best_i + 1].values - v.values)),
        )
        t_cap = 0.5 * spacing / p_len if p_len > 0 else 1.0
        t = min(1.0, step / 0.5, t_cap)
        moved = False
        while t > 1e-16:
            trial = ScalarField(d, v.values - t * p.values)
            Jt = eval_J(ctx, trial)
            if Jt <= Js[best_i] - 1e-4 * t * slope:
                path[best_i] = trial
                Js[best_i] = Jt
                step = t
                moved = True
                break
            t *= 0.5
        if not moved:
            break
        if k % n == 0:
            level = max(Js)
            stalled = level > last_level - 1e-3 * (1.0 + abs(level))
            last_level = level
            if stalled:
                polished = _polish_pass_point(ctx, path[int(np.argmax(Js))], cfg)
                if polished is not None:
                    return CriticalPoint(
                        v=polished[0], J_value=polished[1], grad_norm=polished[2],
                        kind="mountain-pass", iterations=k, converged=True,
                    )
            # once the max is nearly critical the path shape no longer
            # matters; re-interpolating would only perturb the converging node
            if pre_norm > 100.0 * cfg.deform_tol:
                path, Js = _reparametrize(ctx, path)
    return CriticalPoint(
        v=path[best_i], J_value=Js[best_i], grad_norm=pre_norm,
        kind="mountain-pass", iterations=cfg.max_deforms, converged=False,
    )


def _polish_pass_point(ctx, v, cfg):
    """Newton-polish a near-critical path maximum; None if unusable."""
    try:
        refined = newton_refine(ctx, v)
    except RuntimeError:
        return None
    if not refined.converged or l2_norm(refined.v) <= 1e-6:
        return None
    Jv = eval_J(ctx, refined.v)
    if Jv <= 0.0:
        return None
    res = residual_field(ctx, refined.v)
    p = _precondition(ctx, res)
    slope = ctx.domain.volume_weight * float(np.sum(res.values * p.values))
    pre_norm = float(np.sqrt(max(slope, 0.0)))
    if pre_norm > cfg.deform_tol:
        return None
    return refined.v, Jv, pre_norm


def _reparametrize(ctx, path):
    """Redistribute path nodes to equal arc length in the preconditioned metric."""
    d = ctx.domain
    n = len(path)
    seg = [
        _metric_norm(ctx, ScalarField(d, b.values - a.values))
        for a, b in zip(path[:-1], path[1:])
    ]
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0.0:
        return path, [eval_J(ctx, f) for f in path]
    targets = np.linspace(0.0, s[-1], n)
    new_path = [path[0]]
    for tgt in targets[1:-1]:
        j = int(np.searchsorted(s, tgt, side="right")) - 1
        j = min(j, n - 2)
        frac = 0.0 if seg[j] == 0.0 else (tgt - s[j]) / seg[j]
        vals = (1.0 - frac) * path[j].values + frac * path[j + 1].values
        new_path.append(ScalarField(d, vals))
    new_path.append(path[-1])
    return new_path, [eval_J(ctx, f) for f in new_path]


# ---------------------------------------------------------------------------
# Newton refinement of the full coupled system
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NewtonResult:
    v: ScalarField
    phi: ScalarField
    residual_norm: float
    iterations: int
    converged: bool


def newton_refine(
    ctx: FunctionalContext,
    v0: ScalarField,
    phi0: ScalarField | None = None,
    tol: float = 1e-10,
    max_iter: int = 60,
) -> NewtonResult:
    """Damped Newton on the coupled matter/potential system.

    Unknowns are the interior matter values and the potential correction
    (interior nodes in the Dirichlet regimes, all lattice nodes in the
    Neumann regime); the exact sparse Jacobian is factored with SuperLU and
    steps are halved until the residual norm decreases.
    """
    if ctx.regime == "neumann":
        return _newton_neumann(ctx, v0, phi0, tol, max_iter)
    return _newton_dirichlet(ctx, v0, phi0, tol, max_iter)


def _newton_dirichlet(ctx, v0, phi0, tol, max_iter):
    d = ctx.domain
    m2 = ctx.params.m**2
    w = d.volume_weight
    A = assemble_dirichlet(d)
    nint = d.n_interior
    Uv = ctx.U.values
    Phiv = ctx.Phi.values
    nonlin = ctx.regime == "nonlinear"

    if phi0 is None:
        phi0 = reduced_state(ctx, v0).phi_v
    x = np.concatenate([v0.interior.ravel(), phi0.interior.ravel()])

    def fields(xvec):
        vf = field_from_interior(d, xvec[:nint].reshape(d.counts))
        pf = field_from_interior(d, xvec[nint:].reshape(d.counts))
        return vf, pf

    def residual(xvec):
        vf, pf = fields(xvec)
        phi_tot = pf.values + Phiv
        vu = vf.values + Uv
        f1 = neg_laplacian_dirichlet(vf.values, d) + m2 * vf.interior
        f1 -= (phi_tot**2 * vu)[d.interior]
        if nonlin:
            f1 -= ctx.model.g(vf.values)[d.interior]
        f2 = neg_laplacian_dirichlet(pf.values, d) + (vu**2 * phi_tot)[d.interior]
        return np.concatenate([f1.ravel(), f2.ravel()])

    def jacobian(xvec):
        vf, pf = fields(xvec)
        phi_tot = (pf.values + Phiv)[d.interior].ravel()
        vu = (vf.values + Uv)[d.interior].ravel()
        d11 = m2 - phi_tot**2
        if nonlin:
            d11 = d11 - ctx.model.g_prime(vf.interior.ravel())
        J11 = A + sp.diags(d11)
        J12 = sp.diags(-2.0 * phi_tot * vu)
        J21 = sp.diags(2.0 * vu * phi_tot)
        J22 = A + sp.diags(vu**2)
        return sp.bmat([[J11, J12], [J21, J22]], format="csc")

    return _damped_newton(ctx, x, residual, jacobian, fields, w, tol, max_iter)


def _newton_neumann(ctx, v0, phi0, tol, max_iter):
    d = ctx.domain
    m2 = ctx.params.m**2
    w = d.volume_weight
    A = assemble_dirichlet(d)
    K0 = assemble_neumann(d)
    nint = d.n_interior
    nall = d.n_nodes
    Uv = ctx.U.values
    Phiv = ctx.Phi.values
    Wv = d.trapezoid_weights.ravel()
    src = ctx.params.q * ctx.kappa
    interior_idx = np.flatnonzero(~d.boundary_mask.ravel())
    P = sp.csr_matrix(
        (np.ones(nint), (interior_idx, np.arange(nint))), shape=(nall, nint)
    )

    if phi0 is None:
        phi0 = reduced_state(ctx, v0).phi_v
    x = np.concatenate([v0.interior.ravel(), phi0.values.ravel()])

    def fields(xvec):
        vf = field_from_interior(d, xvec[:nint].reshape(d.counts))
        pf = ScalarField(d, xvec[nint:].reshape(d.shape))
        return vf, pf

    def residual(xvec):
        vf, pf = fields(xvec)
        phi_tot = pf.values + Phiv
        vu = vf.values + Uv
        f1 = neg_laplacian_dirichlet(vf.values, d) + m2 * vf.interior
        f1 -= (phi_tot**2 * vu)[d.interior]
        # potential equation in the trapezoid-weighted symmetric form
        f2 = K0 @ xvec[nint:] + Wv * ((vu**2 * phi_tot).ravel() - src)
        return np.concatenate([f1.ravel(), f2])

    def jacobian(xvec):
        vf, pf = fields(xvec)
        phi_tot = (pf.values + Phiv).ravel()
        vu = (vf.values + Uv).ravel()
        J11 = A + sp.diags(
            m2 - (phi_tot**2)[interior_idx]
        )
        J12 = P.T @ sp.diags(-2.0 * phi_tot * vu)
        J21 = sp.diags(Wv * 2.0 * vu * phi_tot) @ P
        J22 = K0 + sp.diags(Wv * vu**2)
        return sp.bmat([[J11, J12], [J21, J22]], format="csc")

    def norm(fvec):
        # weight the two blocks consistently with their quadratures
        n1 = np.sum(fvec[:nint] ** 2) * w
        f2 = fvec[nint:] / Wv  # back to the nodal residual
        n2 = np.sum(Wv * f2**2)
        return float(np.sqrt(n1 + n2))

    return _run_newton(ctx, x, residual, jacobian, fields, norm, tol, max_iter)


def _damped_newton(ctx, x, residual, jacobian, fields, w, tol, max_iter):
    def norm(fvec):
        return float(np.sqrt(np.sum(fvec**2) * w))

    return _run_newton(ctx, x, residual, jacobian, fields, norm, tol, max_iter)


def _run_newton(ctx, x, residual, jacobian, fields, norm, tol, max_iter):
    f = residual(x)
    fn = norm(f)
    it = 0
    for it in range(1, max_iter + 1):
        if fn <= tol:
            break
        lu = spla.splu(jacobian(x))
        delta = lu.solve(-f)
        lam = 1.0
        while lam > 1e-12:
            x_new = x + lam * delta
            f_new = residual(x_new)
            fn_new = norm(f_new)
            if fn_new < (1.0 - 1e-4 * lam) * fn or fn_new <= tol:
                x, f, fn = x_new, f_new, fn_new
                break
            lam *= 0.5
        else:
            break
    vf, pf = fields(x)
    return NewtonResult(
        v=vf, phi=pf, residual_norm=fn, iterations=it, converged=fn <= tol
    )


# ---------------------------------------------------------------------------
# Multiplicity probe for the odd superlinear problem
# ---------------------------------------------------------------------------

def symmetric_subspace_index(phi_inf: float, m: float, lams: list[float]) -> int:
    """Smallest 1-based index j with phi_inf^2 - m^2 < lambda_j."""
    excess = phi_inf**2 - m**2
    for j, lam in enumerate(lams, start=1):
        if excess < lam:
            return j
    raise SolverError("no eigenvalue exceeds the potential excess in the computed range")


def multiplicity_probe(
    ctx: FunctionalContext,
    cfg: MountainPassConfig,
    n_modes: int = 3,
    distinct_tol: float = 1e-3,
) -> list[CriticalPoint]:
    """Search for distinct critical points along low-eigenmode rays.

    Restricts the minimax to the span of each of the first few eigenfields,
    where the deformation collapses to a ray maximum (paths in a 1D subspace
    cannot detour around the barrier), then Newton-polishes each candidate on
    the full coupled system and deduplicates up to sign (the energy is even
    for an odd nonlinearity, so v and -v are one orbit). Returned points are
    ordered by increasing energy; fewer than two survivors is reported, not
    fatal.
    """
    if ctx.regime != "nonlinear":
        raise ConfigurationError("the multiplicity probe applies to the superlinear regime")
    if float(np.max(np.abs(ctx.U.values))) > 0:
        raise ConfigurationError("the multiplicity probe requires zero matter trace")
    d = ctx.domain
    _, modes = eigenvalues(d, n_modes)
    points: list[CriticalPoint] = []
    for mode in modes:
        try:
            seed = ScalarField(d, 0.1 * mode.values)
            endpoint = find_negative_endpoint(ctx, seed, cfg)
            v0, iters = _ray_maximum(ctx, endpoint)
            refined = newton_refine(ctx, v0)
        except SolverError:
            continue
        if not refined.converged or l2_norm(refined.v) <= 1e-6:
            continue
        Jv = eval_J(ctx, refined.v)
        if Jv <= 0.0:
            continue
        cp = CriticalPoint(
            v=refined.v,
            J_value=Jv,
            grad_norm=refined.residual_norm,
            kind="mountain-pass",
            iterations=iters,
            converged=True,
            residual_norm=refined.residual_norm,
        )
        if all(_distinct(cp.v, other.v, distinct_tol) for other in points):
            points.append(cp)
    points.sort(key=lambda c: c.J_value)
    return points


def _ray_maximum(ctx, endpoint: ScalarField) -> tuple[ScalarField, int]:
    """Maximize the energy along the segment from 0 to the endpoint.

    Golden-section search after a coarse bracketing scan; the energy along a
    mountain-pass ray rises from 0 and falls past the barrier, so the scan
    cannot miss the interior maximum at this resolution.
    """
    d = ctx.domain
    base = endpoint.values

    def J_at(t):
        return eval_J(ctx, ScalarField(d, t * base))

    ts = np.linspace(0.0, 1.0, 65)
    vals = [J_at(t) for t in ts]
    k = int(np.argmax(vals))
    if k in (0, len(ts) - 1):
        raise SolverError("no interior energy maximum along the ray")
    lo, hi = ts[k - 1], ts[k + 1]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    e = a + invphi * (b - a)
    fc, fe = J_at(c), J_at(e)
    iters = len(ts)
    while b - a > 1e-10 * max(1.0, hi):
        iters += 1
        if fc > fe:
            b, e, fe = e, c, fc
            c = b - invphi * (b - a)
            fc = J_at(c)
        else:
            a, c, fc = c, e, fe
            e = a + invphi * (b - a)
            fe = J_at(e)
        if iters > 400:
            break
    t_star = 0.5 * (a + b)
    return ScalarField(d, t_star * base), iters


def _distinct(a: ScalarField, b: ScalarField, tol: float) -> bool:
    scale = max(l2_norm(a), l2_norm(b), 1e-30)
    diff = min(
        l2_norm(ScalarField(a.domain, a.values - b.values)),
        l2_norm(ScalarField(a.domain, a.values + b.values)),
    )
    return diff / scale > tol
