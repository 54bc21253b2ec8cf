"""Critical point solvers and the signed solution pipeline.

The pipeline finds, per sign restriction, a negative-level local minimum of
the truncated energy (monotone gradient descent with Armijo backtracking and
Barzilai-Borwein trial steps) and, when the superlinearity margin is
certified, a positive-level mountain-pass point of the untruncated energy
(steepest descent of the maximum along a discretized path from the minimum to
a far point, with arc-length redistribution, finished by a damped
finite-difference Newton polish of the path maximum).

Solver state (current iterate, path) is single-owner and mutated
sequentially; all energy evaluations it calls are pure.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .energy import EnergyVariant, _assemble, scaled_residual
from .mesh import DiscreteFunction, Mesh, build_mesh, estimate_embedding_constant, \
    norm_lp, seminorm_w1p
from .problem import HypothesisReport, ProblemSpec, SamplingPlan, check_hypotheses
from .truncation import HAnalysis, HCurveConstants, TruncationProfile, analyze_h, \
    lambda1

__all__ = [
    "SolverError",
    "Solution",
    "CPSDiagnostic",
    "SolveOptions",
    "PipelineContext",
    "RunReport",
    "first_mode_template",
    "cps_metric",
    "find_negative_start",
    "minimize_truncated",
    "find_far_point",
    "mountain_pass",
    "setup_problem",
    "solve_signed",
]

log = logging.getLogger(__name__)

SIGN_TOL = 1e-10


class SolverError(RuntimeError):
    """A pipeline stage failed; carries the stage name and diagnostics."""

    def __init__(self, stage: str, message: str, diagnostics=None):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.message = message
        self.diagnostics = diagnostics or []


@dataclass
class Solution:
    """A critical point candidate with its certificates."""

    u: DiscreteFunction
    energy: float          # value of the full two-power energy
    residual: float        # scaled residual of the untruncated energy
    seminorm: float        # |grad u|_p
    sup_norm: float
    kind: str              # "minimum" or "mountain_pass"
    sign: str              # "positive", "negative" or "unsigned"
    iterations: int


@dataclass(frozen=True)
class CPSDiagnostic:
    """Energy level and weighted gradient norm, the quantities whose joint
    decay characterizes compactness-style sequences."""

    energy: float
    weighted_grad: float


@dataclass(frozen=True)
class SolveOptions:
    """Tolerances, iteration budgets and seeds for the signed pipeline."""

    residual_tol: float = 1e-8
    minimize_max_iter: int = 200_000
    mp_points: int = 20
    mp_max_iter: int = 50_000
    mp_redistribute_every: int = 10
    enable_mountain_pass: bool = True
    lambda_fraction: float | None = None   # used when spec.lam is unset
    seed: int = 0
    sampling_plan: SamplingPlan | None = None


@dataclass
class PipelineContext:
    """Everything the solve stages share: mesh, certified constants, the
    lower-bound curve landmarks and the cutoff profile."""

    spec: ProblemSpec              # with lambda resolved
    mesh: Mesh
    hypotheses: HypothesisReport
    c_q: float
    c_s: float
    lam1: float
    h_analysis: HAnalysis | None
    profile: TruncationProfile | None
    timings: dict = field(default_factory=dict)


@dataclass
class RunReport:
    """Full record of one signed solve."""

    spec: ProblemSpec
    lam1: float
    c_q: float
    c_s: float
    hypotheses: HypothesisReport
    h_analysis: HAnalysis | None
    profile: TruncationProfile | None
    solutions: list
    failures: list
    timings: dict
    mountain_pass_enabled: bool

    @property
    def expected_solutions(self) -> int:
        return 4 if self.mountain_pass_enabled else 2


def first_mode_template(mesh: Mesh) -> DiscreteFunction:
    """Interpolant of the first Dirichlet eigenfunction shape, sup-normalized."""
    if mesh.dim == 1:
        u = DiscreteFunction.interpolate(mesh, lambda x: np.sin(np.pi * x))
    else:
        u = DiscreteFunction.interpolate(
            mesh, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
    peak = u.sup_norm()
    return DiscreteFunction(mesh, u.values / peak)


def cps_metric(spec: ProblemSpec, u: DiscreteFunction,
               variant: EnergyVariant) -> CPSDiagnostic:
    """Energy and residual weighted by (1 + |grad u|_p + |u|_inf).

    The weight mirrors the norm factor in compactness-style sequence
    conditions; the scaled residual stands in for the dual norm and the
    metric is diagnostic only.
    """
    e_val, grad, semi = _assemble(spec, u.mesh, u.values, variant,
                                  want_grad=True)
    res = scaled_residual(u.mesh, grad)
    return CPSDiagnostic(energy=e_val,
                         weighted_grad=res * (1.0 + semi + u.sup_norm()))


def _classify_sign(values: np.ndarray) -> str:
    if values.size == 0:
        return "unsigned"
    if float(values.min()) >= -SIGN_TOL:
        return "positive"
    if float(values.max()) <= SIGN_TOL:
        return "negative"
    return "unsigned"


def _signed_template(mesh: Mesh, variant: EnergyVariant,
                     template: DiscreteFunction | None) -> DiscreteFunction:
    base = template if template is not None else first_mode_template(mesh)
    if variant.sign == "minus":
        return DiscreteFunction(mesh, -base.values)
    return base.copy()


def find_negative_start(spec: ProblemSpec, variant: EnergyVariant, *,
                        mesh: Mesh | None = None, delta: float = 1.0,
                        template: DiscreteFunction | None = None,
                        max_halvings: int = 60) -> DiscreteFunction:
    """Scale the template down until the truncated energy turns negative.

    Starts at the largest scale keeping the sup norm within the small-state
    bound and halves from there; since q < p the sublinear term wins for
    small scales, so failure signals a parameter close to the threshold or a
    constant mismatch.
    """
    if variant.truncation is None:
        raise ValueError("find_negative_start requires a truncated variant")
    mesh = mesh or build_mesh(spec.dim, spec.n)
    v = _signed_template(mesh, variant, template)
    peak = v.sup_norm()
    if peak == 0.0:
        raise ValueError("template must be nonzero")
    sigma = delta / peak
    for _ in range(max_halvings):
        candidate = DiscreteFunction(mesh, sigma * v.values)
        e_val, _, _ = _assemble(spec, mesh, candidate.values, variant,
                                want_grad=False)
        if e_val < 0.0:
            return candidate
        sigma *= 0.5
    raise SolverError(
        "negative_start",
        f"no negative truncated energy after {max_halvings} halvings; "
        "lambda may be too close to the threshold",
    )


def minimize_truncated(spec: ProblemSpec, u_init: DiscreteFunction,
                       variant: EnergyVariant, *, tol: float = 1e-8,
                       max_iter: int = 200_000, inner_radius: float | None = None,
                       trace: list | None = None) -> Solution:
    """Monotone descent on the truncated energy down to a stationary point.

    Plain negative-gradient steps with Armijo backtracking (constant 1e-4,
    step halving); the trial length per iteration is a safeguarded
    Barzilai-Borwein spectral step, which keeps the schedule scale-free.
    Once the basin is localized, a damped finite-difference Newton finish
    (which also never increases the energy, preserving descent monotonicity)
    drives the residual to tolerance; plain descent alone needs ~1/tol
    iterations for tight tolerances.  Because the energy stays negative the
    iterate is trapped inside the inner truncation radius, where truncated
    and untruncated energies coincide; the returned solution is re-verified
    against the untruncated residual.
    """
    if variant.truncation is None:
        raise ValueError("minimize_truncated requires a truncated variant")
    mesh = u_init.mesh
    r0 = inner_radius if inner_radius is not None else variant.truncation.r0
    v = u_init.values.copy()
    e_val, grad, semi = _assemble(spec, mesh, v, variant, want_grad=True)
    if not e_val < 0.0:
        raise SolverError("minimize", f"initial truncated energy {e_val} is "
                                      "not negative")
    # inside the inner radius the cutoff is identically one, so the polish
    # can run on the untruncated sign variant with its local stencil
    polish_variant = EnergyVariant(sign=variant.sign)
    stencils = _Stencils(mesh)
    alpha = 1.0
    prev_s = prev_y = None
    iterations = 0
    converged = False
    last_polish = -10**9

    def try_polish(it, res):
        nonlocal v, e_val, grad, semi, converged, last_polish
        last_polish = it
        polished, ok = _newton_polish(spec, mesh, v, polish_variant, tol,
                                      stencils, energy_monotone=True)
        if not ok:
            return False
        e_p, g_p, s_p = _assemble(spec, mesh, polished, variant,
                                  want_grad=True)
        r_p = scaled_residual(mesh, g_p)
        slack = 1e-13 * (1.0 + abs(e_val))
        if r_p <= tol and e_p < 0.0 and e_p <= e_val + slack and s_p < r0:
            v, e_val, grad, semi = polished, e_p, g_p, s_p
            converged = True
            return True
        return False

    for it in range(max_iter):
        iterations = it
        res = scaled_residual(mesh, grad)
        if trace is not None:
            trace.append(("minimize", it, e_val, res, semi))
        if res <= tol:
            converged = True
            break
        if (res <= 1e-3 or it % 250 == 0) and it >= 20 \
                and it - last_polish >= 100 and try_polish(it, res):
            break
        d = -grad
        gd = float(grad @ d)
        trial = 2.0 * alpha
        if prev_s is not None:
            sy = float(prev_s @ prev_y)
            if sy > 0.0:
                trial = min(float(prev_s @ prev_s) / sy, 4.0 * alpha)
        cap = (1.0 + float(np.max(np.abs(v)))) / (float(np.max(np.abs(d))) + 1e-300)
        a = min(max(trial, 1e-300), cap)
        accepted = False
        for _ in range(80):
            v_t = v + a * d
            e_t, _, _ = _assemble(spec, mesh, v_t, variant, want_grad=False)
            if np.isfinite(e_t) and e_t <= e_val + 1e-4 * a * gd:
                accepted = True
                break
            a *= 0.5
        if not accepted:
            if try_polish(it, res):
                break
            raise SolverError("minimize", "line search stalled before "
                                          f"reaching tolerance (residual {res:.3e})")
        e_new, grad_new, semi = _assemble(spec, mesh, v_t, variant,
                                          want_grad=True)
        if not e_new < 0.0:
            raise SolverError("minimize", "energy left the negative range, "
                                          "contradicting descent monotonicity")
        prev_s = v_t - v
        prev_y = grad_new - grad
        v, e_val, grad, alpha = v_t, e_new, grad_new, a
    if not converged:
        warnings.warn(
            f"minimize_truncated hit max_iter={max_iter} at residual above "
            "tolerance; returning partial result", RuntimeWarning)
    u = DiscreteFunction(mesh, v)
    full_variant = EnergyVariant(sign=variant.sign)
    e_full, grad_full, semi = _assemble(spec, mesh, v, full_variant,
                                        want_grad=True)
    return Solution(
        u=u,
        energy=float(e_full),
        residual=scaled_residual(mesh, grad_full),
        seminorm=float(semi),
        sup_norm=u.sup_norm(),
        kind="minimum",
        sign=_classify_sign(v),
        iterations=iterations,
    )


def find_far_point(spec: ProblemSpec, u0: Solution, variant: EnergyVariant, *,
                   r1: float, mesh: Mesh | None = None,
                   template: DiscreteFunction | None = None,
                   max_doublings: int = 60) -> DiscreteFunction:
    """Scale the template up until the untruncated energy drops below the
    minimum's level and the seminorm clears the outer truncation radius.

    The certified superlinearity margin makes the energy along the ray tend
    to minus infinity, so doubling terminates; failure signals a violated
    growth structure.
    """
    if variant.truncation is not None:
        raise ValueError("find_far_point works on the untruncated energy")
    mesh = mesh or u0.u.mesh
    v = _signed_template(mesh, variant, template)
    sigma = 1.0
    for k in range(max_doublings):
        vals = sigma * v.values
        e_val, _, semi = _assemble(spec, mesh, vals, variant, want_grad=False)
        if e_val < u0.energy and semi > r1:
            log.debug("far point found after %d doublings (sigma=%g)", k, sigma)
            return DiscreteFunction(mesh, vals)
        sigma *= 2.0
    raise SolverError(
        "far_point",
        f"no admissible far point after {max_doublings} doublings",
    )


class _Stencils:
    """Gradient sparsity pattern of the nodal energy and a coloring of the
    dofs whose probe supports are pairwise disjoint.

    Entry i of the gradient depends only on values at dofs sharing an element
    with i, so columns of the Jacobian with far-apart dofs can be probed by a
    single finite-difference evaluation.
    """

    def __init__(self, mesh: Mesh):
        ndof = mesh.n_dof
        dof_of = np.full(mesh.nodes.shape[0], -1, dtype=int)
        dof_of[mesh.interior] = np.arange(ndof)
        elem_dofs = dof_of[mesh.elements]          # (E, K), -1 on boundary
        nv = elem_dofs.shape[1]
        pairs = []
        for i in range(nv):
            for j in range(nv):
                di, dj = elem_dofs[:, i], elem_dofs[:, j]
                keep = (di >= 0) & (dj >= 0)
                pairs.append(np.column_stack([di[keep], dj[keep]]))
        pairs = np.unique(np.vstack(pairs), axis=0)
        order = np.argsort(pairs[:, 1], kind="stable")
        cols = pairs[order, 1]
        rows = pairs[order, 0]
        starts = np.searchsorted(cols, np.arange(ndof + 1))
        self.rows_of = [rows[starts[j]:starts[j + 1]] for j in range(ndof)]

        if mesh.dim == 1:
            self.colors = mesh.interior % 3
        else:
            gi = mesh.interior % (mesh.n + 1)
            gj = mesh.interior // (mesh.n + 1)
            self.colors = (gi % 3) + 3 * (gj % 3)
        self.color_ids = np.unique(self.colors)


def _fd_jacobian(spec, mesh, values, variant, stencils: _Stencils):
    """Central finite-difference Jacobian of the gradient map, probing all
    same-colored columns simultaneously."""
    n = values.size
    jac = np.zeros((n, n))
    for c in stencils.color_ids:
        idx = np.flatnonzero(stencils.colors == c)
        h = 1e-6 * (1.0 + np.abs(values[idx]))
        vp = values.copy()
        vp[idx] += h
        vm = values.copy()
        vm[idx] -= h
        _, gp, _ = _assemble(spec, mesh, vp, variant, want_grad=True)
        _, gm, _ = _assemble(spec, mesh, vm, variant, want_grad=True)
        diff = gp - gm
        for j, hj in zip(idx, h):
            rows = stencils.rows_of[j]
            jac[rows, j] = diff[rows] / (2.0 * hj)
    return jac


def _newton_polish(spec, mesh, v0, variant, tol, stencils, *,
                   max_steps=40, energy_monotone=False):
    """Damped Newton on the stationarity system from a near-critical point.

    The Jacobian is a colored finite-difference linearization of the exact
    gradient; steps must reduce the scaled residual and, when
    ``energy_monotone`` is set (minimization polish), must not increase the
    energy.  Returns (values, converged).
    """
    v = v0.copy()
    e_val, grad, _ = _assemble(spec, mesh, v, variant, want_grad=True)
    res = scaled_residual(mesh, grad)
    for _ in range(max_steps):
        if res <= tol:
            return v, True
        jac = _fd_jacobian(spec, mesh, v, variant, stencils)
        try:
            step = np.linalg.solve(jac, -grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac, -grad, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            return v, False
        a = 1.0
        improved = False
        for _ in range(30):
            v_t = v + a * step
            e_t, g_t, _ = _assemble(spec, mesh, v_t, variant, want_grad=True)
            r_t = scaled_residual(mesh, g_t)
            ok = np.isfinite(r_t) and r_t < res * (1.0 - 1e-4 * a)
            if ok and energy_monotone:
                # rounding-level slack: near the minimum the true decrease
                # falls below one ulp of the energy value
                ok = np.isfinite(e_t) and \
                    e_t <= e_val + 1e-13 * (1.0 + abs(e_val))
            if ok:
                v, e_val, grad, res = v_t, e_t, g_t, r_t
                improved = True
                break
            a *= 0.5
        if not improved:
            return v, res <= tol
    return v, res <= tol


def _redistribute(points: np.ndarray, mesh: Mesh, p: float) -> np.ndarray:
    """Arc-length reparametrization of the path in the gradient p-seminorm."""
    m2 = points.shape[0]
    lens = np.empty(m2 - 1)
    for j in range(m2 - 1):
        diff = DiscreteFunction(mesh, points[j + 1] - points[j])
        lens[j] = seminorm_w1p(diff, p)
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    total = cum[-1]
    if total <= 0.0:
        return points.copy()
    out = points.copy()
    targets = np.linspace(0.0, total, m2)
    for i in range(1, m2 - 1):
        j = int(np.searchsorted(cum, targets[i], side="right") - 1)
        j = min(max(j, 0), m2 - 2)
        theta = (targets[i] - cum[j]) / lens[j] if lens[j] > 0 else 0.0
        out[i] = (1.0 - theta) * points[j] + theta * points[j + 1]
    return out


def mountain_pass(spec: ProblemSpec, u0: Solution, e: DiscreteFunction,
                  variant: EnergyVariant, *, tol: float = 1e-8,
                  n_interior: int = 20, max_iter: int = 50_000,
                  redistribute_every: int = 10, r0: float = 0.0,
                  trace: list | None = None) -> Solution:
    """Saddle point between the well of ``u0`` and the far point ``e``.

    A path of ``n_interior`` interior points joining the fixed endpoints is
    relaxed by repeatedly moving its maximum-energy point one backtracking
    descent step and reparametrizing by arc length; once the maximum settles,
    a damped finite-difference Newton polish drives the stationarity residual
    to tolerance.  Fails loudly if the path maximum sinks below zero (the
    barrier was crossed without a critical point) or if progress stalls.
    """
    if variant.truncation is not None:
        raise ValueError("mountain_pass works on the untruncated energy")
    mesh = u0.u.mesh
    if e.mesh is not mesh and (e.mesh.dim, e.mesh.n) != (mesh.dim, mesh.n):
        raise ValueError("endpoints live on different meshes")
    e_far, _, _ = _assemble(spec, mesh, e.values, variant, want_grad=False)
    if not e_far < u0.energy:
        raise SolverError("mountain_pass",
                          "far point does not lie below the minimum level")

    m2 = n_interior + 2
    thetas = np.linspace(0.0, 1.0, m2)
    points = np.array([(1.0 - t) * u0.u.values + t * e.values for t in thetas])
    energies = np.array([
        _assemble(spec, mesh, pt, variant, want_grad=False)[0] for pt in points
    ])
    diagnostics: list[CPSDiagnostic] = []
    stencils = _Stencils(mesh)
    alpha = 1.0
    polish_every = 25
    last_polish = -1

    def finish(values, iterations):
        e_val, grad, semi = _assemble(spec, mesh, values, variant,
                                      want_grad=True)
        res = scaled_residual(mesh, grad)
        u = DiscreteFunction(mesh, values)
        if not e_val > 0.0:
            raise SolverError("mountain_pass",
                              f"converged point has energy {e_val} <= 0",
                              diagnostics)
        if r0 > 0.0:
            dist = seminorm_w1p(
                DiscreteFunction(mesh, values - u0.u.values), spec.p)
            if not dist > r0:
                raise SolverError(
                    "mountain_pass",
                    f"converged point is not distinct from the minimum "
                    f"(distance {dist:.3e} <= {r0:.3e})", diagnostics)
        return Solution(
            u=u, energy=float(e_val), residual=float(res),
            seminorm=float(semi), sup_norm=u.sup_norm(),
            kind="mountain_pass", sign=_classify_sign(values),
            iterations=iterations,
        )

    def try_polish(values, iterations):
        polished, ok = _newton_polish(spec, mesh, values, variant, tol,
                                      stencils)
        if not ok:
            return None
        try:
            return finish(polished, iterations)
        except SolverError:
            return None

    for it in range(1, max_iter + 1):
        k = 1 + int(np.argmax(energies[1:-1]))
        if energies[k] <= 0.0:
            raise SolverError(
                "mountain_pass",
                "path maximum collapsed below zero: the barrier was crossed "
                "without locating a critical point", diagnostics)
        e_k, grad, semi = _assemble(spec, mesh, points[k], variant,
                                    want_grad=True)
        res = scaled_residual(mesh, grad)
        u_k_sup = float(np.max(np.abs(points[k]), initial=0.0))
        diagnostics.append(
            CPSDiagnostic(energy=e_k,
                          weighted_grad=res * (1.0 + semi + u_k_sup)))
        if trace is not None:
            trace.append(("mountain_pass", it, e_k, res, semi))
        if res <= tol:
            return finish(points[k], it)

        d = -grad
        gd = float(grad @ d)
        a = min(2.0 * alpha,
                (1.0 + u_k_sup) / (float(np.max(np.abs(d))) + 1e-300))
        accepted = False
        for _ in range(80):
            v_t = points[k] + a * d
            e_t, _, _ = _assemble(spec, mesh, v_t, variant, want_grad=False)
            if np.isfinite(e_t) and e_t <= e_k + 1e-4 * a * gd:
                accepted = True
                break
            a *= 0.5
        displacement = a * float(np.max(np.abs(d))) if accepted else 0.0
        if not accepted or displacement < 1e-14:
            sol = try_polish(points[k], it)
            if sol is not None:
                return sol
            raise SolverError(
                "mountain_pass",
                f"maximum point stalled with residual {res:.3e} above "
                f"tolerance {tol:.1e}", diagnostics)
        points[k] = v_t
        energies[k] = e_t
        alpha = a

        if it % redistribute_every == 0:
            points = _redistribute(points, mesh, spec.p)
            energies = np.array([
                _assemble(spec, mesh, pt, variant, want_grad=False)[0]
                for pt in points])
        if (res <= 1e-2 or it % polish_every == 0) and it > redistribute_every \
                and it - last_polish >= polish_every // 2:
            last_polish = it
            sol = try_polish(points[k], it)
            if sol is not None:
                return sol
    raise SolverError("mountain_pass",
                      f"no convergence within {max_iter} path iterations",
                      diagnostics)


def setup_problem(spec: ProblemSpec, options: SolveOptions | None = None, *,
                  mesh: Mesh | None = None) -> PipelineContext:
    """Certify constants, resolve lambda, and analyze the truncation curve."""
    options = options or SolveOptions()
    timings = {}
    mesh = mesh or build_mesh(spec.dim, spec.n)

    t0 = time.perf_counter()
    plan = options.sampling_plan or SamplingPlan(dim=spec.dim,
                                                 seed=options.seed)
    hypotheses = check_hypotheses(spec.family, spec.p, spec.s, plan)
    timings["hypotheses"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if spec.embedding_mode == "user":
        c_q, c_s = float(spec.c_q), float(spec.c_s)
    else:
        c_q = estimate_embedding_constant(mesh, spec.p, spec.q,
                                          seed=options.seed)
        c_s = estimate_embedding_constant(mesh, spec.p, spec.s,
                                          seed=options.seed + 1)
    timings["embedding"] = time.perf_counter() - t0

    base = HCurveConstants(alpha1=hypotheses.alpha1, c_q=c_q, c_s=c_s,
                           lam=None, p=spec.p, q=spec.q, s=spec.s)
    t0 = time.perf_counter()
    lam1 = lambda1(base)
    timings["lambda1"] = time.perf_counter() - t0

    if spec.lam is None:
        fraction = options.lambda_fraction
        if fraction is None:
            fraction = 0.5
        if not 0.0 < fraction:
            raise ValueError(f"lambda fraction must be positive, got {fraction}")
        spec = spec.with_lambda(fraction * lam1)

    t0 = time.perf_counter()
    h_analysis = None
    profile = None
    if spec.require_lambda() < lam1:
        h_analysis = analyze_h(replace(base, lam=spec.lam))
        if h_analysis.has_hump:
            profile = TruncationProfile(h_analysis.r0, h_analysis.r1)
    timings["analyze_h"] = time.perf_counter() - t0

    return PipelineContext(spec=spec, mesh=mesh, hypotheses=hypotheses,
                           c_q=c_q, c_s=c_s, lam1=lam1,
                           h_analysis=h_analysis, profile=profile,
                           timings=timings)


def _verify_solution(spec, mesh, sol: Solution, expected_sign: str,
                     tol: float, r0: float, u0: Solution | None):
    """Re-verify a candidate against the full (unsigned) energy and the type
    invariants; raises SolverError on any miss."""
    stage = f"verify_{sol.kind}"
    values = sol.u.values
    sign = _classify_sign(values)
    if expected_sign != "unsigned" and sign != expected_sign:
        raise SolverError(stage, f"sign purity violated: expected "
                                 f"{expected_sign}, classified {sign}")
    e_full, grad_full, semi = _assemble(spec, mesh, values, EnergyVariant(),
                                        want_grad=True)
    res_full = scaled_residual(mesh, grad_full)
    if res_full > tol:
        raise SolverError(stage, f"full-energy residual {res_full:.3e} "
                                 f"exceeds tolerance {tol:.1e}")
    if sol.kind == "minimum":
        if not e_full < 0.0:
            raise SolverError(stage, f"minimum has energy {e_full} >= 0")
        if not semi < r0:
            raise SolverError(stage, f"minimum seminorm {semi} is not below "
                                     f"the inner radius {r0}")
    else:
        if not e_full > 0.0:
            raise SolverError(stage, f"mountain pass point has energy "
                                     f"{e_full} <= 0")
        if u0 is not None:
            dist = seminorm_w1p(
                DiscreteFunction(mesh, values - u0.u.values), spec.p)
            if not dist > r0:
                raise SolverError(stage, "mountain pass point coincides with "
                                         "the minimum within the inner radius")
    return replace(sol, energy=float(e_full), residual=float(res_full),
                   seminorm=float(semi), sign=sign)


def solve_signed(spec: ProblemSpec, options: SolveOptions | None = None, *,
                 mesh: Mesh | None = None,
                 trace: list | None = None) -> RunReport:
    """Run the full signed pipeline and collect up to four solutions.

    For each sign restriction: negative start, truncated minimization, and,
    when the superlinearity margin is certified and enabled, far point and
    mountain pass on the untruncated energy.  Every accepted solution is
    re-verified as a stationary point of the full two-power energy.  Stage
    failures are recorded in the report instead of aborting the other
    branches.
    """
    options = options or SolveOptions()
    ctx = setup_problem(spec, options, mesh=mesh)
    spec, mesh = ctx.spec, ctx.mesh
    timings = dict(ctx.timings)
    solutions: list[Solution] = []
    failures: list[dict] = []

    mp_enabled = options.enable_mountain_pass and ctx.hypotheses.mountain_pass_ok
    report = RunReport(spec=spec, lam1=ctx.lam1, c_q=ctx.c_q, c_s=ctx.c_s,
                       hypotheses=ctx.hypotheses, h_analysis=ctx.h_analysis,
                       profile=ctx.profile, solutions=solutions,
                       failures=failures, timings=timings,
                       mountain_pass_enabled=mp_enabled)

    if not ctx.hypotheses.minima_ok:
        failures.append({
            "stage": "hypotheses", "variant": "both",
            "message": "structural constants violated: "
                       + ", ".join(v[0] for v in ctx.hypotheses.violations),
        })
        return report
    if ctx.profile is None:
        failures.append({
            "stage": "threshold", "variant": "both",
            "message": f"lambda={spec.lam:.6g} does not lie strictly below "
                       f"the threshold {ctx.lam1:.6g} (no positive hump)",
        })
        return report

    for sign in ("plus", "minus"):
        trunc_variant = EnergyVariant(sign=sign, truncation=ctx.profile)
        full_variant = EnergyVariant(sign=sign)
        expected = "positive" if sign == "plus" else "negative"
        t0 = time.perf_counter()
        try:
            start = find_negative_start(spec, trunc_variant, mesh=mesh,
                                        delta=ctx.hypotheses.delta)
            sol_min = minimize_truncated(spec, start, trunc_variant,
                                         tol=options.residual_tol,
                                         max_iter=options.minimize_max_iter,
                                         inner_radius=ctx.h_analysis.r0,
                                         trace=trace)
            sol_min = _verify_solution(spec, mesh, sol_min, expected,
                                       options.residual_tol,
                                       ctx.h_analysis.r0, None)
        except SolverError as err:
            failures.append({"stage": err.stage, "variant": sign,
                             "message": err.message})
            timings[f"minimize_{sign}"] = time.perf_counter() - t0
            continue
        timings[f"minimize_{sign}"] = time.perf_counter() - t0
        solutions.append(sol_min)

        if not mp_enabled:
            continue
        t0 = time.perf_counter()
        try:
            far = find_far_point(spec, sol_min, full_variant,
                                 r1=ctx.h_analysis.r1, mesh=mesh)
            sol_mp = mountain_pass(spec, sol_min, far, full_variant,
                                   tol=options.residual_tol,
                                   n_interior=options.mp_points,
                                   max_iter=options.mp_max_iter,
                                   redistribute_every=options.mp_redistribute_every,
                                   r0=ctx.h_analysis.r0, trace=trace)
            sol_mp = _verify_solution(spec, mesh, sol_mp, expected,
                                      options.residual_tol,
                                      ctx.h_analysis.r0, sol_min)
        except SolverError as err:
            failures.append({"stage": err.stage, "variant": sign,
                             "message": err.message})
            timings[f"mountain_pass_{sign}"] = time.perf_counter() - t0
            continue
        timings[f"mountain_pass_{sign}"] = time.perf_counter() - t0
        solutions.append(sol_mp)
    return report
