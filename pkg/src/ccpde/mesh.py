"""Uniform P1 finite elements on (0,1) and (0,1)^2.

Discrete functions live in the span of interior hat functions, so the zero
Dirichlet trace is built into the data layout.  Power-type integrals use the
vertex (lumped) rule, gradient quantities use the exact element-constant
gradients of P1; the energies assembled on top differentiate exactly these
quadratures, which keeps descent methods and finite-difference checks
consistent with each other.

Meshes are immutable after construction and all norm operations are pure, so
everything here is safe to call concurrently; randomized routines take an
explicit seed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Mesh",
    "DiscreteFunction",
    "build_mesh",
    "norm_lp",
    "seminorm_w1p",
    "estimate_embedding_constant",
]


@dataclass(frozen=True)
class Mesh:
    """Uniform simplicial mesh of the unit interval or unit square.

    ``elements`` lists vertex indices (segments in 1D, positively oriented
    right triangles from square bisection in 2D); ``interior`` indexes the
    unknowns, ``lumped[i]`` is the integral of hat function i.
    """

    dim: int
    n: int
    nodes: np.ndarray        # (V, dim) vertex coordinates
    elements: np.ndarray     # (E, dim+1) vertex indices per element
    interior: np.ndarray     # (ndof,) indices of interior vertices
    measure: float           # measure of a single element (uniform mesh)
    grad_basis: np.ndarray   # (E, dim+1, dim) hat-function gradients
    barycenters: np.ndarray  # (E, dim)
    lumped: np.ndarray       # (V,) integral of each hat function

    @property
    def h_size(self) -> float:
        return 1.0 / self.n

    @property
    def n_dof(self) -> int:
        return int(self.interior.size)

    @property
    def dof_weights(self) -> np.ndarray:
        """Lumped quadrature weights of the interior nodes."""
        return self.lumped[self.interior]

    def full_values(self, values: np.ndarray) -> np.ndarray:
        """Embed a dof vector into the full vertex vector (zero trace)."""
        full = np.zeros(self.nodes.shape[0])
        full[self.interior] = values
        return full

    def element_gradients(self, full: np.ndarray) -> np.ndarray:
        """Constant gradient of the P1 interpolant on each element, (E, dim)."""
        return np.einsum("ek,ekd->ed", full[self.elements], self.grad_basis)

    def element_means(self, full: np.ndarray) -> np.ndarray:
        """Barycentric value of the P1 interpolant on each element."""
        return full[self.elements].mean(axis=1)

    def scatter_vertex_contributions(self, contrib: np.ndarray) -> np.ndarray:
        """Sum per-element per-vertex contributions (E, dim+1) into vertices."""
        return np.bincount(
            self.elements.ravel(),
            weights=contrib.ravel(),
            minlength=self.nodes.shape[0],
        )

    def critical_exponent(self, p: float) -> float:
        """Sobolev exponent limiting the embeddings on this domain."""
        if p < self.dim:
            return self.dim * p / (self.dim - p)
        return math.inf


def build_mesh(dim: int, n: int) -> Mesh:
    """Uniform mesh with ``n`` cells per axis.

    1D: ``n`` segments on (0,1).  2D: each of the n*n squares is bisected
    along its main diagonal into two right triangles.
    """
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if n < 2:
        raise ValueError(f"mesh resolution must satisfy n >= 2, got {n}")
    h = 1.0 / n

    if dim == 1:
        nodes = np.linspace(0.0, 1.0, n + 1)[:, None]
        elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
        interior = np.arange(1, n)
        measure = h
        grad_basis = np.empty((n, 2, 1))
        grad_basis[:, 0, 0] = -1.0 / h
        grad_basis[:, 1, 0] = 1.0 / h
        barycenters = nodes[elements].mean(axis=1)
    else:
        xs = np.linspace(0.0, 1.0, n + 1)
        gx, gy = np.meshgrid(xs, xs, indexing="xy")
        nodes = np.column_stack([gx.ravel(), gy.ravel()])

        def vid(i, j):
            return j * (n + 1) + i

        tris = []
        for j in range(n):
            for i in range(n):
                a, b = vid(i, j), vid(i + 1, j)
                c, d = vid(i, j + 1), vid(i + 1, j + 1)
                tris.append((a, b, d))
                tris.append((a, d, c))
        elements = np.asarray(tris, dtype=int)

        ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="xy")
        interior_mask = (ii > 0) & (ii < n) & (jj > 0) & (jj < n)
        interior = np.flatnonzero(interior_mask.ravel())
        measure = h * h / 2.0

        pts = nodes[elements]                      # (E, 3, 2)
        e01 = pts[:, 1] - pts[:, 0]
        e02 = pts[:, 2] - pts[:, 0]
        two_area = e01[:, 0] * e02[:, 1] - e01[:, 1] * e02[:, 0]
        if not np.all(two_area > 0):
            raise AssertionError("triangle orientation must be positive")
        grad_basis = np.empty((elements.shape[0], 3, 2))
        for k in range(3):
            edge = pts[:, (k + 2) % 3] - pts[:, (k + 1) % 3]
            grad_basis[:, k, 0] = -edge[:, 1] / two_area
            grad_basis[:, k, 1] = edge[:, 0] / two_area
        barycenters = pts.mean(axis=1)

    ones = np.full(elements.shape, measure / elements.shape[1])
    lumped = np.bincount(elements.ravel(), weights=ones.ravel(),
                         minlength=nodes.shape[0])
    return Mesh(dim=dim, n=n, nodes=nodes, elements=elements,
                interior=interior, measure=measure, grad_basis=grad_basis,
                barycenters=barycenters, lumped=lumped)


@dataclass
class DiscreteFunction:
    """Nodal values of a P1 function with zero boundary trace."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if v.shape != (self.mesh.n_dof,):
            raise ValueError(
                f"expected {self.mesh.n_dof} interior values, got shape {v.shape}"
            )
        self.values = v

    @classmethod
    def zeros(cls, mesh: Mesh) -> "DiscreteFunction":
        return cls(mesh, np.zeros(mesh.n_dof))

    @classmethod
    def interpolate(cls, mesh: Mesh, fn) -> "DiscreteFunction":
        """Nodal interpolant of ``fn(x)`` (1D) or ``fn(x, y)`` (2D)."""
        pts = mesh.nodes[mesh.interior]
        if mesh.dim == 1:
            vals = fn(pts[:, 0])
        else:
            vals = fn(pts[:, 0], pts[:, 1])
        return cls(mesh, np.asarray(vals, dtype=float))

    def full_values(self) -> np.ndarray:
        return self.mesh.full_values(self.values)

    def sup_norm(self) -> float:
        """Max of |u| over the closed domain (the trace contributes 0)."""
        return float(np.max(np.abs(self.values), initial=0.0))

    def copy(self) -> "DiscreteFunction":
        return DiscreteFunction(self.mesh, self.values.copy())


def _norm_and_grad(mesh: Mesh, values: np.ndarray, ell: float):
    w = mesh.dof_weights
    av = np.abs(values)
    with np.errstate(over="ignore"):
        q = float(w @ av**ell)
        norm = q ** (1.0 / ell)
    if norm == 0.0 or not np.isfinite(norm):
        return norm, np.zeros_like(values)
    with np.errstate(over="ignore", invalid="ignore"):
        grad = q ** (1.0 / ell - 1.0) * w * av ** (ell - 1.0) * np.sign(values)
    return norm, grad


def _seminorm_and_grad(mesh: Mesh, values: np.ndarray, p: float):
    full = mesh.full_values(values)
    g = mesh.element_gradients(full)
    gn = np.sqrt(np.einsum("ed,ed->e", g, g))
    with np.errstate(over="ignore"):
        sp = mesh.measure * float(np.sum(gn**p))
        semi = sp ** (1.0 / p)
    if semi == 0.0 or not np.isfinite(semi):
        return semi, np.zeros_like(values)
    # |g|^(p-2) g -> 0 as g -> 0 for p > 1, so masking the zero case is exact
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        coef = np.where(gn > 0.0, gn ** (p - 2.0), 0.0)
    flux = mesh.measure * coef[:, None] * g
    per_vertex = np.einsum("ed,ekd->ek", flux, mesh.grad_basis)
    grad_full = mesh.scatter_vertex_contributions(per_vertex)
    return semi, semi ** (1.0 - p) * grad_full[mesh.interior]


def norm_lp(u: DiscreteFunction, ell: float) -> float:
    """Lebesgue ell-norm by the vertex rule (exact for constants)."""
    if ell < 1.0:
        raise ValueError(f"ell must be >= 1, got {ell}")
    return _norm_and_grad(u.mesh, u.values, ell)[0]


def seminorm_w1p(u: DiscreteFunction, p: float) -> float:
    """Gradient p-seminorm (sum of |grad u|^p times element measures)^(1/p)."""
    if p <= 1.0:
        raise ValueError(f"p must exceed 1, got {p}")
    return _seminorm_and_grad(u.mesh, u.values, p)[0]


def _stiffness_solver(mesh: Mesh):
    """Factorized P1 stiffness operator on the interior nodes.

    Used as the metric for the ratio ascent: preconditioning the gradient by
    the inverse stiffness turns the ascent into an inverse-iteration-like
    method with a resolution-independent rate.
    """
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    nv = mesh.elements.shape[1]
    gb = mesh.grad_basis
    rows, cols, data = [], [], []
    for i in range(nv):
        for j in range(nv):
            rows.append(mesh.elements[:, i])
            cols.append(mesh.elements[:, j])
            data.append(mesh.measure
                        * np.einsum("ed,ed->e", gb[:, i, :], gb[:, j, :]))
    v_count = mesh.nodes.shape[0]
    mat = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(v_count, v_count),
    ).tocsc()
    ii = mesh.interior
    return spla.factorized(mat[np.ix_(ii, ii)].tocsc())


def _ratio_ascend(mesh, p, ell, v0, solve_k, max_iter, ftol):
    """Projected gradient ascent on log(|u|_ell / |grad u|_p).

    The objective is scale invariant; iterates are renormalized to unit
    seminorm after each accepted step.  The ascent direction is the gradient
    in the discrete H1 metric and the step length is chosen by a halving and
    doubling hill climb on the objective, so each step is near optimal.
    """
    def value(vals):
        nv, _ = _norm_and_grad(mesh, vals, ell)
        sv, _ = _seminorm_and_grad(mesh, vals, p)
        if nv <= 0.0 or sv <= 0.0 or not np.isfinite(nv) or not np.isfinite(sv):
            return -math.inf
        return math.log(nv) - math.log(sv)

    semi0, _ = _seminorm_and_grad(mesh, v0, p)
    if semi0 == 0.0:
        return -math.inf, v0, False
    v = v0 / semi0
    nv, gn = _norm_and_grad(mesh, v, ell)
    sv, gs = _seminorm_and_grad(mesh, v, p)
    f = math.log(nv) - math.log(sv)
    grad = gn / nv - gs / sv
    alpha = 1.0
    converged = False
    for _ in range(max_iter):
        d = solve_k(grad)
        gd = float(grad @ d)
        if gd <= 1e-30:
            converged = True
            break
        a, fa = alpha, value(v + alpha * d)
        fup = value(v + 2.0 * a * d)
        if fup > fa:
            a, fa = 2.0 * a, fup
            for _ in range(40):
                fup = value(v + 2.0 * a * d)
                if fup <= fa:
                    break
                a, fa = 2.0 * a, fup
        else:
            for _ in range(60):
                fdn = value(v + 0.5 * a * d)
                if fdn <= fa and fa > f:
                    break
                a, fa = 0.5 * a, fdn
                if fa > f and a < 1e-12:
                    break
        if fa <= f:
            converged = gd <= 1e-12 * max(1.0, abs(f))
            break
        trial = v + a * d
        st, _ = _seminorm_and_grad(mesh, trial, p)
        v = trial / st
        nv, gn = _norm_and_grad(mesh, v, ell)
        sv, gs = _seminorm_and_grad(mesh, v, p)
        f_new = math.log(nv) - math.log(sv)
        grad = gn / nv - gs / sv
        alpha = a
        if abs(f_new - f) <= ftol * max(1.0, abs(f)):
            f = f_new
            converged = True
            break
        f = f_new
    return math.exp(f), v, converged


def estimate_embedding_constant(mesh: Mesh, p: float, ell: float, *,
                                n_starts: int = 10, n_probe: int = 200,
                                max_iter: int = 600, tol: float = 1e-13,
                                seed: int = 0) -> float:
    """Largest ratio |u|_ell / |grad u|_p over this discrete space.

    Maximized by projected gradient ascent from ``n_starts`` random starts
    plus the best of ``n_probe`` random candidates; the returned value bounds
    the ratio of every discrete function on this mesh up to the ascent
    tolerance.  Warns when no ascent flagged convergence.
    """
    if p <= 1.0:
        raise ValueError(f"p must exceed 1, got {p}")
    if not (1.0 <= ell < mesh.critical_exponent(p)):
        raise ValueError(
            f"ell must lie in [1, {mesh.critical_exponent(p)}), got {ell}"
        )
    rng = np.random.default_rng(seed)
    ndof = mesh.n_dof
    solve_k = _stiffness_solver(mesh)

    probes = rng.standard_normal((n_probe, ndof))
    ratios = []
    for row in probes:
        nv, _ = _norm_and_grad(mesh, row, ell)
        sv, _ = _seminorm_and_grad(mesh, row, p)
        ratios.append(nv / sv if sv > 0 else 0.0)
    best = float(np.max(ratios))
    starts = [probes[int(np.argmax(ratios))]]
    starts += [rng.standard_normal(ndof) for _ in range(n_starts)]

    any_converged = False
    for v0 in starts:
        val, _, conv = _ratio_ascend(mesh, p, ell, v0, solve_k, max_iter, tol)
        any_converged = any_converged or conv
        best = max(best, val)
    if not any_converged:
        warnings.warn(
            "embedding-constant ascent did not converge; reporting best found",
            RuntimeWarning,
        )
    return best
