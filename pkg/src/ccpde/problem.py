"""Problem instances: Lagrangian integrand families and their structural constants.

A problem couples the domain and exponents (p, q, s), the parameter of the
sublinear term, and a Lagrangian family A(x, t, xi) whose partial derivatives
a = grad_xi A and A_t = dA/dt drive the weak form.  The structural constants
that the solver machinery consumes (coercivity, gradient control, lower-order
control, small-state bound, superlinearity margin) are certified numerically
by sampling on a documented box and refining the worst samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = [
    "LagrangianFamily",
    "PLaplacian",
    "WeightedPLaplacian",
    "make_family",
    "evaluate_lagrangian",
    "ProblemSpec",
    "SamplingPlan",
    "HypothesisReport",
    "check_hypotheses",
]


def _mag(xi):
    with np.errstate(over="ignore"):
        return np.linalg.norm(np.asarray(xi, dtype=float), axis=-1)


class LagrangianFamily:
    """Pointwise integrand A(x, t, xi) with its derivatives.

    Evaluators are vectorized over a leading batch axis; ``x`` may be None
    for x-independent families.  ``a`` must be the xi-gradient of A and
    ``A_t`` the t-derivative (checked against finite differences in tests).
    """

    id: str = "abstract"
    p: float
    params: dict

    def A(self, x, t, xi):
        raise NotImplementedError

    def a(self, x, t, xi):
        raise NotImplementedError

    def A_t(self, x, t, xi):
        raise NotImplementedError


class PLaplacian(LagrangianFamily):
    """A = |xi|^p / p, the p-Dirichlet integrand."""

    id = "p_laplacian"

    def __init__(self, p: float):
        if p <= 1.0:
            raise ValueError(f"p must exceed 1, got {p}")
        self.p = float(p)
        self.params = {}

    def A(self, x, t, xi):
        r = _mag(xi)
        with np.errstate(over="ignore"):
            return r**self.p / self.p

    def a(self, x, t, xi):
        xi = np.asarray(xi, dtype=float)
        r = _mag(xi)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            f = np.where(r > 0.0, r ** (self.p - 2.0), 0.0)
        return f[..., None] * xi

    def A_t(self, x, t, xi):
        shape = np.broadcast(np.asarray(t, dtype=float), _mag(xi)).shape
        return np.zeros(shape)


class WeightedPLaplacian(LagrangianFamily):
    """A = (1 + kappa t^2/(1+t^2)) |xi|^p / p, a bounded state-dependent weight."""

    id = "weighted_p_laplacian"

    def __init__(self, p: float, kappa: float = 0.5):
        if p <= 1.0:
            raise ValueError(f"p must exceed 1, got {p}")
        if kappa < 0.0:
            raise ValueError(f"kappa must be nonnegative, got {kappa}")
        self.p = float(p)
        self.kappa = float(kappa)
        self.params = {"kappa": self.kappa}

    def _weight(self, t):
        t = np.asarray(t, dtype=float)
        return 1.0 + self.kappa * t * t / (1.0 + t * t)

    def A(self, x, t, xi):
        r = _mag(xi)
        with np.errstate(over="ignore"):
            return self._weight(t) * r**self.p / self.p

    def a(self, x, t, xi):
        xi = np.asarray(xi, dtype=float)
        r = _mag(xi)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            f = np.where(r > 0.0, r ** (self.p - 2.0), 0.0)
        return (self._weight(t) * f)[..., None] * xi

    def A_t(self, x, t, xi):
        t = np.asarray(t, dtype=float)
        r = _mag(xi)
        with np.errstate(over="ignore"):
            dw = 2.0 * t / (1.0 + t * t) ** 2
            return (self.kappa / self.p) * dw * r**self.p


_FAMILIES = {
    PLaplacian.id: PLaplacian,
    WeightedPLaplacian.id: WeightedPLaplacian,
}


def make_family(family_id: str, params: dict | None, p: float) -> LagrangianFamily:
    """Instantiate a built-in family from its string id and parameter map."""
    try:
        cls = _FAMILIES[family_id]
    except KeyError:
        known = ", ".join(sorted(_FAMILIES))
        raise ValueError(f"unknown family id {family_id!r} (known: {known})")
    return cls(p, **(params or {}))


def evaluate_lagrangian(family: LagrangianFamily, x, t: float, xi):
    """Evaluate (A, a, A_t) at a single point, rejecting non-finite output."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    a_val = family.A(x, t, xi)
    a_vec = family.a(x, t, xi)
    at_val = family.A_t(x, t, xi)
    out = (float(a_val), np.asarray(a_vec, dtype=float), float(at_val))
    if not (np.isfinite(out[0]) and np.all(np.isfinite(out[1]))
            and np.isfinite(out[2])):
        raise ValueError(
            f"family {family.id!r} produced non-finite output at t={t}, xi={xi}"
        )
    return out


@dataclass(frozen=True)
class ProblemSpec:
    """Instance data for the two-power Dirichlet problem on (0,1)^dim.

    ``lam`` may be None while unresolved (e.g. configured as a fraction of
    the truncation threshold); every energy evaluation requires it set.
    """

    dim: int
    n: int
    p: float
    q: float
    s: float
    lam: float | None
    family: LagrangianFamily
    embedding_mode: str = "discrete"      # "discrete" or "user"
    c_q: float | None = None              # user-supplied embedding constants
    c_s: float | None = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 2:
            raise ValueError(f"mesh resolution must satisfy n >= 2, got {self.n}")
        pstar = self.critical_exponent
        if not (1.0 < self.q < self.p < self.s < pstar):
            raise ValueError(
                "exponent ordering violated: require 1 < q < p < s < p* "
                f"(q={self.q}, p={self.p}, s={self.s}, p*={pstar})"
            )
        if self.lam is not None and not self.lam > 0.0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        fam_p = getattr(self.family, "p", None)
        if fam_p is not None and abs(fam_p - self.p) > 1e-12:
            raise ValueError(
                f"family exponent {fam_p} differs from spec exponent {self.p}"
            )
        if self.embedding_mode not in ("discrete", "user"):
            raise ValueError(
                f"embedding_mode must be 'discrete' or 'user', got {self.embedding_mode!r}"
            )
        if self.embedding_mode == "user":
            if self.c_q is None or self.c_s is None or self.c_q <= 0 or self.c_s <= 0:
                raise ValueError(
                    "user embedding mode requires positive constants c_q and c_s"
                )

    @property
    def critical_exponent(self) -> float:
        if self.p < self.dim:
            return self.dim * self.p / (self.dim - self.p)
        return math.inf

    def with_lambda(self, lam: float) -> "ProblemSpec":
        return replace(self, lam=float(lam))

    def require_lambda(self) -> float:
        if self.lam is None:
            raise ValueError("lambda is unresolved on this problem spec")
        return self.lam


@dataclass(frozen=True)
class SamplingPlan:
    """Box and budget for the numerical certification of the constants.

    The default box |t| <= 10, |xi| <= 10 is meant as ten times the expected
    solution scales; widen it for problems with larger fields.
    """

    dim: int = 1
    t_max: float = 10.0
    xi_max: float = 10.0
    n_random: int = 20000
    n_t_grid: int = 20001
    n_pairs: int = 2000
    seed: int = 0


@dataclass(frozen=True)
class HypothesisReport:
    """Certified structural constants of a family over the sampled box.

    ``violations`` pairs a check id with the witness point (x, t, xi) where
    it failed.  Check ids: coercivity, gradient_control, lower_order_control,
    small_t_bound, strict_monotonicity, superlinearity_margin.
    """

    alpha1: float       # inf A / |xi|^p
    eta1: float         # sup A / (a . xi)
    eta2: float         # sup A / |xi|^p over |t| <= delta
    delta: float
    alpha2: float       # inf (a . xi + A_t t) / (a . xi)
    alpha3: float       # inf (s A - a . xi - A_t t) / (a . xi)
    mp_exponent: float  # s - alpha3 / eta1
    violations: tuple = ()

    @property
    def minima_ok(self) -> bool:
        """True when no check needed by the minimization pipeline failed."""
        return not any(v[0] != "superlinearity_margin" for v in self.violations)

    @property
    def mountain_pass_ok(self) -> bool:
        """True when every check failed nowhere and the margin is positive."""
        return not self.violations and self.alpha3 > 0.0


def _ratio_values(kind, family, p, s, x, t, xi):
    """One of the certified ratios, vectorized over the batch axis."""
    a_val = family.A(x, t, xi)
    if kind == "coercivity":
        r = _mag(xi)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return a_val / r**p
    axi = np.einsum("...d,...d->...", family.a(x, t, xi), np.asarray(xi, float))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if kind == "gradient_control":
            return a_val / axi
        if kind == "lower_order_control":
            return (axi + family.A_t(x, t, xi) * t) / axi
        if kind == "superlinearity_margin":
            return (s * a_val - axi - family.A_t(x, t, xi) * t) / axi
    raise ValueError(kind)


def _refine_over_t(kind, family, p, s, x_w, xi_w, t_w, lo, hi, maximize):
    """Sharpen an extremum over the state variable with bounded Brent search.

    The grid puts the worst sample inside the right basin; this polishes the
    extremal value to near machine accuracy, which the growth-bound checks
    downstream rely on.
    """
    def f(t):
        val = _ratio_values(kind, family, p, s, x_w[None, :],
                            np.asarray([t]), xi_w[None, :])[0]
        return -val if maximize else val

    span = hi - lo
    a = max(lo, t_w - 0.02 * span)
    b = min(hi, t_w + 0.02 * span)
    best_t, best = t_w, f(t_w)
    if b > a:
        res = minimize_scalar(f, bounds=(a, b), method="bounded",
                              options={"xatol": 1e-11})
        if np.isfinite(res.fun) and res.fun < best:
            best_t, best = float(res.x), float(res.fun)
    return (-best if maximize else best), best_t


def _refine_over_scale(kind, family, p, s, x_w, xi_w, t_w, maximize):
    """Same polish along the gradient magnitude (log scale, factor 10 window)."""
    base = _mag(xi_w)
    if base <= 0.0:
        return (-np.inf if maximize else np.inf), xi_w

    def f(u):
        xi = math.exp(u) * xi_w
        val = _ratio_values(kind, family, p, s, x_w[None, :],
                            np.asarray([t_w]), xi[None, :])[0]
        return -val if maximize else val

    best_u, best = 0.0, f(0.0)
    res = minimize_scalar(f, bounds=(-math.log(10.0), math.log(10.0)),
                          method="bounded", options={"xatol": 1e-11})
    if np.isfinite(res.fun) and res.fun < best:
        best_u, best = float(res.x), float(res.fun)
    return (-best if maximize else best), math.exp(best_u) * xi_w


def _extremize(kind, family, p, s, xs, ts, xis, mask, *, maximize, t_lo, t_hi):
    """Extremum of a ratio over the sample cloud, refined around the witness."""
    vals = _ratio_values(kind, family, p, s, xs, ts, xis)
    vals = np.where(mask, vals, -np.inf if maximize else np.inf)
    idx = int(np.argmax(vals) if maximize else np.argmin(vals))
    best = float(vals[idx])
    x_w, t_w, xi_w = xs[idx], float(ts[idx]), xis[idx]
    val_t, t_ref = _refine_over_t(kind, family, p, s, x_w, xi_w, t_w,
                                  t_lo, t_hi, maximize)
    if (val_t > best) if maximize else (val_t < best):
        best, t_w = val_t, t_ref
    val_m, xi_ref = _refine_over_scale(kind, family, p, s, x_w, xi_w, t_w,
                                       maximize)
    if (val_m > best) if maximize else (val_m < best):
        best, xi_w = val_m, xi_ref
    witness = (tuple(np.atleast_1d(x_w).tolist()), t_w,
               tuple(np.atleast_1d(xi_w).tolist()))
    return best, witness


def _sample_cloud(plan: SamplingPlan, rng):
    d = plan.dim
    xs, ts, xis = [], [], []
    t_grid = np.linspace(-plan.t_max, plan.t_max, plan.n_t_grid)
    for magnitude in (plan.xi_max, 1.0, 1e-2, 1e-5):
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        xs.append(rng.random((t_grid.size, d)))
        ts.append(t_grid.copy())
        xis.append(np.tile(magnitude * direction, (t_grid.size, 1)))
    m = plan.n_random
    dirs = rng.standard_normal((m, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    mags = 10.0 ** rng.uniform(-6.0, math.log10(plan.xi_max), m)
    xs.append(rng.random((m, d)))
    ts.append(rng.uniform(-plan.t_max, plan.t_max, m))
    xis.append(mags[:, None] * dirs)
    return np.vstack(xs), np.concatenate(ts), np.vstack(xis)


def check_hypotheses(family: LagrangianFamily, p: float, s: float,
                     plan: SamplingPlan | None = None) -> HypothesisReport:
    """Certify the structural constants of a family by sampling.

    Infima/suprema are taken over >= 10^4 points of a documented (x, t, xi)
    box (gradients reaching down to near zero, the state grid containing 0)
    and sharpened by local scalar searches at the worst samples.  Each
    nonpositive extremum is reported as a violation with its witness point.
    """
    plan = plan or SamplingPlan()
    rng = np.random.default_rng(plan.seed)
    xs, ts, xis = _sample_cloud(plan, rng)

    a_all = family.A(xs, ts, xis)
    a_vec = family.a(xs, ts, xis)
    at_all = family.A_t(xs, ts, xis)
    if not (np.all(np.isfinite(a_all)) and np.all(np.isfinite(a_vec))
            and np.all(np.isfinite(at_all))):
        raise ValueError(
            f"family {family.id!r} produced non-finite samples; "
            "invalid parameterization"
        )

    xin = _mag(xis)
    mask = xin >= 1e-12  # ratios against a . xi are 0/0 below this
    axi = np.einsum("md,md->m", a_vec, xis)
    violations = []

    bad_pairing = mask & (axi <= 0.0)
    if np.any(bad_pairing):
        idx = int(np.argmin(np.where(bad_pairing, axi, np.inf)))
        violations.append(("gradient_control",
                           (tuple(xs[idx].tolist()), float(ts[idx]),
                            tuple(xis[idx].tolist()))))
    ratio_mask = mask & (axi > 0.0)

    kw = dict(t_lo=-plan.t_max, t_hi=plan.t_max)
    alpha1, w1 = _extremize("coercivity", family, p, s, xs, ts, xis, mask,
                            maximize=False, **kw)
    eta1, w3 = _extremize("gradient_control", family, p, s, xs, ts, xis,
                          ratio_mask, maximize=True, **kw)
    alpha2, w4 = _extremize("lower_order_control", family, p, s, xs, ts, xis,
                            ratio_mask, maximize=False, **kw)
    alpha3, w7 = _extremize("superlinearity_margin", family, p, s, xs, ts,
                            xis, ratio_mask, maximize=False, **kw)

    # small-state bound: largest delta on a halving grid with a finite sup
    delta, eta2 = 0.0, math.inf
    for cand in (1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125):
        sel = mask & (np.abs(ts) <= cand)
        if not np.any(sel):
            continue
        sup, _ = _extremize("coercivity", family, p, s, xs, ts, xis, sel,
                            maximize=True, t_lo=-cand, t_hi=cand)
        if np.isfinite(sup):
            delta, eta2 = cand, sup
            break

    # strict monotonicity of a(x, t, .) on well-separated random pairs
    n2 = plan.n_pairs
    x2 = rng.random((n2, plan.dim))
    t2 = rng.uniform(-plan.t_max, plan.t_max, n2)
    def draw_xi():
        d2 = rng.standard_normal((n2, plan.dim))
        d2 /= np.linalg.norm(d2, axis=1, keepdims=True)
        return 10.0 ** rng.uniform(-3.0, math.log10(plan.xi_max), n2)[:, None] * d2
    xi_a, xi_b = draw_xi(), draw_xi()
    sep = _mag(xi_a - xi_b) >= 1e-8
    prod = np.einsum("md,md->m", family.a(x2, t2, xi_a) - family.a(x2, t2, xi_b),
                     xi_a - xi_b)
    bad = sep & (prod <= 0.0)
    if np.any(bad):
        idx = int(np.argmin(np.where(bad, prod, np.inf)))
        violations.append(("strict_monotonicity",
                           (tuple(x2[idx].tolist()), float(t2[idx]),
                            tuple(xi_a[idx].tolist()))))

    for name, value, witness in (
        ("coercivity", alpha1, w1),
        ("gradient_control", eta1, w3),
        ("lower_order_control", alpha2, w4),
        ("small_t_bound", eta2, None),
        ("superlinearity_margin", alpha3, w7),
    ):
        if not np.isfinite(value) or value <= 0.0:
            violations.append((name, witness))

    mp_exponent = s - alpha3 / eta1 if eta1 > 0.0 else math.nan
    return HypothesisReport(
        alpha1=float(alpha1), eta1=float(eta1), eta2=float(eta2),
        delta=float(delta), alpha2=float(alpha2), alpha3=float(alpha3),
        mp_exponent=float(mp_exponent), violations=tuple(violations),
    )
