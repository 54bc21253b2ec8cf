"""Discrete energies and their exact nodal gradients.

Four functionals share one assembly: the full two-power energy, its
positive-part and negative-part restrictions, and the truncated version in
which the superlinear term is damped by the smooth cutoff evaluated at the
gradient seminorm.  Gradients differentiate the quadratures exactly,
including the cutoff chain-rule term, so finite differences of the energy
reproduce them to rounding accuracy.

All reductions are plain ordered numpy sums: evaluation is bitwise
deterministic across runs, which the reproducibility tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import DiscreteFunction, Mesh
from .problem import ProblemSpec
from .truncation import TruncationProfile, tau_eval, tau_prime_eval

__all__ = [
    "EnergyVariant",
    "energy",
    "gradient",
    "energy_and_gradient",
    "residual_norm",
]


@dataclass(frozen=True)
class EnergyVariant:
    """Selects the nonlinearity branch and the optional truncation.

    sign "none" uses |u|^(q-1) sgn u type terms, "plus"/"minus" the
    positive/negative-part restrictions.  A truncation profile composes with
    any sign, which the signed solve pipeline relies on.
    """

    sign: str = "none"
    truncation: TruncationProfile | None = None

    def __post_init__(self):
        if self.sign not in ("none", "plus", "minus"):
            raise ValueError(f"sign must be none/plus/minus, got {self.sign!r}")

    @classmethod
    def full(cls) -> "EnergyVariant":
        return cls()

    @classmethod
    def plus(cls) -> "EnergyVariant":
        return cls(sign="plus")

    @classmethod
    def minus(cls) -> "EnergyVariant":
        return cls(sign="minus")

    @classmethod
    def truncated(cls, profile: TruncationProfile, sign: str = "none") -> "EnergyVariant":
        return cls(sign=sign, truncation=profile)

    @property
    def tag(self) -> str:
        base = {"none": "full", "plus": "plus", "minus": "minus"}[self.sign]
        if self.truncation is None:
            return base
        return "truncated" if base == "full" else f"truncated_{base}"


def _power_terms(values: np.ndarray, expo: float, sign: str, want_slope: bool):
    """Pointwise power term of the selected branch and its derivative.

    The derivative of |t|^e at 0 is taken as 0, the continuous limit for
    e > 1; same for the one-sided branches.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        if sign == "none":
            av = np.abs(values)
            pw = av**expo
            slope = expo * av ** (expo - 1.0) * np.sign(values) if want_slope else None
        elif sign == "plus":
            vp = np.maximum(values, 0.0)
            pw = vp**expo
            slope = expo * vp ** (expo - 1.0) if want_slope else None
        else:
            vm = np.maximum(-values, 0.0)
            pw = vm**expo
            slope = -expo * vm ** (expo - 1.0) if want_slope else None
    return pw, slope


def _check_mesh(spec: ProblemSpec, mesh: Mesh):
    if mesh.dim != spec.dim or mesh.n != spec.n:
        raise ValueError(
            f"function mesh ({mesh.dim}, {mesh.n}) does not match the "
            f"problem spec ({spec.dim}, {spec.n})"
        )


def _assemble(spec: ProblemSpec, mesh: Mesh, values: np.ndarray,
              variant: EnergyVariant, want_grad: bool):
    """Shared assembly; returns (energy, gradient or None, seminorm)."""
    lam = spec.require_lambda()
    p, q, s = spec.p, spec.q, spec.s
    family = spec.family

    full = mesh.full_values(values)
    g = mesh.element_gradients(full)             # (E, dim)
    ubar = mesh.element_means(full)              # (E,)
    gn = np.sqrt(np.einsum("ed,ed->e", g, g))
    with np.errstate(over="ignore"):
        semi_p = mesh.measure * float(np.sum(gn**p))
    semi = semi_p ** (1.0 / p)

    a_vals = family.A(mesh.barycenters, ubar, g)
    e_grad_part = mesh.measure * float(np.sum(a_vals))

    w = mesh.dof_weights
    pw_q, sl_q = _power_terms(values, q, variant.sign, want_grad)
    pw_s, sl_s = _power_terms(values, s, variant.sign, want_grad)
    mass_q = float(w @ pw_q)
    mass_s = float(w @ pw_s)

    if variant.truncation is None:
        tau = 1.0
    else:
        tau = tau_eval(variant.truncation, semi)

    total = e_grad_part - lam / q * mass_q - tau / s * mass_s
    if not want_grad:
        return total, None, semi

    a_flux = family.a(mesh.barycenters, ubar, g)   # (E, dim)
    a_t = family.A_t(mesh.barycenters, ubar, g)    # (E,)
    nverts = mesh.elements.shape[1]
    contrib = mesh.measure * (np.einsum("ed,ekd->ek", a_flux, mesh.grad_basis)
                              + a_t[:, None] / nverts)
    grad = mesh.scatter_vertex_contributions(contrib)[mesh.interior]
    grad = grad - lam / q * w * sl_q - tau / s * w * sl_s

    if variant.truncation is not None:
        tau_p = tau_prime_eval(variant.truncation, semi)
        if tau_p != 0.0:
            # the cutoff only varies on (r0, r1), so the seminorm is bounded
            # away from zero wherever this term activates
            assert semi > 0.0
            with np.errstate(divide="ignore", invalid="ignore"):
                coef = np.where(gn > 0.0, gn ** (p - 2.0), 0.0)
            flux = mesh.measure * coef[:, None] * g
            per_vertex = np.einsum("ed,ekd->ek", flux, mesh.grad_basis)
            d_semi = (semi ** (1.0 - p)
                      * mesh.scatter_vertex_contributions(per_vertex)[mesh.interior])
            grad = grad - mass_s / s * tau_p * d_semi
    return total, grad, semi


def energy(spec: ProblemSpec, u: DiscreteFunction, variant: EnergyVariant) -> float:
    """Quadrature value of the selected functional at u."""
    _check_mesh(spec, u.mesh)
    return _assemble(spec, u.mesh, u.values, variant, want_grad=False)[0]


def gradient(spec: ProblemSpec, u: DiscreteFunction,
             variant: EnergyVariant) -> np.ndarray:
    """Exact partial derivatives of the energy w.r.t. the nodal values.

    Entry i is the pairing of the differential with hat function i; for the
    truncated variant this includes the cutoff chain-rule term.
    """
    _check_mesh(spec, u.mesh)
    return _assemble(spec, u.mesh, u.values, variant, want_grad=True)[1]


def energy_and_gradient(spec: ProblemSpec, u: DiscreteFunction,
                        variant: EnergyVariant):
    """(energy, gradient, gradient seminorm) in a single assembly pass."""
    _check_mesh(spec, u.mesh)
    return _assemble(spec, u.mesh, u.values, variant, want_grad=True)


def residual_norm(spec: ProblemSpec, u: DiscreteFunction,
                  variant: EnergyVariant) -> float:
    """Max-norm of the gradient scaled by the hat-function masses.

    Dividing entry i by the integral of hat i makes the value scale like a
    pointwise strong-form residual, independent of the mesh resolution.
    """
    g = gradient(spec, u, variant)
    return scaled_residual(u.mesh, g)


def scaled_residual(mesh: Mesh, grad: np.ndarray) -> float:
    return float(np.max(np.abs(grad) / mesh.dof_weights, initial=0.0))
