import numpy as np
import pytest
from hypothesis import given, strategies as st

from ccpde import (
    DiscreteFunction,
    EnergyVariant,
    PLaplacian,
    ProblemSpec,
    TruncationProfile,
    build_mesh,
    energy,
    energy_and_gradient,
    gradient,
    residual_norm,
    seminorm_w1p,
)

MESH = build_mesh(1, 24)
SPEC = ProblemSpec(dim=1, n=24, p=2.0, q=1.5, s=4.0, lam=0.7,
                   family=PLaplacian(2.0))
VARIANTS = [EnergyVariant.full(), EnergyVariant.plus(), EnergyVariant.minus()]


def random_function(seed, mesh=MESH, low=-2.0, high=2.0):
    vals = np.random.default_rng(seed).uniform(low, high, mesh.n_dof)
    return DiscreteFunction(mesh, vals)


def test_zero_function_has_zero_energy_all_variants():
    u0 = DiscreteFunction.zeros(MESH)
    tp = TruncationProfile(1.0, 2.0)
    for variant in VARIANTS + [EnergyVariant.truncated(tp)]:
        assert energy(SPEC, u0, variant) == 0.0
        assert np.all(gradient(SPEC, u0, variant) == 0.0)
    assert residual_norm(SPEC, u0, EnergyVariant.full()) == 0.0


def test_plus_variant_reduces_to_gradient_part_on_nonpositive_u():
    rng = np.random.default_rng(1)
    vals = -np.abs(rng.uniform(0.1, 2.0, MESH.n_dof))
    u = DiscreteFunction(MESH, vals)
    e_plus = energy(SPEC, u, EnergyVariant.plus())
    # the positive-part terms vanish, leaving the pure p-Dirichlet quadrature
    g = MESH.element_gradients(u.full_values())
    a_part = MESH.measure * np.sum(np.abs(g[:, 0])**2) / 2.0
    assert e_plus == pytest.approx(a_part, rel=1e-14)
    assert e_plus >= 0.0
    # and the gradient is independent of the nonlinearity parameters
    other = ProblemSpec(dim=1, n=24, p=2.0, q=1.5, s=4.0, lam=33.0,
                        family=PLaplacian(2.0))
    assert np.array_equal(gradient(SPEC, u, EnergyVariant.plus()),
                          gradient(other, u, EnergyVariant.plus()))


def test_single_hat_energy_matches_hand_quadrature():
    mesh = build_mesh(1, 2)
    spec = ProblemSpec(dim=1, n=2, p=2.0, q=1.5, s=4.0, lam=0.1,
                       family=PLaplacian(2.0))
    u = DiscreteFunction(mesh, np.array([1.0]))
    # slopes +-2 on the two half cells, vertex rule gives mass 1/2 to the peak
    a_part = 0.5 * (0.5 * 2.0**2) * 2
    q_mass = 0.5 * 1.0
    s_mass = 0.5 * 1.0
    expected = a_part - 0.1 / 1.5 * q_mass - 0.25 * s_mass
    assert energy(spec, u, EnergyVariant.full()) == pytest.approx(
        expected, abs=1e-15)


@pytest.mark.parametrize("variant_idx", range(4))
def test_gradient_matches_finite_differences(variant_idx):
    # absolute floor covers the rounding noise of the difference quotient
    rng = np.random.default_rng(17 + variant_idx)
    for _ in range(5):
        mag = rng.uniform(0.05, 2.0, MESH.n_dof)
        vals = mag * rng.choice([-1.0, 1.0], MESH.n_dof)
        u = DiscreteFunction(MESH, vals)
        semi = seminorm_w1p(u, 2.0)
        tp = TruncationProfile(0.7 * semi, 1.4 * semi)
        variant = (VARIANTS + [EnergyVariant.truncated(tp)])[variant_idx]
        g = gradient(SPEC, u, variant)
        atol = 4e-9 * (1.0 + abs(energy(SPEC, u, variant)))
        for i in range(0, MESH.n_dof, 3):
            h = 1e-6 * (1.0 + abs(vals[i]))
            vp, vm = vals.copy(), vals.copy()
            vp[i] += h
            vm[i] -= h
            fd = (energy(SPEC, DiscreteFunction(MESH, vp), variant)
                  - energy(SPEC, DiscreteFunction(MESH, vm), variant)) / (2 * h)
            assert abs(fd - g[i]) <= 1e-6 * max(abs(g[i]), abs(fd)) + atol


def test_truncated_coincides_with_full_inside_inner_radius():
    rng = np.random.default_rng(23)
    for _ in range(10):
        vals = rng.standard_normal(MESH.n_dof)
        u = DiscreteFunction(MESH, vals)
        semi = seminorm_w1p(u, 2.0)
        r0 = semi / rng.uniform(0.2, 0.999)
        tp = TruncationProfile(r0, 2.0 * r0)
        variant = EnergyVariant.truncated(tp)
        assert energy(SPEC, u, variant) == energy(SPEC, u, EnergyVariant.full())
        assert np.array_equal(gradient(SPEC, u, variant),
                              gradient(SPEC, u, EnergyVariant.full()))


def test_truncated_differs_beyond_outer_radius():
    rng = np.random.default_rng(29)
    vals = rng.standard_normal(MESH.n_dof) * 5.0
    u = DiscreteFunction(MESH, vals)
    semi = seminorm_w1p(u, 2.0)
    tp = TruncationProfile(0.1 * semi, 0.5 * semi)
    e_tr = energy(SPEC, u, EnergyVariant.truncated(tp))
    e_full = energy(SPEC, u, EnergyVariant.full())
    # the superlinear term is fully switched off past the outer radius
    s_mass = float(MESH.dof_weights @ np.abs(vals)**4)
    assert e_tr == pytest.approx(e_full + s_mass / 4.0, rel=1e-12)


@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_full_energy_even_and_signed_variants_mirror(seed):
    u = random_function(seed)
    minus_u = DiscreteFunction(MESH, -u.values)
    assert energy(SPEC, u, EnergyVariant.full()) == energy(
        SPEC, minus_u, EnergyVariant.full())
    assert energy(SPEC, minus_u, EnergyVariant.plus()) == energy(
        SPEC, u, EnergyVariant.minus())
    g_plus = gradient(SPEC, minus_u, EnergyVariant.plus())
    g_minus = gradient(SPEC, u, EnergyVariant.minus())
    assert np.array_equal(g_plus, -g_minus)


def test_energy_and_gradient_consistency():
    u = random_function(5)
    e_val, g, semi = energy_and_gradient(SPEC, u, EnergyVariant.full())
    assert e_val == energy(SPEC, u, EnergyVariant.full())
    assert np.array_equal(g, gradient(SPEC, u, EnergyVariant.full()))
    assert semi == pytest.approx(seminorm_w1p(u, 2.0))
    assert g.shape == (MESH.n_dof,)


def test_mesh_mismatch_rejected():
    other = DiscreteFunction.zeros(build_mesh(1, 12))
    with pytest.raises(ValueError):
        energy(SPEC, other, EnergyVariant.full())


def test_variant_validation_and_tags():
    with pytest.raises(ValueError):
        EnergyVariant(sign="positive")
    tp = TruncationProfile(1.0, 2.0)
    assert EnergyVariant.full().tag == "full"
    assert EnergyVariant.plus().tag == "plus"
    assert EnergyVariant.truncated(tp).tag == "truncated"
    assert EnergyVariant.truncated(tp, sign="minus").tag == "truncated_minus"
