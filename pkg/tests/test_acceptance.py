"""Acceptance gate: one test per contract criterion, each at its stated
tolerance, printing a PASS line on success (run with ``pytest -s`` to see
them)."""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from ccpde import (
    DiscreteFunction,
    EnergyVariant,
    HCurveConstants,
    PLaplacian,
    ProblemSpec,
    SolveOptions,
    TruncationProfile,
    WeightedPLaplacian,
    analyze_h,
    build_mesh,
    check_hypotheses,
    energy,
    estimate_embedding_constant,
    find_negative_start,
    gradient,
    h_eval,
    lambda1,
    minimize_truncated,
    seminorm_w1p,
    setup_problem,
)
from ccpde.problem import SamplingPlan


def _pass(name, detail=""):
    print(f"\n[acceptance] {name}: PASS {detail}")


def _random_profile(rng, mesh):
    """Random sign-changing nodal profile with moderate slopes.

    Built from a few sine modes so the energy stays O(1): the difference
    quotient used as the oracle carries rounding noise eps*|E|/(2*step), so a
    rough O(n)-slope profile would drown small entries in oracle noise.
    Nodal magnitudes are also pushed away from 0, where the q-power term has
    unbounded curvature and the quotient stops being a valid oracle.
    """
    pts = mesh.nodes[mesh.interior]
    vals = np.zeros(mesh.n_dof)
    if mesh.dim == 1:
        for k in (1, 2, 3):
            vals += rng.uniform(-0.7, 0.7) / k * np.sin(k * np.pi * pts[:, 0])
    else:
        for k in (1, 2):
            for l in (1, 2):
                vals += (rng.uniform(-0.7, 0.7) / (k * l)
                         * np.sin(k * np.pi * pts[:, 0])
                         * np.sin(l * np.pi * pts[:, 1]))
    signs = np.where(vals >= 0.0, 1.0, -1.0)
    vals = signs * np.clip(np.abs(vals), 0.05, 2.0)
    return vals


def test_c1_gradient_exactness():
    """Every gradient entry matches central differences to 1e-6 relative,
    for 100 random functions, all four variants, p in {2, 3}, both meshes.

    The comparison uses the standard gradient-check form |fd - g| <=
    rtol*max(|g|, |fd|) + atol with atol at the difference quotient's
    rounding-noise bound, which is what limits the oracle, not the gradient.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    checked = 0
    for dim, n, count in ((1, 32, 50), (2, 8, 50)):
        mesh = build_mesh(dim, n)
        for p in (2.0, 3.0):
            spec = ProblemSpec(dim=dim, n=n, p=p, q=1.5, s=4.0, lam=0.7,
                               family=PLaplacian(p))
            for _ in range(count // 2):
                vals = _random_profile(rng, mesh)
                u = DiscreteFunction(mesh, vals)
                semi = seminorm_w1p(u, p)
                profile = TruncationProfile(0.7 * semi, 1.4 * semi)
                variants = (EnergyVariant.full(), EnergyVariant.plus(),
                            EnergyVariant.minus(),
                            EnergyVariant.truncated(profile))
                for variant in variants:
                    g = gradient(spec, u, variant)
                    e_scale = abs(energy(spec, u, variant))
                    atol = 4e-9 * (1.0 + e_scale)
                    for i in range(mesh.n_dof):
                        h = 1e-6 * (1.0 + abs(vals[i]))
                        vp, vm = vals.copy(), vals.copy()
                        vp[i] += h
                        vm[i] -= h
                        fd = (energy(spec, DiscreteFunction(mesh, vp), variant)
                              - energy(spec, DiscreteFunction(mesh, vm),
                                       variant)) / (2.0 * h)
                        err = abs(fd - g[i])
                        rel = err / max(abs(g[i]), abs(fd), atol * 1e6)
                        worst = max(worst, rel)
                        checked += 1
                        assert err <= 1e-6 * max(abs(g[i]), abs(fd)) + atol
    elapsed = time.perf_counter() - t0
    assert elapsed <= 60.0
    _pass("C1 gradient exactness",
          f"(worst rel err {worst:.2e} over {checked} entries, {elapsed:.1f}s)")


def test_c2_h_machinery():
    """Curve roots vs a 1e5-point brute scan, threshold max within 1e-8,
    and the coefficient-absorption scaling law, on 20 random constant sets."""
    from test_truncation import brute_force_roots

    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    for trial in range(20):
        p = rng.uniform(1.5, 3.0)
        q = 1.0 + rng.uniform(0.2, 0.8) * (p - 1.0)
        s = p + rng.uniform(0.5, 1.5)
        base = HCurveConstants(
            alpha1=rng.uniform(0.3, 2.0), c_q=rng.uniform(0.5, 1.6),
            c_s=rng.uniform(0.5, 1.6), lam=None, p=p, q=q, s=s)
        lam1_val = lambda1(base)
        ana_at_threshold = analyze_h(replace(base, lam=lam1_val))
        assert abs(ana_at_threshold.h_max) <= 1e-8

        lam_b = lambda1(replace(base, c_q=2.0 * base.c_q))
        assert abs(lam_b - 2.0**(-q) * lam1_val) <= 1e-6 * lam1_val

        c = replace(base, lam=rng.uniform(0.15, 0.85) * lam1_val)
        ana = analyze_h(c)
        assert ana.has_hump
        r0_b, r1_b = brute_force_roots(c)
        assert abs(ana.r0 - r0_b) <= 1e-6 * max(1.0, r0_b)
        assert abs(ana.r1 - r1_b) <= 1e-6 * max(1.0, r1_b)
        assert abs(float(h_eval(c, ana.r0))) <= 1e-10
        assert abs(float(h_eval(c, ana.r1))) <= 1e-10
    elapsed = time.perf_counter() - t0
    assert elapsed <= 10.0
    _pass("C2 h-machinery", f"(20 random constant sets, {elapsed:.1f}s)")


def test_c3_truncation_coincidence():
    """Inside the inner radius the truncated and full energies and their
    gradients agree exactly (within 1e-13)."""
    mesh = build_mesh(1, 32)
    spec = ProblemSpec(dim=1, n=32, p=2.0, q=1.5, s=4.0, lam=0.9,
                       family=PLaplacian(2.0))
    rng = np.random.default_rng(99)
    worst_e = worst_g = 0.0
    for _ in range(50):
        vals = rng.standard_normal(mesh.n_dof)
        u = DiscreteFunction(mesh, vals)
        semi = seminorm_w1p(u, 2.0)
        r0 = semi / rng.uniform(0.1, 0.999)   # so that semi <= r0
        profile = TruncationProfile(r0, r0 * rng.uniform(1.2, 3.0))
        variant = EnergyVariant.truncated(profile)
        de = abs(energy(spec, u, variant) - energy(spec, u, EnergyVariant.full()))
        dg = float(np.max(np.abs(gradient(spec, u, variant)
                                 - gradient(spec, u, EnergyVariant.full()))))
        worst_e, worst_g = max(worst_e, de), max(worst_g, dg)
        assert de <= 1e-13
        assert dg <= 1e-13
    _pass("C3 truncation coincidence",
          f"(max energy diff {worst_e:.1e}, max gradient diff {worst_g:.1e})")


def test_c4_minimization_pipeline(bench128):
    """Benchmark minima: signed, negative level, small residual, inside the
    inner radius, exact mirror symmetry."""
    report = bench128["report"]
    minima = {s.sign: s for s in report.solutions if s.kind == "minimum"}
    assert set(minima) == {"positive", "negative"}
    r0 = report.h_analysis.r0
    for sol in minima.values():
        assert sol.energy < 0.0
        assert sol.residual <= 1e-6
        assert sol.seminorm < r0
    assert float(minima["positive"].u.values.min()) >= -1e-10
    assert float(minima["negative"].u.values.max()) <= 1e-10
    mirror_gap = float(np.max(np.abs(minima["positive"].u.values
                                     + minima["negative"].u.values)))
    assert mirror_gap <= 1e-6
    setup_time = sum(report.timings.get(k, 0.0) for k in
                     ("hypotheses", "embedding", "lambda1", "analyze_h"))
    minimize_time = (report.timings.get("minimize_plus", 0.0)
                     + report.timings.get("minimize_minus", 0.0))
    assert setup_time + minimize_time <= 120.0
    _pass("C4 minimization pipeline",
          f"(energies {minima['positive'].energy:.6e}, mirror gap "
          f"{mirror_gap:.1e}, {setup_time + minimize_time:.1f}s)")


def test_c5_mountain_pass_pipeline(bench128, smoke2d):
    """Benchmark mountain-pass points above level zero and away from the
    minima; the 2D smoke run yields at least the two signed minima."""
    report = bench128["report"]
    assert not report.failures
    passes = {s.sign: s for s in report.solutions if s.kind == "mountain_pass"}
    minima = {s.sign: s for s in report.solutions if s.kind == "minimum"}
    assert set(passes) == {"positive", "negative"}
    r0 = report.h_analysis.r0
    for sign, sol in passes.items():
        assert sol.energy > 0.0 > minima[sign].energy
        assert sol.residual <= 1e-6
        mesh = sol.u.mesh
        dist = seminorm_w1p(
            DiscreteFunction(mesh, sol.u.values - minima[sign].u.values), 2.0)
        assert dist > r0
    assert float(passes["positive"].u.values.min()) >= -1e-10
    assert float(passes["negative"].u.values.max()) <= 1e-10

    smoke = smoke2d["report"]
    smoke_minima = {s.sign: s for s in smoke.solutions if s.kind == "minimum"}
    assert set(smoke_minima) == {"positive", "negative"}
    assert smoke_minima["positive"].energy < 0.0
    assert smoke_minima["negative"].energy < 0.0

    total = bench128["elapsed"] + smoke2d["elapsed"]
    assert total <= 600.0
    _pass("C5 mountain pass pipeline",
          f"(levels {passes['positive'].energy:.4e} > 0 > "
          f"{minima['positive'].energy:.4e}, 2D smoke ok, {total:.1f}s)")


def test_c6_scaling_growth_bound():
    """Ray scaling: exact p-homogeneity for the p-Dirichlet integrand, and
    the certified-exponent growth bound for the weighted family."""
    rng = np.random.default_rng(31)
    n_samples = 10_000

    plap = PLaplacian(2.0)
    rep_p = check_hypotheses(plap, 2.0, 4.0, SamplingPlan(dim=1, seed=0))
    assert abs(rep_p.mp_exponent - 2.0) <= 1e-12
    ts = rng.uniform(-10.0, 10.0, n_samples)
    xis = 10.0 ** rng.uniform(-2.0, 1.0, (n_samples, 1)) \
        * rng.choice([-1.0, 1.0], (n_samples, 1))
    sigmas = 10.0 ** rng.uniform(0.0, 2.0, n_samples)
    lhs = plap.A(None, sigmas * ts, sigmas[:, None] * xis)
    rhs = sigmas**2.0 * plap.A(None, ts, xis)
    assert np.allclose(lhs, rhs, rtol=1e-12)

    weighted = WeightedPLaplacian(2.0, 0.5)
    rep_w = check_hypotheses(weighted, 2.0, 4.0, SamplingPlan(dim=1, seed=0))
    expo = rep_w.mp_exponent
    assert expo < 4.0
    lhs = weighted.A(None, sigmas * ts, sigmas[:, None] * xis)
    rhs = sigmas**expo * weighted.A(None, ts, xis)
    slack = (rhs - lhs) / rhs
    assert float(slack.min()) >= -1e-10
    _pass("C6 scaling growth bound",
          f"(weighted exponent {expo:.6f}, min relative slack "
          f"{float(slack.min()):.2e})")


def test_c7_sign_splitting(bench128):
    """Pairing the positive-branch differential with the negative part at
    the computed critical points dominates the coercive lower bound."""
    report = bench128["report"]
    hyp = report.hypotheses
    coeff = hyp.alpha1 * hyp.alpha2 / hyp.eta1
    spec = report.spec
    plus_solutions = [s for s in report.solutions if s.sign == "positive"]
    assert len(plus_solutions) == 2
    for sol in plus_solutions:
        mesh = sol.u.mesh
        neg_part = np.maximum(-sol.u.values, 0.0)
        assert float(neg_part.max()) <= 1e-8
        direction = np.minimum(sol.u.values, 0.0)       # nodal values of -u_-
        pairing = float(gradient(spec, sol.u, EnergyVariant.plus()) @ direction)
        neg_norm = seminorm_w1p(DiscreteFunction(mesh, neg_part), spec.p)
        assert pairing >= coeff * neg_norm**spec.p - 1e-10
    _pass("C7 sign splitting", f"(coefficient {coeff:.4f})")


def test_c8_embedding_constant():
    """Discrete estimate within 2% of the continuum limit 1/pi, cross-checked
    against the discrete eigenvalue oracle."""
    from scipy.linalg import eigh_tridiagonal

    n = 256
    mesh = build_mesh(1, n)
    c = estimate_embedding_constant(mesh, 2.0, 2.0, seed=0)
    rel = abs(c - 1.0 / math.pi) * math.pi
    assert rel < 0.02
    h = 1.0 / n
    lam_min = eigh_tridiagonal(
        np.full(n - 1, 2.0 / h**2), np.full(n - 2, -1.0 / h**2),
        select="i", select_range=(0, 0))[0][0]
    assert c == pytest.approx(1.0 / math.sqrt(lam_min), rel=1e-8)
    _pass("C8 embedding constant",
          f"(estimate {c:.8f}, deviation from 1/pi {rel:.2e})")


def test_c9_small_instance_oracle():
    """On three unknowns, an exhaustive grid search over the truncated
    positive-branch energy localizes the global minimum; the solver lands on
    the same well and strictly below the best grid value."""
    spec0 = ProblemSpec(dim=1, n=4, p=2.0, q=1.5, s=4.0, lam=None,
                        family=PLaplacian(2.0))
    options = SolveOptions(lambda_fraction=0.5, seed=0)
    ctx = setup_problem(spec0, options)
    spec, mesh = ctx.spec, ctx.mesh
    lam, q, s = spec.lam, spec.q, spec.s
    r0, r1 = ctx.profile.r0, ctx.profile.r1
    h = 0.25

    def oracle_energy(batch):
        # independent re-implementation of the truncated positive-branch
        # energy for the 3-unknown uniform mesh
        full = np.zeros((batch.shape[0], 5))
        full[:, 1:4] = batch
        slopes = np.diff(full, axis=1) / h
        grad_sq = h * np.sum(slopes**2, axis=1)
        a_part = 0.5 * grad_sq
        vp = np.maximum(batch, 0.0)
        m_q = h * np.sum(vp**q, axis=1)
        m_s = h * np.sum(vp**s, axis=1)
        semi = np.sqrt(grad_sq)

        def bump(t):
            out = np.zeros_like(t)
            pos = t > 0
            out[pos] = np.exp(-1.0 / t[pos])
            return out

        up, down = bump(r1 - semi), bump(semi - r0)
        tau = np.where(up + down > 0, up / np.where(up + down > 0, up + down, 1.0), 0.0)
        return a_part - lam / q * m_q - tau / s * m_s

    axis = np.round(np.arange(-3.0, 3.0 + 1e-9, 0.05), 10)
    assert axis.size == 121
    best_val, best_pt = np.inf, None
    v23 = np.array(np.meshgrid(axis, axis, indexing="ij")).reshape(2, -1).T
    for v1 in axis:
        batch = np.column_stack([np.full(v23.shape[0], v1), v23])
        vals = oracle_energy(batch)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_pt = float(vals[i]), batch[i].copy()

    variant = EnergyVariant(sign="plus", truncation=ctx.profile)
    start = find_negative_start(spec, variant, mesh=mesh,
                                delta=ctx.hypotheses.delta)
    sol = minimize_truncated(spec, start, variant, tol=1e-10,
                             inner_radius=r0)
    # the oracle and the production quadrature must agree where compared
    assert oracle_energy(sol.u.values[None, :])[0] == pytest.approx(
        energy(spec, sol.u, variant), abs=1e-12)

    gap = float(np.max(np.abs(sol.u.values - best_pt)))
    assert gap <= 0.1
    assert oracle_energy(sol.u.values[None, :])[0] < best_val
    _pass("C9 small instance oracle",
          f"(grid best {best_val:.8f} at {best_pt}, solver gap {gap:.3f})")
