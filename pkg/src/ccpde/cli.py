"""Config-driven batch front end.

Reads a JSON run configuration, orchestrates the pipeline (hypothesis
certification, embedding constants, threshold, curve analysis, signed
solves), and writes a machine-readable report plus one CSV profile per
solution.  Exit codes: 0 success, 2 config error, 3 partial results,
4 no solutions.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .energy import energy, EnergyVariant
from .mesh import DiscreteFunction, Mesh, build_mesh
from .problem import ProblemSpec, SamplingPlan, make_family
from .solvers import RunReport, SolveOptions, setup_problem, solve_signed
from .truncation import HCurveConstants, analyze_h, lambda1

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "run",
    "write_profile",
    "read_profile",
    "main",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3
EXIT_EMPTY = 4


class ConfigError(ValueError):
    """Invalid run configuration; the message names the violated invariant."""


@dataclass
class RunConfig:
    """Validated run configuration (see README for the JSON schema)."""

    dim: int = 1
    n: int = 128
    p: float = 2.0
    q: float = 1.5
    s: float = 4.0
    lambda_mode: str = "fraction"        # "fraction" of the threshold or "absolute"
    lambda_value: float = 0.5
    family_id: str = "p_laplacian"
    family_params: dict = field(default_factory=dict)
    embedding_mode: str = "discrete"     # "discrete" or "user"
    c_q: float | None = None
    c_s: float | None = None
    alpha1: float | None = None          # optional analytic coercivity override
    residual_tol: float = 1e-8
    bisection_tol: float = 1e-12
    minimize_max_iter: int = 200_000
    mp_points: int = 20
    mp_max_iter: int = 50_000
    mp_redistribute_every: int = 10
    seed: int = 0

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        known = dict(raw)
        kwargs = {}
        for key in ("dim", "n", "seed", "minimize_max_iter"):
            if key in known:
                kwargs[key] = int(known.pop(key))
        for key in ("p", "q", "s", "residual_tol", "bisection_tol"):
            if key in known:
                kwargs[key] = float(known.pop(key))
        lam = known.pop("lambda", None)
        if lam is not None:
            if not isinstance(lam, dict) or "mode" not in lam or "value" not in lam:
                raise ConfigError('"lambda" must be {"mode": ..., "value": ...}')
            kwargs["lambda_mode"] = str(lam["mode"])
            kwargs["lambda_value"] = float(lam["value"])
        fam = known.pop("family", None)
        if fam is not None:
            if not isinstance(fam, dict) or "id" not in fam:
                raise ConfigError('"family" must be {"id": ..., "params": {...}}')
            kwargs["family_id"] = str(fam["id"])
            kwargs["family_params"] = dict(fam.get("params") or {})
        emb = known.pop("embedding", None)
        if emb is not None:
            kwargs["embedding_mode"] = str(emb.get("mode", "discrete"))
            if emb.get("c_q") is not None:
                kwargs["c_q"] = float(emb["c_q"])
            if emb.get("c_s") is not None:
                kwargs["c_s"] = float(emb["c_s"])
        consts = known.pop("constants", None)
        if consts is not None:
            if consts.get("alpha1") is not None:
                kwargs["alpha1"] = float(consts["alpha1"])
            if consts.get("c_q") is not None:
                kwargs["c_q"] = float(consts["c_q"])
                kwargs.setdefault("embedding_mode", "user")
            if consts.get("c_s") is not None:
                kwargs["c_s"] = float(consts["c_s"])
                kwargs.setdefault("embedding_mode", "user")
        mp = known.pop("mountain_pass", None)
        if mp is not None:
            if mp.get("points") is not None:
                kwargs["mp_points"] = int(mp["points"])
            if mp.get("max_iter") is not None:
                kwargs["mp_max_iter"] = int(mp["max_iter"])
            if mp.get("redistribute_every") is not None:
                kwargs["mp_redistribute_every"] = int(mp["redistribute_every"])
        if known:
            raise ConfigError(f"unknown config keys: {sorted(known)}")
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def validate(self):
        if self.lambda_mode not in ("fraction", "absolute"):
            raise ConfigError(
                f'lambda mode must be "fraction" or "absolute", got {self.lambda_mode!r}')
        if not self.lambda_value > 0:
            raise ConfigError(f"lambda value must be positive, got {self.lambda_value}")
        if self.residual_tol <= 0 or self.bisection_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.mp_points < 1:
            raise ConfigError("mountain pass needs at least one interior point")
        try:
            self.build_spec()  # exponent ordering etc. checked before any compute
        except (ValueError, TypeError) as err:
            raise ConfigError(str(err)) from None

    def build_spec(self) -> ProblemSpec:
        family = make_family(self.family_id, self.family_params, self.p)
        lam = self.lambda_value if self.lambda_mode == "absolute" else None
        return ProblemSpec(dim=self.dim, n=self.n, p=self.p, q=self.q,
                           s=self.s, lam=lam, family=family,
                           embedding_mode=self.embedding_mode,
                           c_q=self.c_q, c_s=self.c_s)

    def build_options(self, enable_mountain_pass: bool = True) -> SolveOptions:
        fraction = self.lambda_value if self.lambda_mode == "fraction" else None
        return SolveOptions(
            residual_tol=self.residual_tol,
            minimize_max_iter=self.minimize_max_iter,
            mp_points=self.mp_points,
            mp_max_iter=self.mp_max_iter,
            mp_redistribute_every=self.mp_redistribute_every,
            enable_mountain_pass=enable_mountain_pass,
            lambda_fraction=fraction,
            seed=self.seed,
            sampling_plan=SamplingPlan(dim=self.dim, seed=self.seed),
        )


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as err:
        raise ConfigError(f"cannot read config file: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None
    return RunConfig.from_dict(raw)


def write_profile(path: str | Path, u: DiscreteFunction):
    """One CSV row per mesh node: coordinates then the nodal value."""
    mesh = u.mesh
    full = u.full_values()
    header = ["x", "u"] if mesh.dim == 1 else ["x", "y", "u"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for node, val in zip(mesh.nodes, full):
            writer.writerow([repr(float(c)) for c in node] + [repr(float(val))])


def read_profile(path: str | Path, mesh: Mesh) -> DiscreteFunction:
    """Read a profile CSV back; rows must follow the mesh node order."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(c) for c in row] for row in rows[1:]])
    if data.shape[0] != mesh.nodes.shape[0]:
        raise ValueError(
            f"profile has {data.shape[0]} rows, mesh has {mesh.nodes.shape[0]} nodes")
    return DiscreteFunction(mesh, data[:, -1][mesh.interior])


def _solution_dict(sol, profile_name):
    return {
        "kind": sol.kind,
        "sign": sol.sign,
        "energy": sol.energy,
        "residual": sol.residual,
        "seminorm": sol.seminorm,
        "sup_norm": sol.sup_norm,
        "iterations": sol.iterations,
        "profile": profile_name,
    }


def report_to_dict(report: RunReport, cfg: RunConfig,
                   profile_names: list, timings: dict) -> dict:
    hyp = report.hypotheses
    h_curve = None
    if report.h_analysis is not None:
        h_curve = {
            "x_max": report.h_analysis.x_max,
            "h_max": report.h_analysis.h_max,
            "r0": report.h_analysis.r0,
            "r1": report.h_analysis.r1,
        }
    return {
        "problem": {
            "dim": report.spec.dim, "n": report.spec.n,
            "p": report.spec.p, "q": report.spec.q, "s": report.spec.s,
            "lambda": report.spec.lam,
            "family": {"id": cfg.family_id, "params": cfg.family_params},
        },
        "lambda1": report.lam1,
        "embedding": {"mode": report.spec.embedding_mode,
                      "c_q": report.c_q, "c_s": report.c_s},
        "hypotheses": {
            "alpha1": hyp.alpha1, "eta1": hyp.eta1, "eta2": hyp.eta2,
            "delta": hyp.delta, "alpha2": hyp.alpha2, "alpha3": hyp.alpha3,
            "mp_exponent": hyp.mp_exponent,
            "violations": [list(v[:1]) + [list(map(list, map(np.atleast_1d, v[1])))
                                          if v[1] else None]
                           for v in hyp.violations],
        },
        "h_curve": h_curve,
        "mountain_pass_enabled": report.mountain_pass_enabled,
        "solutions": [
            _solution_dict(sol, name)
            for sol, name in zip(report.solutions, profile_names)
        ],
        "failures": report.failures,
        "timings_sec": timings,
    }


def _exit_code(report: RunReport, n_reported: int, n_expected: int) -> int:
    if n_reported == 0:
        return EXIT_EMPTY
    if n_reported < n_expected or report.failures:
        return EXIT_PARTIAL
    return EXIT_OK


def run(cfg: RunConfig, *, mode: str = "full", out: str | Path | None = None,
        profiles_dir: str | Path | None = None, trace: bool = False,
        trace_path: str | Path | None = None):
    """Execute the pipeline and write the report and profiles.

    ``mode``: "full" reports everything, "minimize" disables the mountain
    pass stage, "mountain-pass" runs the full pipeline but reports only the
    mountain pass points.  Returns (report_dict, exit_code).
    """
    spec = cfg.build_spec()
    options = cfg.build_options(enable_mountain_pass=(mode != "minimize"))
    trace_rows: list | None = [] if trace else None
    report = solve_signed(spec, options, trace=trace_rows)

    reported = report.solutions
    expected = report.expected_solutions
    if mode == "mountain-pass":
        reported = [s for s in reported if s.kind == "mountain_pass"]
        expected = 2

    # every reported solution must reference an emitted profile file
    if profiles_dir is None and out is not None:
        profiles_dir = Path(out).parent / "profiles"
    profiles_dir = Path(profiles_dir) if profiles_dir is not None else None
    profile_names = []
    for sol in reported:
        name = f"solution_{sol.kind}_{sol.sign}.csv"
        profile_names.append(name)
        if profiles_dir is not None:
            profiles_dir.mkdir(parents=True, exist_ok=True)
            write_profile(profiles_dir / name, sol.u)

    filtered = RunReport(
        spec=report.spec, lam1=report.lam1, c_q=report.c_q, c_s=report.c_s,
        hypotheses=report.hypotheses, h_analysis=report.h_analysis,
        profile=report.profile, solutions=reported, failures=report.failures,
        timings=report.timings, mountain_pass_enabled=report.mountain_pass_enabled,
    )
    payload = report_to_dict(filtered, cfg, profile_names, dict(report.timings))
    if out is not None:
        Path(out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if trace and trace_rows is not None and trace_path is not None:
        with open(trace_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["stage", "iteration", "energy", "residual", "seminorm"])
            writer.writerows(trace_rows)
    return payload, _exit_code(filtered, len(reported), expected)


def _resolve_h_constants(cfg: RunConfig):
    """Curve constants for analyze-h / lambda1, avoiding a solve.

    Uses config-supplied constants when present; otherwise certifies the
    coercivity constant by sampling and estimates the embedding constants on
    the configured mesh.
    """
    alpha1, c_q, c_s = cfg.alpha1, cfg.c_q, cfg.c_s
    if alpha1 is None:
        from .problem import check_hypotheses
        family = make_family(cfg.family_id, cfg.family_params, cfg.p)
        rep = check_hypotheses(family, cfg.p, cfg.s,
                               SamplingPlan(dim=cfg.dim, seed=cfg.seed))
        alpha1 = rep.alpha1
    if c_q is None or c_s is None:
        from .mesh import estimate_embedding_constant
        mesh = build_mesh(cfg.dim, cfg.n)
        if c_q is None:
            c_q = estimate_embedding_constant(mesh, cfg.p, cfg.q, seed=cfg.seed)
        if c_s is None:
            c_s = estimate_embedding_constant(mesh, cfg.p, cfg.s, seed=cfg.seed + 1)
    return HCurveConstants(alpha1=alpha1, c_q=c_q, c_s=c_s, lam=None,
                           p=cfg.p, q=cfg.q, s=cfg.s)


def _cmd_lambda1(cfg: RunConfig, out):
    base = _resolve_h_constants(cfg)
    payload = {
        "lambda1": lambda1(base),
        "constants": {"alpha1": base.alpha1, "c_q": base.c_q, "c_s": base.c_s,
                      "p": base.p, "q": base.q, "s": base.s},
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if out:
        Path(out).write_text(text + "\n")
    return EXIT_OK


def _cmd_analyze_h(cfg: RunConfig, out):
    from dataclasses import replace
    base = _resolve_h_constants(cfg)
    lam1_val = lambda1(base)
    lam = (cfg.lambda_value if cfg.lambda_mode == "absolute"
           else cfg.lambda_value * lam1_val)
    ana = analyze_h(replace(base, lam=lam), root_tol=cfg.bisection_tol)
    payload = {
        "lambda": lam,
        "lambda1": lam1_val,
        "x_max": ana.x_max,
        "h_max": ana.h_max,
        "r0": ana.r0,
        "r1": ana.r1,
        "constants": {"alpha1": base.alpha1, "c_q": base.c_q, "c_s": base.c_s},
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if out:
        Path(out).write_text(text + "\n")
    return EXIT_OK


def _cmd_check_hypotheses(cfg: RunConfig, out):
    from .problem import check_hypotheses
    family = make_family(cfg.family_id, cfg.family_params, cfg.p)
    rep = check_hypotheses(family, cfg.p, cfg.s,
                           SamplingPlan(dim=cfg.dim, seed=cfg.seed))
    payload = {
        "family": {"id": cfg.family_id, "params": cfg.family_params},
        "alpha1": rep.alpha1, "eta1": rep.eta1, "eta2": rep.eta2,
        "delta": rep.delta, "alpha2": rep.alpha2, "alpha3": rep.alpha3,
        "mp_exponent": rep.mp_exponent,
        "violations": [v[0] for v in rep.violations],
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if out:
        Path(out).write_text(text + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ccpde",
        description="Signed multiple solutions of concave-convex quasilinear "
                    "Dirichlet problems on (0,1) and (0,1)^2.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("full", "whole pipeline: two minima and two mountain pass points"),
        ("minimize", "minimization pipeline only: the two signed minima"),
        ("mountain-pass", "full pipeline, reporting the mountain pass points"),
        ("analyze-h", "landmarks of the truncation curve as JSON"),
        ("lambda1", "parameter threshold as JSON"),
        ("check-hypotheses", "certified structural constants as JSON"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="JSON run config")
        cmd.add_argument("--out", default=None, help="report JSON path")
        cmd.add_argument("--profiles", default=None,
                         help="directory for solution CSV profiles")
        cmd.add_argument("--trace", action="store_true",
                         help="record per-iteration solver CSV trace")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config seed")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.validate()
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "lambda1":
        return _cmd_lambda1(cfg, args.out)
    if args.command == "analyze-h":
        return _cmd_analyze_h(cfg, args.out)
    if args.command == "check-hypotheses":
        return _cmd_check_hypotheses(cfg, args.out)

    trace_path = None
    if args.trace:
        base = Path(args.out).parent if args.out else Path(".")
        trace_path = base / "trace.csv"
    payload, code = run(cfg, mode=args.command, out=args.out,
                        profiles_dir=args.profiles, trace=args.trace,
                        trace_path=trace_path)
    print(json.dumps({
        "solutions": len(payload["solutions"]),
        "failures": len(payload["failures"]),
        "exit_code": code,
    }))
    return code


if __name__ == "__main__":
    raise SystemExit(main())
