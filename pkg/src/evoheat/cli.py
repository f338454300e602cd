"""Command line front end.

One JSON config drives every subcommand; flags override single fields.  Exit
codes: 0 all checks passed, 1 a check failed (reports are still written),
2 config error, 3 solver failure.  Identical configs produce byte-identical
artifacts: the solver is deterministic and floats are written with shortest
round-trip formatting.

Config schema (all keys optional, defaults shown by --help):

    {
      "scenario": {"kind": "conformal_circle", "n": 64, "T": 1.0, ...} | "path.json",
      "initial":  {"profile": "harmonic", "k": 1},
      "h": 0.1, "m": 4, "rel_tol": 1e-10, "slack": 1e-8,
      "c0": null,                  # override the certified growth bound
      "seed": 0, "out": "out",
      "h_list": [0.1, 0.05, 0.025, 0.0125],
      "truncation_levels": [1, 2, 4, 8, 16],
      "test_functions": null,      # e.g. ["k1_sin", "k2_poly"]; null = full catalog
      "oracle_steps": 4096
    }
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import (Scenario, ScenarioError, TimeWeightedGraph, build_scenario,
                       dirichlet_energy, vertex_weights, volume_growth_bound)
from .linalg import SolverError
from .profiles import make_initial_data
from .scheme import ChainFamily, DiscreteFunction, run_interpolated, truncate
from .verify import (contraction_check, default_test_catalog, degiorgi_family,
                     energy_estimate, extremum_check, fit_order,
                     initial_attainment_check, l2h1_interp_norm, convergence_table,
                     weak_residual, weighted_l2_sq)

__all__ = ["RunConfig", "ConfigError", "main",
           "cmd_run", "cmd_converge", "cmd_compare_interp", "cmd_l2_limit", "cmd_verify"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


class ConfigError(ValueError):
    """Bad or inconsistent run configuration."""


_DEFAULT_SCENARIO = {"kind": "static_circle", "n": 64, "T": 1.0}
_DEFAULT_INITIAL = {"profile": "harmonic", "k": 1}


@dataclass
class RunConfig:
    scenario: dict | str = field(default_factory=lambda: dict(_DEFAULT_SCENARIO))
    initial: dict = field(default_factory=lambda: dict(_DEFAULT_INITIAL))
    h: float = 0.1
    m: int = 4
    rel_tol: float = 1e-10
    slack: float = 1e-8
    c0: Optional[float] = None
    seed: int = 0
    out: str = "out"
    h_list: list = field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125])
    truncation_levels: list = field(default_factory=lambda: [1, 2, 4, 8, 16])
    test_functions: Optional[list] = None
    oracle_steps: int = 4096

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        if cfg.h <= 0:
            raise ConfigError(f"h: must be positive, got {cfg.h}")
        if int(cfg.m) < 1:
            raise ConfigError(f"m: must be >= 1, got {cfg.m}")
        cfg.m = int(cfg.m)
        if cfg.rel_tol < 0:
            raise ConfigError(f"rel_tol: must be nonnegative, got {cfg.rel_tol}")
        if cfg.c0 is not None and cfg.c0 < 0:
            raise ConfigError(f"c0: must be nonnegative, got {cfg.c0}")
        if not cfg.h_list:
            raise ConfigError("h_list: must not be empty")
        return cfg


def _resolve_scenario(cfg: RunConfig) -> Scenario:
    sc = cfg.scenario
    if isinstance(sc, str):
        with open(sc) as f:
            sc = json.load(f)
    if not isinstance(sc, dict):
        raise ConfigError(f"scenario: expected an object or a path, got {type(sc).__name__}")
    return Scenario.from_dict(sc)


def _prepare(cfg: RunConfig):
    spec = _resolve_scenario(cfg)
    G = build_scenario(spec)
    u0 = make_initial_data(G, cfg.initial, default_seed=cfg.seed)
    return spec, G, u0


def _chain_c0(cfg: RunConfig, G: TimeWeightedGraph, chain: ChainFamily) -> float:
    if cfg.c0 is not None:
        return float(cfg.c0)
    return volume_growth_bound(G, chain.times())


# ---------------------------------------------------------------------------
# deterministic artifact writing
# ---------------------------------------------------------------------------

def _write_text(path: str, text: str) -> None:
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: str, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2) + "\n")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _write_text(path, "\n".join(lines) + "\n")


def _write_samples_csv(path: str, chain: ChainFamily) -> None:
    rows = []
    for s in chain.samples:
        for i, v in enumerate(s.values):
            rows.append((s.time, i, float(v)))
    _write_csv(path, ["t", "vertex", "value"], rows)


def _echo_config(cfg: RunConfig, outdir: str) -> None:
    doc = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}
    _write_json(os.path.join(outdir, "run_config.json"), doc)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_run(cfg: RunConfig) -> int:
    """Run the scheme, write samples + energy and extremum reports."""
    spec, G, u0 = _prepare(cfg)
    chain = run_interpolated(G, u0, cfg.h, cfg.m, rel_tol=cfg.rel_tol)
    c0 = _chain_c0(cfg, G, chain)
    energy = energy_estimate(chain, G, u0, c0, cfg.slack)
    extremum = extremum_check(chain, u0)

    _echo_config(cfg, cfg.out)
    _write_samples_csv(os.path.join(cfg.out, "samples.csv"), chain)
    _write_json(os.path.join(cfg.out, "energy_report.json"),
                {"scenario": spec.to_dict(), "h": chain.h, "m": chain.m,
                 "horizon": chain.horizon, **energy.to_json_dict()})
    _write_json(os.path.join(cfg.out, "extremum_report.json"), extremum.to_json_dict())
    return EXIT_OK if (energy.passed and extremum.passed) else EXIT_CHECK_FAILED


def cmd_converge(cfg: RunConfig) -> int:
    """Error-vs-oracle table over h_list; exit 0 iff the fitted order is >= 0.8."""
    spec = _resolve_scenario(cfg)
    rows = convergence_table(spec, cfg.initial, cfg.h_list, cfg.m,
                             oracle_steps=cfg.oracle_steps, rel_tol=cfg.rel_tol)
    _echo_config(cfg, cfg.out)
    _write_csv(os.path.join(cfg.out, "convergence_table.csv"),
               ["h", "m", "error", "observed_order"],
               [(r.h, r.m, r.error, r.observed_order) for r in rows])
    if all(r.error <= 1e-10 for r in rows):
        return EXIT_OK  # flat at rounding level (constant data); nothing to fit
    order = fit_order(rows)
    return EXIT_OK if (order is not None and order >= 0.8) else EXIT_CHECK_FAILED


def cmd_compare_interp(cfg: RunConfig) -> int:
    """Energy norms of shifted-chain vs resolvent interpolation on one run."""
    spec, G, u0 = _prepare(cfg)
    chain = run_interpolated(G, u0, cfg.h, cfg.m, rel_tol=cfg.rel_tol)
    c0 = _chain_c0(cfg, G, chain)
    energy = energy_estimate(chain, G, u0, c0, cfg.slack)
    dg = degiorgi_family(G, chain.discrete_sequence(), chain.h, chain.m,
                         rel_tol=cfg.rel_tol)
    shifted = l2h1_interp_norm(chain.produced(), G, dt=chain.delta)
    resolvent = l2h1_interp_norm(dg, G, dt=chain.delta)
    ratio = None if shifted == 0.0 else resolvent / shifted
    _echo_config(cfg, cfg.out)
    _write_json(os.path.join(cfg.out, "comparison.json"), {
        "scenario": spec.to_dict(), "h": chain.h, "m": chain.m,
        "shifted_l2h1": shifted, "degiorgi_l2h1": resolvent, "ratio": ratio,
        "energy_report": energy.to_json_dict(),
        "note": "samples at multiples of h coincide by construction; "
                "the ratio is driven by the intermediate samples",
    })
    return EXIT_OK if energy.passed else EXIT_CHECK_FAILED


def cmd_l2_limit(cfg: RunConfig) -> int:
    """Truncated-vs-full runs against the contraction bound, per level and h."""
    spec, G, u0 = _prepare(cfg)
    w0 = vertex_weights(G, 0.0)
    rows = []
    all_ok = True
    for h in cfg.h_list:
        chain_full = run_interpolated(G, u0, float(h), cfg.m, rel_tol=cfg.rel_tol)
        c0 = _chain_c0(cfg, G, chain_full)
        bound_factor = float(np.exp(c0 * chain_full.horizon))
        for level in cfg.truncation_levels:
            u0n = truncate(u0, float(level))
            trunc_err = weighted_l2_sq(u0.values - u0n.values, w0)
            chain_n = run_interpolated(G, u0n, float(h), cfg.m, rel_tol=cfg.rel_tol)
            diff_sup = 0.0
            diff_l2h1 = 0.0
            for sf, sn in zip(chain_full.samples, chain_n.samples):
                d = sf.values - sn.values
                diff_sup = max(diff_sup, weighted_l2_sq(d, vertex_weights(G, sf.time)))
            for sf, sn in zip(chain_full.produced(), chain_n.produced()):
                diff_l2h1 += chain_full.delta * dirichlet_energy(
                    G, sf.time, sf.values - sn.values)
            bound = bound_factor * trunc_err
            ok = (diff_sup <= bound * (1.0 + cfg.slack)
                  and diff_l2h1 <= bound * (1.0 + cfg.slack))
            all_ok = all_ok and ok
            rows.append({"h": float(h), "level": float(level),
                         "truncation_error": trunc_err, "diff_sup_l2": diff_sup,
                         "diff_l2h1": diff_l2h1, "bound": bound, "c0_used": c0,
                         "pass": ok})
    _echo_config(cfg, cfg.out)
    _write_json(os.path.join(cfg.out, "truncation_report.json"),
                {"scenario": spec.to_dict(), "m": cfg.m, "slack": cfg.slack,
                 "rows": rows, "pass": all_ok})
    return EXIT_OK if all_ok else EXIT_CHECK_FAILED


def cmd_verify(cfg: RunConfig) -> int:
    """Full battery: run artifacts plus every check on one configuration."""
    spec, G, u0 = _prepare(cfg)
    chain = run_interpolated(G, u0, cfg.h, cfg.m, rel_tol=cfg.rel_tol)
    c0 = _chain_c0(cfg, G, chain)

    energy = energy_estimate(chain, G, u0, c0, cfg.slack)
    extremum = extremum_check(chain, u0)

    rng = np.random.default_rng(cfg.seed + 1)
    v0 = DiscreteFunction(rng.standard_normal(G.n_vertices), 0.0)
    contraction = contraction_check(G, u0, v0, cfg.h, cfg.m, c0,
                                    slack=cfg.slack, rel_tol=cfg.rel_tol)

    catalog = default_test_catalog(G, chain.horizon)
    if cfg.test_functions is not None:
        wanted = set(cfg.test_functions)
        unknown = wanted - {fn.name for fn in catalog}
        if unknown:
            raise ConfigError(f"test_functions: unknown names {sorted(unknown)}")
        catalog = [fn for fn in catalog if fn.name in wanted]
    weak_rows = weak_residual(chain, G, catalog)

    att = initial_attainment_check(chain, G, u0, chain.h)
    att_bound = chain.h * dirichlet_energy(G, chain.h, u0.values)
    att_ok = att ** 2 <= att_bound * (1.0 + cfg.slack) + 1e-30

    ok = bool(energy.passed and extremum.passed and contraction.passed and att_ok)
    _echo_config(cfg, cfg.out)
    _write_samples_csv(os.path.join(cfg.out, "samples.csv"), chain)
    _write_json(os.path.join(cfg.out, "energy_report.json"),
                {"scenario": spec.to_dict(), "h": chain.h, "m": chain.m,
                 "horizon": chain.horizon, **energy.to_json_dict()})
    _write_json(os.path.join(cfg.out, "extremum_report.json"), extremum.to_json_dict())
    _write_json(os.path.join(cfg.out, "verify_report.json"), {
        "scenario": spec.to_dict(), "h": chain.h, "m": chain.m,
        "horizon": chain.horizon, "c0_used": c0,
        "energy": energy.to_json_dict(),
        "extremum": extremum.to_json_dict(),
        "contraction": contraction.to_json_dict(),
        "weak_residuals": [r.to_json_dict() for r in weak_rows],
        "initial_attainment": {"t_small": chain.h, "distance": att,
                               "minimality_bound_sq": att_bound, "pass": att_ok},
        "pass": ok,
    })
    return EXIT_OK if ok else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

_COMMANDS = {
    "run": cmd_run,
    "converge": cmd_converge,
    "compare-interp": cmd_compare_interp,
    "l2-limit": cmd_l2_limit,
    "verify": cmd_verify,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evoheat",
        description="Implicit-Euler heat flow on evolving weighted graphs, "
                    "with estimate checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "run": "run the scheme; writes samples.csv, energy_report.json, "
               "extremum_report.json",
        "converge": "error table against the time-exact reference flow over h_list; "
                    "writes convergence_table.csv",
        "compare-interp": "shifted-chain vs resolvent interpolation norms; "
                          "writes comparison.json",
        "l2-limit": "truncated initial data vs contraction bound; "
                    "writes truncation_report.json",
        "verify": "run plus every check; writes verify_report.json",
    }
    for name in _COMMANDS:
        p = sub.add_parser(name, help=descriptions[name], description=descriptions[name])
        p.add_argument("--config", metavar="PATH",
                       help="JSON config file (default: built-in defaults)")
        p.add_argument("--out", metavar="DIR",
                       help="output directory (default: out)")
        p.add_argument("--h", type=float, help="step size (default 0.1)")
        p.add_argument("--m", type=int, help="chains per step (default 4)")
        p.add_argument("--tol", type=float, dest="rel_tol",
                       help="solver relative tolerance (default 1e-10)")
        p.add_argument("--seed", type=int, help="seed for random profiles (default 0)")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    raw: dict = {}
    if args.config is not None:
        with open(args.config) as f:
            try:
                raw = json.load(f)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config: not valid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config: top level must be a JSON object")
    for flag, key in (("out", "out"), ("h", "h"), ("m", "m"),
                      ("rel_tol", "rel_tol"), ("seed", "seed")):
        value = getattr(args, flag, None)
        if value is not None:
            raw[key] = value
    return RunConfig.from_dict(raw)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        return _COMMANDS[args.command](cfg)
    except (ConfigError, ScenarioError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
