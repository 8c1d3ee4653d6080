"""Command-line interface.

Settings come from three layers: the built-in defaults in :data:`DEFAULTS`,
an optional ``--config`` JSON file, then command-line flags (flags win).
``NLB_SEED`` in the environment replaces the default seed.

Exit codes: 0 success, 1 validation/domain error, 2 non-convergence or
divergence, 3 bad arguments.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import experiments, io, returns
from .mdp import Policy, mdp_from_dict, policy_from_dict, policy_to_dict, validate, validate_policy
from .solvers import (SolverError, TdConfig, action_values, empirical_contraction, fixed_point,
                      greedy_policy, td0)
from .transforms import Family, Kind, TransformSpec, lipschitz_bound

EXIT_OK, EXIT_DOMAIN, EXIT_SOLVER, EXIT_ARGS = 0, 1, 2, 3

TRANSFORM_KINDS = {
    "linear": (Kind.LINEAR, Family.POWER),
    "reward": (Kind.REWARD_TRANSFORM, Family.POWER),
    "reward_transform": (Kind.REWARD_TRANSFORM, Family.POWER),
    "power": (Kind.VALUE_DISCOUNT, Family.POWER),
    "linear_discount": (Kind.VALUE_DISCOUNT, Family.LINEAR),
    "squash": (Kind.SQUASH, Family.POWER),
    "hdtd": (Kind.HDTD, Family.POWER),
}

_TRANSFORM = {"transform": "linear", "gamma": 0.9, "k": 1.0, "kappa": 1.0, "r_ref": 1.0,
              "squash_eps": 1e-2}
_COMMON = {"out": ".", "seed": 0, "figures": True}

# every setting and its default, per subcommand
DEFAULTS = {
    "validate": {"mdp": None, "policy": None},
    "solve": {**_COMMON, **_TRANSFORM, "mdp": None, "policy": None, "v0": None,
              "tol": 1e-10, "max_iters": 100_000},
    "td": {**_COMMON, **_TRANSFORM, "mdp": None, "policy": None, "v0": None, "alpha": 0.05,
           "visit_decay": False, "episodes": 1000, "horizon": 1000},
    "qvalues": {**_COMMON, **_TRANSFORM, "mdp": None, "policy": None, "values": None},
    "contraction": {**_COMMON, **_TRANSFORM, "mdp": None, "policy": None, "pairs": 500,
                    "v_max": None},
    "verify-ordering": {**_COMMON, "gamma": 0.9, "k": 0.1, "r_ref": 1.0, "outer_log": False,
                        "R": list(experiments.DEFAULT_R_GRID), "t_max": 50},
    "sweep-gaps": {**_COMMON, "family": "power", "kappa": 1.0,
                   "p": list(experiments.DEFAULT_P_LIST), "gamma_step": 0.01,
                   "embedded": False},
    "sweep-curves": {**_COMMON, "gammas": list(experiments.DEFAULT_GAMMAS), "kappa": 1.0,
                     "v_min": -10.0, "v_max": 10.0, "v_step": 0.1},
}

REQUIRED = {"solve": ["mdp"], "td": ["mdp"], "qvalues": ["mdp", "values"],
            "contraction": ["mdp"], "validate": ["mdp"]}


class BadArguments(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise BadArguments(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_transform(p):
    g = p.add_argument_group("transform")
    g.add_argument("--transform", choices=sorted(TRANSFORM_KINDS),
                   help="target family (default linear)")
    g.add_argument("--gamma", type=float, help="discount parameter (default 0.9)")
    g.add_argument("--k", type=float, help="hyperbolic parameter (default 1.0)")
    g.add_argument("--kappa", type=float, help="contraction cap in (0, 1] (default 1.0)")
    g.add_argument("--r-ref", dest="r_ref", type=float, help="reference reward (default 1.0)")
    g.add_argument("--squash-eps", dest="squash_eps", type=float,
                   help="linear term of the squash function (default 0.01)")


def _add_common(p):
    p.add_argument("--config", help="JSON file with settings; flags override it")
    p.add_argument("--out", help="output directory (default .)")
    p.add_argument("--seed", type=int, help="random seed (default 0, or $NLB_SEED)")
    p.add_argument("--no-figures", dest="figures", action="store_false",
                   help="skip matplotlib PNG figures")


def _add_model(p, policy=True):
    p.add_argument("--mdp", help="MDP JSON file")
    if policy:
        p.add_argument("--policy", help="policy JSON file (default: uniform)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nlbellman", description="Non-linear Bellman equations on tabular MDPs.",
                     argument_default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("validate", help="check an MDP (and policy) file",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--config")
    _add_model(p)

    p = sub.add_parser("solve", help="fixed-point iteration -> values.json, diagnostics.json",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    _add_model(p)
    _add_transform(p)
    p.add_argument("--v0", help="initial values (JSON array)")
    p.add_argument("--tol", type=float, help="sup-norm residual tolerance (default 1e-10)")
    p.add_argument("--max-iters", dest="max_iters", type=int, help="sweep limit (default 100000)")

    p = sub.add_parser("td", help="tabular TD(0) -> values.json, diagnostics.json",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    _add_model(p)
    _add_transform(p)
    p.add_argument("--v0", help="initial values (JSON array)")
    p.add_argument("--alpha", type=float, help="constant step size (default 0.05)")
    p.add_argument("--visit-decay", dest="visit_decay", action="store_true",
                   help="use 1/n(s) step sizes instead of alpha")
    p.add_argument("--episodes", type=int, help="number of episodes (default 1000)")
    p.add_argument("--horizon", type=int, help="episode truncation (default 1000)")

    p = sub.add_parser("qvalues", help="action values and greedy policy from a values file",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    _add_model(p)
    _add_transform(p)
    p.add_argument("--values", help="values.json as written by solve or td")

    p = sub.add_parser("contraction", help="empirical contraction factor of T^f",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    _add_model(p)
    _add_transform(p)
    p.add_argument("--pairs", type=int, help="random value pairs (default 500)")
    p.add_argument("--v-max", dest="v_max", type=float,
                   help="sampling box half-width (default R_max/(1-gamma))")

    p = sub.add_parser("verify-ordering", help="sparse-reward ordering grid -> ordering.csv",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    p.add_argument("--gamma", type=float, help="exponential discount (default 0.9)")
    p.add_argument("--k", type=float, help="hyperbolic parameter (default 0.1)")
    p.add_argument("--r-ref", dest="r_ref", type=float, help="reference reward (default 1.0)")
    p.add_argument("--outer-log", dest="outer_log", action="store_true",
                   help="compare log G0 with log r")
    p.add_argument("--R", type=_floats, help="comma-separated rewards (default 0.5..5 step 0.25)")
    p.add_argument("--t-max", dest="t_max", type=int, help="largest delay T (default 50)")

    p = sub.add_parser("sweep-gaps", help="action gaps of the risk example -> gaps.csv/.svg",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    p.add_argument("--family", choices=["power", "linear"], help="discount family (default power)")
    p.add_argument("--kappa", type=float, help="contraction cap (default 1.0)")
    p.add_argument("--p", type=_floats, help="success probabilities (default 0.05,0.1,0.25,0.5,1)")
    p.add_argument("--gamma-step", dest="gamma_step", type=float,
                   help="gamma grid spacing on [0, 1] (default 0.01)")
    p.add_argument("--embedded", action="store_true",
                   help="solve the successor values in a 5-state MDP instead of injecting them")

    p = sub.add_parser("sweep-curves", help="linear vs power discount curves -> curves.csv/.svg",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    p.add_argument("--gammas", type=_floats, help="discount parameters (default 0.25,...,0.99)")
    p.add_argument("--kappa", type=float, help="contraction cap (default 1.0)")
    p.add_argument("--v-min", dest="v_min", type=float, help="grid start (default -10)")
    p.add_argument("--v-max", dest="v_max", type=float, help="grid end (default 10)")
    p.add_argument("--v-step", dest="v_step", type=float, help="grid spacing (default 0.1)")
    return parser


def _settings(command: str, flags: dict) -> dict:
    cfg = dict(DEFAULTS[command])
    if "seed" in cfg and os.environ.get("NLB_SEED"):
        try:
            cfg["seed"] = int(os.environ["NLB_SEED"])
        except ValueError:
            raise BadArguments(f"NLB_SEED must be an integer, got {os.environ['NLB_SEED']!r}")
    config_path = flags.pop("config", None)
    if config_path:
        data = io.read_json(config_path)
        if not isinstance(data, dict):
            raise BadArguments("config file must hold a JSON object")
        data = dict(data)
        nested = data.pop("transform", None)
        if isinstance(nested, dict):
            nested = dict(nested)
            if "kind" in nested:
                data["transform"] = nested.pop("kind")
            data.update(nested)
        elif nested is not None:
            data["transform"] = nested
        data = {key.replace("-", "_"): val for key, val in data.items()}
        unknown = sorted(set(data) - set(cfg))
        if unknown:
            raise BadArguments(f"unknown config keys for {command}: {', '.join(unknown)}")
        cfg.update(data)
    cfg.update(flags)
    for key in REQUIRED.get(command, []):
        if cfg.get(key) is None:
            raise BadArguments(f"{command} needs --{key}")
    return cfg


def spec_from_settings(cfg: dict) -> TransformSpec:
    name = str(cfg["transform"]).replace("-", "_")
    if name not in TRANSFORM_KINDS:
        raise BadArguments(f"unknown transform {cfg['transform']!r}")
    kind, family = TRANSFORM_KINDS[name]
    try:
        return TransformSpec(kind, gamma=float(cfg["gamma"]), k=float(cfg["k"]),
                             kappa=float(cfg["kappa"]), r_ref=float(cfg["r_ref"]),
                             squash_eps=float(cfg["squash_eps"]), family=family)
    except ValueError as exc:
        raise BadArguments(str(exc))


def _load_model(cfg):
    mdp = mdp_from_dict(io.read_json(cfg["mdp"]))
    issues = validate(mdp)
    if issues:
        raise ValueError(f"{cfg['mdp']}: " + "; ".join(issues))
    policy = policy_from_dict(io.read_json(cfg["policy"])) if cfg.get("policy") else Policy.uniform(mdp)
    issues = validate_policy(policy, mdp)
    if issues:
        raise ValueError(f"{cfg.get('policy') or 'policy'}: " + "; ".join(issues))
    return mdp, policy


def _out_dir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_values(path, n_states):
    v = io.read_json(path)
    if not isinstance(v, list) or len(v) != n_states:
        raise ValueError(f"{path}: expected a JSON array of {n_states} numbers")
    return np.asarray(v, dtype=float)


def cmd_validate(cfg):
    mdp = mdp_from_dict(io.read_json(cfg["mdp"]))
    issues = validate(mdp)
    if not issues and cfg.get("policy"):
        issues = validate_policy(policy_from_dict(io.read_json(cfg["policy"])), mdp)
    if issues:
        print(f"error: {cfg['mdp']}: " + "; ".join(issues), file=sys.stderr)
        return EXIT_DOMAIN
    print(f"{cfg['mdp']}: valid ({mdp.n_states} states, {mdp.n_actions} actions)")
    return EXIT_OK


def cmd_solve(cfg):
    mdp, policy = _load_model(cfg)
    spec = spec_from_settings(cfg)
    v0 = _load_values(cfg["v0"], mdp.n_states) if cfg.get("v0") else None
    v, diag = fixed_point(mdp, policy, spec, v0, tol=float(cfg["tol"]),
                          max_iters=int(cfg["max_iters"]))
    out = _out_dir(cfg)
    io.write_json(v.tolist(), out / "values.json")
    io.write_json(diag.to_dict(), out / "diagnostics.json")
    print(f"converged in {diag.iterations} sweeps, residual {diag.final_residual:.3e}")
    return EXIT_OK


def cmd_td(cfg):
    mdp, policy = _load_model(cfg)
    spec = spec_from_settings(cfg)
    v0 = _load_values(cfg["v0"], mdp.n_states) if cfg.get("v0") else None
    try:
        tdcfg = TdConfig(alpha=float(cfg["alpha"]), episodes=int(cfg["episodes"]),
                         horizon=int(cfg["horizon"]), seed=int(cfg["seed"]),
                         visit_decay=bool(cfg["visit_decay"]))
    except ValueError as exc:
        raise BadArguments(str(exc))
    v, diag = td0(mdp, policy, spec, tdcfg, v0)
    out = _out_dir(cfg)
    io.write_json(v.tolist(), out / "values.json")
    io.write_json(diag.to_dict(), out / "diagnostics.json")
    print(f"{diag.iterations} episodes, Bellman residual {diag.final_residual:.3e}")
    return EXIT_OK


def cmd_qvalues(cfg):
    mdp, policy = _load_model(cfg)
    spec = spec_from_settings(cfg)
    v = _load_values(cfg["values"], mdp.n_states)
    q = action_values(mdp, policy, spec, v)
    out = _out_dir(cfg)
    io.write_json(q.tolist(), out / "qvalues.json")
    io.write_json(policy_to_dict(greedy_policy(q)), out / "greedy_policy.json")
    print(f"wrote {out / 'qvalues.json'}")
    return EXIT_OK


def cmd_contraction(cfg):
    mdp, policy = _load_model(cfg)
    spec = spec_from_settings(cfg)
    est = empirical_contraction(mdp, policy, spec, pairs=int(cfg["pairs"]),
                                v_max=cfg["v_max"], seed=int(cfg["seed"]))
    bound = lipschitz_bound(spec)
    out = _out_dir(cfg)
    io.write_json({"empirical_contraction": est,
                   "lipschitz_bound": None if np.isnan(bound) else bound,
                   "pairs": int(cfg["pairs"])}, out / "contraction.json")
    print(f"empirical contraction {est:.6g} (analytic bound "
          f"{'unknown' if np.isnan(bound) else f'{bound:.6g}'})")
    return EXIT_OK


def cmd_verify_ordering(cfg):
    gamma, k, r_ref = float(cfg["gamma"]), float(cfg["k"]), float(cfg["r_ref"])
    if not 0 < gamma < 1 or k <= 0 or r_ref <= 0:
        raise BadArguments("need 0 < gamma < 1, k > 0 and r_ref > 0")
    R_grid = [float(x) for x in cfg["R"]]
    T_grid = list(range(int(cfg["t_max"]) + 1))
    verdicts = returns.verify_ordering_equivalence(gamma, k, r_ref, R_grid, T_grid,
                                                   bool(cfg["outer_log"]))
    grid = experiments.ordering_grid(gamma, k, r_ref, R_grid, T_grid, bool(cfg["outer_log"]))
    out = _out_dir(cfg)
    io.emit_csv(verdicts, out / "ordering.csv")
    io.write_json({key: grid.metadata[key] for key in
                   ("gamma", "k", "r_ref", "outer_log", "agreement_fraction", "eligible",
                    "boundary_count", "no_eligible_cells")}, out / "ordering_summary.json")
    if cfg["figures"]:
        from .plotting import plot_ordering
        plot_ordering(grid, out / "ordering.png")
    md = grid.metadata
    print(f"agreement {md['agreement_fraction']:.6f} over {md['eligible']} cells "
          f"({md['boundary_count']} on the boundary)")
    return EXIT_OK


def _emit_sweep(result, out: Path, stem: str, figures: bool):
    io.emit_csv(result, out / f"{stem}.csv")
    io.emit_svg_lineplot(result, out / f"{stem}.svg")
    if figures:
        from .plotting import plot_sweep
        plot_sweep(result, out / f"{stem}.png")


def _grid(lo, hi, step):
    if step <= 0 or hi < lo:
        raise BadArguments("grid needs step > 0 and max >= min")
    n = int(round((hi - lo) / step))
    return [lo + i * (hi - lo) / n for i in range(n + 1)] if n else [lo]


def cmd_sweep_gaps(cfg):
    gammas = _grid(0.0, 1.0, float(cfg["gamma_step"]))
    result = experiments.action_gap_sweep(cfg["p"], gammas, cfg["family"], float(cfg["kappa"]),
                                          bool(cfg["embedded"]))
    out = _out_dir(cfg)
    _emit_sweep(result, out, "gaps", cfg["figures"])
    print(f"wrote {out / 'gaps.csv'} and {out / 'gaps.svg'}")
    return EXIT_OK


def cmd_sweep_curves(cfg):
    v_grid = _grid(float(cfg["v_min"]), float(cfg["v_max"]), float(cfg["v_step"]))
    result = experiments.discount_curves(cfg["gammas"], v_grid, float(cfg["kappa"]))
    out = _out_dir(cfg)
    _emit_sweep(result, out, "curves", cfg["figures"])
    print(f"wrote {out / 'curves.csv'} and {out / 'curves.svg'}")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate, "solve": cmd_solve, "td": cmd_td, "qvalues": cmd_qvalues,
    "contraction": cmd_contraction, "verify-ordering": cmd_verify_ordering,
    "sweep-gaps": cmd_sweep_gaps, "sweep-curves": cmd_sweep_curves,
}


def _fail(code: int, exc: BaseException) -> int:
    msg = " ".join(str(exc).split()) or type(exc).__name__
    print(f"error: {msg}", file=sys.stderr)
    return code


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if not getattr(ns, "command", None):
            raise BadArguments("a subcommand is required (see --help)")
        flags = {key: val for key, val in vars(ns).items() if key != "command"}
        cfg = _settings(ns.command, flags)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            code = COMMANDS[ns.command](cfg)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        return code
    except BadArguments as exc:
        return _fail(EXIT_ARGS, exc)
    except SolverError as exc:
        return _fail(EXIT_SOLVER, exc)
    except (ValueError, ArithmeticError, OSError) as exc:
        return _fail(EXIT_DOMAIN, exc)


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
