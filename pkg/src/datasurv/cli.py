"""Command line entry point: ``datasurv <command> [flags]``.

Exit status is 0 on success, 1 for usage or validation errors and 2 for
runtime failures (divergence, I/O).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from datasurv import abm, experiments
from datasurv.abm import AbmConfig, StrategyConfig
from datasurv.analytics import classify_outcome
from datasurv.errors import ConfigError, DataSurvError, DivergenceError, InvalidParameterError, InvalidStateError, UndefinedThresholdError
from datasurv.io_config import (
    TOOL_VERSION,
    OdeRunConfig,
    RunManifest,
    config_from_dict,
    config_to_dict,
    load_config,
    load_manifest,
    write_results,
)
from datasurv.ode import integrate, peak_informed

log = logging.getLogger("datasurv")

COMMANDS = ("ode", "abm", "sweep", "analyze", "compare", "repro")
VALIDATION_ERRORS = (ConfigError, InvalidParameterError, InvalidStateError, UndefinedThresholdError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser, default_seed=None):
    p.add_argument("--config", help="JSON config or manifest.json of an earlier run")
    p.add_argument("--seed", type=int, default=default_seed)
    p.add_argument("--out", help="output directory (default: out/<command>)")
    p.add_argument("--json", action="store_true", help="machine-readable stdout")
    p.add_argument("--fractions", action="store_const", const=True, default=None,
                   help="states are network fractions; otherwise node counts out of --n")


def _model_flags(p):
    p.add_argument("--variant")
    p.add_argument("--b", type=float, help="contact rate (unscaled beta)")
    p.add_argument("--c", type=float, help="compromise/recovery rate")
    p.add_argument("--m", type=float)
    p.add_argument("--m-prime", type=float)
    p.add_argument("--l", type=float)
    p.add_argument("--n", type=float, help="population when not using --fractions (default 10000)")
    p.add_argument("--s0", type=float)
    p.add_argument("--i0", type=float)
    p.add_argument("--r-init", type=float)


def _abm_flags(p):
    p.add_argument("--variant")
    p.add_argument("--b", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--m", type=float)
    p.add_argument("--m-prime", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--init-i", type=float, dest="init_i_fraction")
    p.add_argument("--t-steps", type=int)
    p.add_argument("--k-topology", type=int)
    p.add_argument("--strategy", dest="kind")
    p.add_argument("--k", type=int)
    p.add_argument("--k-max", type=int)
    p.add_argument("--iter-max", type=int)
    p.add_argument("--tx-cost", type=float)
    p.add_argument("--idle-cost", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--initial-battery", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="datasurv", description="Data survivability models for sensor networks.")
    parser.add_argument("--version", action="version", version=f"datasurv {TOOL_VERSION}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("ode", help="integrate one ODE variant")
    _common(p)
    _model_flags(p)
    p.add_argument("--t-end", type=float)
    p.add_argument("--dt", type=float)

    p = sub.add_parser("analyze", help="thresholds, peak, floor and equilibrium from parameters")
    _common(p)
    _model_flags(p)

    p = sub.add_parser("abm", help="one stochastic network run")
    _common(p)
    _abm_flags(p)

    p = sub.add_parser("sweep", help="ABM parameter sweep over values x seeds")
    _common(p)
    _abm_flags(p)
    p.add_argument("--axis", help="config field, or comma-joined fields swept jointly (e.g. b,c)")
    p.add_argument("--values", help="comma-separated values; joint values use ':' (0.5:0.1,0.2:0.15)")
    p.add_argument("--seeds", type=int)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("compare", help="ODE vs seed-averaged mean-field ABM")
    _common(p)
    _abm_flags(p)
    p.add_argument("--seeds", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("repro", help="named figure presets")
    _common(p, default_seed=None)
    p.add_argument("preset", nargs="?", help="preset name, 'all' or 'list'")
    return parser


def _given(ns, names) -> dict:
    return {k: getattr(ns, k) for k in names if getattr(ns, k, None) is not None}


def _resolve_ode(ns, command: str) -> OdeRunConfig:
    base = {}
    if ns.config:
        loaded = load_config(ns.config)
        if not isinstance(loaded, OdeRunConfig):
            raise ConfigError(f"{command} needs an ODE config, got an ABM config", field="kind")
        base = loaded.to_dict()
        # let defaults be re-derived when the population changes
        if ns.fractions or ns.n is not None:
            base.pop("s0", None)
            base.pop("i0", None)
    else:
        for flag in ("b", "c"):
            if getattr(ns, flag) is None:
                raise ConfigError(f"missing required flag --{flag}", field=flag)
        base["fractions"] = False
        base["n"] = 10000.0
    if ns.fractions:
        base["fractions"] = True
        base["n"] = 1.0
    over = _given(ns, ("variant", "b", "c", "m", "m_prime", "l", "n", "s0", "i0", "r_init", "seed"))
    over.update(_given(ns, ("t_end", "dt")))
    if over.get("n") is not None and base.get("fractions"):
        raise ConfigError("--n cannot be combined with --fractions", field="n")
    base.update(over)
    return config_from_dict({"kind": "ode", **base})


ABM_FIELDS = ("variant", "b", "c", "m", "m_prime", "n", "init_i_fraction", "t_steps", "k_topology", "seed")
STRATEGY_FIELDS = ("kind", "k", "k_max", "iter_max", "tx_cost", "idle_cost", "tau", "initial_battery")


def _resolve_abm(ns, command: str) -> AbmConfig:
    if ns.config:
        loaded = load_config(ns.config)
        if not isinstance(loaded, AbmConfig):
            raise ConfigError(f"{command} needs an ABM config, got an ODE config", field="kind")
        base = config_to_dict(loaded)
    else:
        # unlike the ODE commands, every ABM field has a network-scale default
        base = config_to_dict(AbmConfig())
    if ns.fractions is not None:
        log.debug("--fractions has no effect on ABM runs (b is always per-fraction)")
    base.update(_given(ns, ABM_FIELDS))
    base["strategy"] = {**base["strategy"], **_given(ns, STRATEGY_FIELDS)}
    return config_from_dict(base)


def _parse_values(text: str, joint: int) -> list:
    values = []
    for item in text.split(","):
        parts = [float(x) for x in item.split(":")]
        if len(parts) != joint:
            raise ConfigError(f"value {item!r} needs {joint} ':'-separated numbers", field="values")
        values.append(parts[0] if joint == 1 else tuple(parts))
    return values


def _manifest_args(ns) -> dict:
    """Extra command arguments recorded in the manifest (config-file keys excluded)."""
    if not ns.config:
        return {}
    data = json.loads(Path(ns.config).read_text())
    if isinstance(data, dict) and "tool_version" in data:
        return data.get("args", {})
    return {}


def resolve(ns) -> tuple[object, dict]:
    """Turn parsed flags into ``(config, extra_args)`` for :func:`execute`."""
    cmd = ns.command
    if cmd in ("ode", "analyze"):
        return _resolve_ode(ns, cmd), {}
    if cmd == "abm":
        return _resolve_abm(ns, cmd), {}
    if cmd == "sweep":
        prev = _manifest_args(ns)
        axis = ns.axis or prev.get("axis")
        if not axis:
            raise ConfigError("missing required flag --axis", field="axis")
        if ns.values is not None:
            values = _parse_values(ns.values, len(axis.split(",")))
        elif "values" in prev:
            values = [tuple(v) if isinstance(v, list) else v for v in prev["values"]]
        else:
            raise ConfigError("missing required flag --values", field="values")
        seeds = ns.seeds or prev.get("seeds", 1)
        return _resolve_abm(ns, cmd), {"axis": axis, "values": values, "seeds": seeds, "workers": ns.workers}
    if cmd == "compare":
        prev = _manifest_args(ns)
        seeds = ns.seeds or prev.get("seeds", 32)
        dt = ns.dt or prev.get("dt", 0.01)
        return _resolve_abm(ns, cmd), {"seeds": seeds, "dt": dt, "workers": ns.workers}
    if cmd == "repro":
        prev = _manifest_args(ns)
        preset = ns.preset or prev.get("preset")
        if not preset:
            raise ConfigError("repro needs a preset name (try 'repro list')", field="preset")
        seed = ns.seed if ns.seed is not None else prev.get("seed", 0)
        return None, {"preset": preset, "seed": seed}
    raise ConfigError(f"unknown command {cmd!r}")


def execute(command: str, config, args: dict) -> tuple[dict, dict, dict]:
    """Run a resolved command. Returns ``(results, summary, config_dict)``."""
    if command == "ode":
        traj = integrate(config.variant, config.params(), config.initial_state(), config.t_end, config.dt)
        t_peak, i_peak = peak_informed(traj)
        last = traj[-1]
        summary = {"t_peak": t_peak, "i_peak": i_peak, "final": {"t": last.t, "s": last.s, "i": last.i, "r": last.r},
                   "samples": len(traj)}
        return {"trajectory.csv": traj}, summary, config_to_dict(config)
    if command == "analyze":
        report = classify_outcome(config.variant, config.params(), config.s0, config.i0, config.n)
        return {"outcome.json": report}, report.to_dict(), config_to_dict(config)
    if command == "abm":
        res = abm.run(config)
        return {"abm.csv": res}, res.summary(), config_to_dict(config)
    if command == "sweep":
        axis = args["axis"]
        table = abm.sweep(config, axis, args["values"], args["seeds"], workers=args.get("workers", 1))
        return {"sweep.csv": table}, {"rows": table.aggregates()}, config_to_dict(config)
    if command == "compare":
        cmp = experiments.compare(config, seeds=args["seeds"], dt=args["dt"], workers=args.get("workers", 1))
        metrics = cmp.metrics()
        return {"compare.csv": cmp, "metrics.json": metrics}, metrics, config_to_dict(config)
    if command == "repro":
        results, configs = experiments.run_preset(args["preset"], seed=args["seed"])
        summary = {"preset": args["preset"], "files": sorted(results)}
        return results, summary, configs
    raise ConfigError(f"unknown command {command!r}")


def _jsonable_args(args: dict) -> dict:
    out = dict(args)
    out.pop("workers", None)
    if "values" in out:
        out["values"] = [list(v) if isinstance(v, tuple) else v for v in out["values"]]
    return out


def run_command(command: str, config, args: dict, out_dir) -> tuple[list[Path], dict]:
    start = time.perf_counter()
    results, summary, cfg = execute(command, config, args)
    seeds = []
    if isinstance(config, AbmConfig):
        n = args.get("seeds", 1)
        seeds = list(range(config.seed, config.seed + n))
    elif "seed" in args:
        seeds = [args["seed"]]
    elif config is not None:
        seeds = [config.seed]
    manifest = RunManifest(command=command, config=cfg, seeds=seeds, args=_jsonable_args(args),
                           duration_s=round(time.perf_counter() - start, 6))
    return write_results(results, manifest, out_dir), summary


def reproduce(manifest_path, out_dir) -> list[Path]:
    """Re-run a recorded command from its manifest into ``out_dir``."""
    manifest = load_manifest(manifest_path)
    if manifest.command == "repro":
        config = None
    else:
        config = config_from_dict(manifest.config)
    args = dict(manifest.args)
    if "values" in args:
        args["values"] = [tuple(v) if isinstance(v, list) else v for v in args["values"]]
    paths, _ = run_command(manifest.command, config, args, out_dir)
    return paths


def _print_summary(command: str, summary: dict, paths, as_json: bool) -> None:
    if as_json or command == "analyze":
        print(json.dumps(summary, indent=2, sort_keys=True, default=float))
    else:
        for key, value in summary.items():
            if key == "rows":
                for row in value:
                    print(f"  {row['axis']}={row['value']}: peak_i={row['peak_i']:.1f} "
                          f"t_peak={row['t_peak']:.2f} final_mean_battery={row['final_mean_battery']:.4f}")
            else:
                print(f"{key}: {value}")
    if not as_json:
        for p in paths:
            print(f"wrote {p}", file=sys.stderr)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            parser.print_usage(sys.stderr)
            raise UsageError("datasurv: error: a command is required")
        if ns.command == "repro" and ns.preset in ("list", None) and not ns.config:
            for name, (desc, _) in experiments.PRESETS.items():
                print(f"{name:8s} {desc}")
            return 0
        if ns.command == "repro" and ns.preset == "all":
            for name in experiments.PRESETS:
                out = Path(ns.out or "out") / name
                paths, summary = run_command("repro", None, {"preset": name, "seed": ns.seed or 0}, out)
                _print_summary("repro", summary, paths, ns.json)
            return 0
        config, args = resolve(ns)
        out_dir = ns.out or str(Path("out") / (args.get("preset") or ns.command))
        paths, summary = run_command(ns.command, config, args, out_dir)
        _print_summary(ns.command, summary, paths, ns.json)
        return 0
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except VALIDATION_ERRORS as exc:
        print(f"datasurv: error: {exc}", file=sys.stderr)
        return 1
    except (DivergenceError, OSError, DataSurvError) as exc:
        print(f"datasurv: runtime error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
