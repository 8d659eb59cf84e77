"""Command-line driver: ``superburst run --config cfg.json --out DIR``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, basis, criteria, lindblad
from .channels import collective_channels, gamma_matrix
from .export import config_hash, write_csv, write_json, write_records
from .geometry import GeometryError, disordered_array, giant_ordered, ordered_array
from .giant import crossover_map, giant_system
from .system import point_system
from .trajectories import (
    Controls,
    TrajectoryError,
    imbalance_from_records,
    ratio_from_sequences,
    run_ensemble,
)

PRESETS = {"mirror": math.pi, "generic": math.pi / math.sqrt(3)}
EXPERIMENTS = ("rates", "burst-map", "burst-probability", "imbalance", "ratio-n", "criteria-sweep", "giant")
CAP_ENV = "SUPERBURST_MAX_EMITTERS"

_phase = {"oneOf": [{"type": "number"}, {"enum": sorted(PRESETS)}]}
_num_list = {"type": "array", "items": {"type": "number"}, "minItems": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "superburst experiment",
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "system": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "kd": _phase,
                "gamma_left": {"type": "number", "minimum": 0},
                "gamma_right": {"type": "number", "minimum": 0},
                "gamma_prime": {"type": "number", "minimum": 0},
                "geometry": {"enum": ["ordered", "disordered"]},
                "z_max_phase": {"type": "number", "minimum": 0},
                "include_coherent": {"type": "boolean"},
                "unraveling": {"enum": ["plus_minus", "left_right"]},
            },
        },
        "giant": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "kd": _phase,
                "ka": {"type": "number", "minimum": 0},
                "gamma_point": {"type": "number", "exclusiveMinimum": 0},
                "gamma_prime": {"type": "number", "minimum": 0},
                "topology": {"enum": ["separated", "braided"]},
                "include_coherent": {"type": "boolean"},
            },
        },
        "controls": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_traj": {"type": "integer", "minimum": 1},
                "t_max": {"type": "number", "exclusiveMinimum": 0},
                "dt_max": {"type": "number", "exclusiveMinimum": 0},
                "method": {"enum": ["spectral", "rk4"]},
                "t_cut": _num_list,
                "time_grid": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["stop", "num"],
                    "properties": {
                        "start": {"type": "number", "minimum": 0},
                        "stop": {"type": "number", "exclusiveMinimum": 0},
                        "num": {"type": "integer", "minimum": 2},
                    },
                },
                "n_max": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "write_events": {"type": "boolean"},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "kd": {"type": "array", "items": _phase, "minItems": 1},
                "ka": _num_list,
                "gamma_prime": _num_list,
                "ratio": {"type": "array", "items": {"type": ["number", "null"]}, "minItems": 1},
                "z_max_phase": {"type": "number", "minimum": 0},
                "n_configs": {"type": "integer", "minimum": 1},
                "boundary": {"type": "boolean"},
            },
        },
    },
}

DEFAULT_SYSTEM = {
    "n": 16,
    "kd": "mirror",
    "gamma_left": 0.5,
    "gamma_right": 0.5,
    "gamma_prime": 0.0,
    "geometry": "ordered",
    "z_max_phase": 20 * math.pi,
    "include_coherent": True,
    "unraveling": "left_right",
}
DEFAULT_GIANT = {
    "n": 5,
    "kd": "generic",
    "ka": 0.6,
    "gamma_point": 1.0,
    "gamma_prime": 0.1,
    "topology": "separated",
    "include_coherent": True,
}


class ConfigError(ValueError):
    pass


def phase(value) -> float:
    return PRESETS[value] if isinstance(value, str) else float(value)


def _default_n_traj(kind: str, sysc: dict) -> int:
    chiral = sysc["gamma_left"] != sysc["gamma_right"]
    return {"rates": 2000, "imbalance": 13000 if chiral else 20000, "ratio-n": 5000, "giant": 2000}.get(kind, 1)


def resolve(config: dict, seed=None) -> dict:
    """Validate and fill defaults; the result fully determines the outputs."""
    try:
        jsonschema.validate(config, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config rejected: {exc.message}") from exc
    kind = config["experiment"]
    sysc = {**DEFAULT_SYSTEM, **config.get("system", {})}
    giantc = {**DEFAULT_GIANT, **config.get("giant", {})}
    ctrl = {
        "n_traj": _default_n_traj(kind, sysc),
        "t_max": 10.0,
        "method": "spectral",
        "t_cut": [1.0, 100.0],
        "time_grid": {"start": 0.0, "stop": 2.0, "num": 41},
        "n_max": 5,
        "seed": 0,
        "write_events": False,
        **config.get("controls", {}),
    }
    if seed is not None:
        ctrl["seed"] = int(seed)
    sweep = {
        "n": [2, 3, 4, 5, 6, 7, 8],
        "kd": [0.1 + i * (math.pi - 0.1) / 19 for i in range(20)],
        "ka": [i * math.pi / 20 for i in range(21)],
        "gamma_prime": [0.0, 0.5, 1.0, 2.0, 5.0],
        "ratio": [None],
        "z_max_phase": 20 * math.pi,
        "n_configs": 100,
        "boundary": False,
        **config.get("sweep", {}),
    }
    for n in [sysc["n"], giantc["n"], *sweep["n"]]:
        if n > basis.MAX_EMITTERS:
            raise ConfigError(f"N={n} exceeds the build-time cap {basis.MAX_EMITTERS}")
    if sysc["gamma_left"] + sysc["gamma_right"] <= 0:
        raise ConfigError("gamma_left + gamma_right must be positive")
    return {"experiment": kind, "system": sysc, "giant": giantc, "controls": ctrl, "sweep": sweep}


def build_array(sysc: dict, seed: int):
    if sysc["geometry"] == "ordered":
        return ordered_array(sysc["n"], phase(sysc["kd"]), sysc["gamma_left"], sysc["gamma_right"], sysc["gamma_prime"])
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**32,)))
    return disordered_array(
        sysc["n"], sysc["z_max_phase"], sysc["gamma_left"], sysc["gamma_right"], sysc["gamma_prime"], rng
    )


def _write_channels(out: Path, array) -> Path:
    chans = collective_channels(gamma_matrix(array), gamma_prime=array.gamma_prime)
    path = out / "channels.json"
    path.write_text(chans.to_json() + "\n")
    return path


def _grid(ctrl: dict) -> np.ndarray:
    g = ctrl["time_grid"]
    return np.linspace(g.get("start", 0.0), g["stop"], g["num"])


def _controls(ctrl: dict, t_max: float) -> Controls:
    return Controls(t_max=t_max, dt_max=ctrl.get("dt_max"), method=ctrl["method"])


def _rate_rows(times, curves):
    mean = curves.mean(axis=0)
    n = curves.shape[0]
    se = curves.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return [(float(t), float(m), float(s)) for t, m, s in zip(times, mean, se)]


def run_experiment(cfg: dict, out: Path, workers: int = 1) -> list[Path]:
    kind = cfg["experiment"]
    ctrl, sysc, sweep = cfg["controls"], cfg["system"], cfg["sweep"]
    seed = ctrl["seed"]
    meta = {"config_hash": config_hash(cfg), "seed": seed, "experiment": kind}
    out.mkdir(parents=True, exist_ok=True)
    files = []

    if kind == "rates":
        arr = build_array(sysc, seed)
        system = point_system(arr, sysc["unraveling"], sysc["include_coherent"])
        times = _grid(ctrl)
        controls = _controls(ctrl, float(times[-1]) * (1 + 1e-12) + 1e-12)
        records, curves = run_ensemble(system, ctrl["n_traj"], controls, seed, workers, times)
        meta["n_traj"] = ctrl["n_traj"]
        files.append(write_csv(out / "rates.csv", ["time", "rate", "stderr"], _rate_rows(times, curves), meta))
        files.append(_write_channels(out, arr))
        if ctrl["write_events"]:
            files.append(write_records(out / "trajectories.jsonl", records))

    elif kind == "imbalance":
        if sysc["unraveling"] != "left_right":
            raise ConfigError("imbalance needs the left_right unraveling")
        arr = build_array(sysc, seed)
        system = point_system(arr, "left_right", sysc["include_coherent"])
        files.append(_write_channels(out, arr))
        cuts = sorted(ctrl["t_cut"])
        records, _ = run_ensemble(system, ctrl["n_traj"], _controls(ctrl, cuts[-1]), seed, workers)
        for cut in cuts:
            dist = imbalance_from_records(records, cut)
            counts = {i: round(p * dist.n_finished) for i, p in dist.histogram.items()}
            rows = [(i, dist.histogram[i], counts[i]) for i in dist.histogram]
            m = {
                **meta,
                "n_traj": ctrl["n_traj"],
                "t_cut": cut,
                "fraction_finished": dist.fraction_finished,
                "n_finished": dist.n_finished,
                "variance": dist.variance,
                "empty": dist.empty,
            }
            files.append(write_csv(out / f"imbalance_t{cut:g}.csv", ["imbalance", "probability", "count"], rows, m))
        if ctrl["write_events"]:
            files.append(write_records(out / "trajectories.jsonl", records))

    elif kind == "ratio-n":
        arr = build_array(sysc, seed)
        n_max = min(ctrl["n_max"], arr.n)
        chain_sys = point_system(arr, "left_right", include_coherent=False)
        seqs, _ = run_ensemble(chain_sys, ctrl["n_traj"], _controls(ctrl, 1.0), seed, workers, chain=True)
        jumps = ratio_from_sequences(seqs, n_max)
        full_sys = point_system(arr, "left_right", include_coherent=True)
        records, _ = run_ensemble(full_sys, ctrl["n_traj"], _controls(ctrl, ctrl["t_max"]), seed, workers)
        full = ratio_from_sequences([[lab for _, lab in r.events if lab in ("left", "right")] for r in records], n_max)
        kd = phase(sysc["kd"])
        rows = []
        for (order, rj, sj, cj), (_, rf, sf, cf) in zip(jumps, full):
            rows.append((order, rj, sj, cj, rf, sf, cf, criteria.directional_gn(order, arr.n, kd)[2]))
        meta["n_traj"] = ctrl["n_traj"]
        header = ["n", "r_jumps", "se_jumps", "count_jumps", "r_full", "se_full", "count_full", "r_analytic"]
        files.append(write_csv(out / "ratio_n.csv", header, rows, meta))

    elif kind == "burst-map":
        rows = []
        for n in sweep["n"]:
            for kd in map(phase, sweep["kd"]):
                for gp in sweep["gamma_prime"]:
                    arr = ordered_array(n, kd, sysc["gamma_left"], sysc["gamma_right"], gp)
                    v = criteria.burst_ordered(n, kd, sysc["gamma_left"], sysc["gamma_right"], gp)
                    dyn = lindblad.detect_burst(point_system(arr, "plus_minus"))
                    rows.append((n, kd, gp, v.margin, v.burst, dyn))
        header = ["N", "kd", "gamma_prime", "margin", "criterion_burst", "dynamics_burst"]
        files.append(write_csv(out / "burst_map.csv", header, rows, meta))

    elif kind == "burst-probability":
        rows = []
        for n in sweep["n"]:
            for ratio in sweep["ratio"]:
                r = math.inf if ratio is None else float(ratio)
                p = lindblad.burst_probability(
                    n, r, sweep["z_max_phase"], sweep["n_configs"], seed, sysc["gamma_left"], sysc["gamma_right"]
                )
                rows.append((n, "inf" if ratio is None else r, p))
        meta["n_configs"] = sweep["n_configs"]
        files.append(write_csv(out / "burst_probability.csv", ["N", "ratio", "probability"], rows, meta))
        if sweep["boundary"]:
            finite = [float(r) for r in sweep["ratio"] if r is not None]
            bound = [
                (n, lindblad.burst_boundary(n, finite, sweep["z_max_phase"], sweep["n_configs"], seed,
                                            sysc["gamma_left"], sysc["gamma_right"]))
                for n in sweep["n"]
            ]
            rows = [(n, "none" if b is None else b) for n, b in bound]
            files.append(write_csv(out / "burst_boundary.csv", ["N", "min_ratio"], rows, meta))

    elif kind == "criteria-sweep":
        gl, gr = sysc["gamma_left"], sysc["gamma_right"]
        rows = []
        for n in sweep["n"]:
            for kd in map(phase, sweep["kd"]):
                for gp in sweep["gamma_prime"]:
                    arr = ordered_array(n, kd, gl, gr, gp)
                    chans = collective_channels(gamma_matrix(arr), gamma_prime=gp)
                    v = criteria.burst_ordered(n, kd, gl, gr, gp)
                    u = criteria.burst_universal(n, gl, gr, gp)
                    rows.append((n, kd, gp, v.lhs, v.rhs, v.margin, v.burst, u.burst, criteria.g2_conditional(chans)))
        header = ["N", "kd", "gamma_prime", "lhs", "rhs", "margin", "burst", "universal_burst", "g2"]
        files.append(write_csv(out / "criteria.csv", header, rows, meta))

    elif kind == "giant":
        g = cfg["giant"]
        kd = phase(g["kd"])
        rows = crossover_map(g["n"], [phase(x) for x in sweep["kd"]], sweep["ka"], g["gamma_point"], g["gamma_prime"])
        header = ["kd", "ka", "topology", "lhs", "rhs", "margin", "burst"]
        meta_g = {**meta, "topology": g["topology"]}
        files.append(write_csv(out / "giant_crossover.csv", header, rows, meta_g))
        arr = giant_ordered(g["n"], kd, g["ka"], g["gamma_point"], g["gamma_prime"], g["topology"])
        system = giant_system(arr, g["include_coherent"])
        times = _grid(ctrl)
        controls = _controls(ctrl, float(times[-1]) * (1 + 1e-12) + 1e-12)
        _, curves = run_ensemble(system, ctrl["n_traj"], controls, seed, workers, times)
        files.append(write_csv(out / "giant_rates.csv", ["time", "rate", "stderr"], _rate_rows(times, curves),
                               {**meta_g, "n_traj": ctrl["n_traj"]}))
    return files


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="superburst", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", type=Path, default=Path("out"))
    sub.add_parser("schema", help="print the experiment JSON schema")
    args = parser.parse_args(argv)

    if args.command == "schema":
        print(json.dumps(SCHEMA, indent=2))
        return 0
    if CAP_ENV in os.environ:
        print(f"error: {CAP_ENV} is not honoured; the emitter cap is fixed at {basis.MAX_EMITTERS}", file=sys.stderr)
        return 2
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    if args.workers < 1:
        print("error: --workers must be positive", file=sys.stderr)
        return 2
    try:
        config = json.loads(args.config.read_text())
        cfg = resolve(config, args.seed)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        files = run_experiment(cfg, args.out, args.workers)
    except (ConfigError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TrajectoryError, RuntimeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return 4
    write_json(
        args.out / "metadata.json",
        {
            "config": cfg,
            "config_hash": config_hash(cfg),
            "seed": cfg["controls"]["seed"],
            "version": __version__,
            "outputs": [f.name for f in files],
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        },
    )
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
