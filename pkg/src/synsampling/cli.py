"""Command line entry point: ``synsampling {run,tables,capacity,energy,exp-test,rng-test}``."""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import re
import sys
import time
from pathlib import Path

from . import costmodel
from .accel import (DEFAULT_SEED, exp_accel_many, exp_error_lsb, exp_golden, exp_grid,
                    exp_scan_exhaustive, kiss_block, kiss_golden)
from .neuron import NeuronConfig
from .plasticity import MODES, PlasticityConfig
from .runtime import OUTPUTS, PARALLEL, SEQUENTIAL, SimConfig, run_experiment
from .task import TaskConfig

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# [run] keys map to SimConfig scalars plus the output directory
_RUN_KEYS = {"seed", "duration", "out", "accel", "dram", "rewiring", "schedule", "record_inputs"}
_NETWORK_KEYS = {"n_cores", "neurons_per_core", "n_inputs", "synapses_per_pair", "reserve"}
_SECTIONS = {
    "run": None,
    "network": None,
    "neuron": NeuronConfig,
    "plasticity": PlasticityConfig,
    "task": TaskConfig,
}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _coerce(template, text: str):
    if template is None:            # optional float fields
        return float(text)
    if isinstance(template, bool):
        return _parse_bool(text)
    if isinstance(template, int):
        return int(text)
    if isinstance(template, float):
        return float(text)
    return text.strip()


def _line_of(lines: list[str], section: str, key: str | None) -> int:
    current = None
    for n, line in enumerate(lines, 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return n
            continue
        if current == section and key is not None:
            if re.match(rf"\s*{re.escape(key)}\s*[=:]", line, re.IGNORECASE):
                return n
    return 0


def load_config(path) -> dict:
    """Read an INI file into {section: {key: value}} with typed values.

    Unknown sections or keys and malformed values raise ``ConfigError`` naming
    the file and line.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror or exc})") from exc
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    lines = text.splitlines()
    defaults = {
        "run": {"seed": 0, "duration": 1200.0, "out": "results", "accel": True, "dram": False,
                "rewiring": "realloc", "schedule": SEQUENTIAL, "record_inputs": False},
        "network": {k: getattr(SimConfig(), k) for k in _NETWORK_KEYS},
    }
    out: dict = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{path}:{_line_of(lines, section, None)}: unknown section [{section}]")
        cls = _SECTIONS[section]
        template = defaults[section] if cls is None else {
            f.name: getattr(cls(), f.name) for f in dataclasses.fields(cls)}
        values = {}
        for key, raw in parser.items(section):
            line = _line_of(lines, section, key)
            if key not in template:
                raise ConfigError(f"{path}:{line}: unknown key {key!r} in [{section}]")
            try:
                values[key] = _coerce(template[key], raw)
            except ValueError as exc:
                raise ConfigError(f"{path}:{line}: bad value for {key!r}: {exc}") from exc
        out[section] = values
    return out


def build_sim_config(conf: dict, overrides: dict) -> tuple[SimConfig, Path]:
    run = dict(conf.get("run", {}))
    run.update({k: v for k, v in overrides.items() if v is not None})
    out_dir = Path(run.pop("out", "results"))
    if run.get("rewiring", "realloc") not in MODES:
        raise ConfigError(f"rewiring must be one of {MODES}")
    try:
        neuron = NeuronConfig(**conf.get("neuron", {}))
        plast = PlasticityConfig(**conf.get("plasticity", {}))
        task = TaskConfig(**conf.get("task", {}))
        cfg = SimConfig(neuron=neuron, plasticity=plast, task=task,
                        **conf.get("network", {}), **run)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, out_dir


# ---------------------------------------------------------------------------
# table rendering
# ---------------------------------------------------------------------------

def _render(rows: list[dict], fmt: str) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    if fmt == "csv":
        body = [",".join(cols)] + [",".join(str(r[c]) for c in cols) for r in rows]
    else:
        body = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
        body += ["| " + " | ".join(str(r[c]) for c in cols) + " |" for r in rows]
    return "\n".join(body) + "\n"


def tables_text(fmt: str = "markdown", which=("cycles", "capacity", "energy")) -> str:
    parts = []
    if "cycles" in which:
        parts.append(("cycles per plasticity update", costmodel.cycle_table()))
    if "capacity" in which:
        parts.append(("maximum synapses per core", costmodel.capacity_table()))
    if "energy" in which:
        parts.append(("power and energy per time step", costmodel.energy_table()))
    chunks = []
    for title, rows in parts:
        head = f"# {title}\n" if fmt == "csv" else f"### {title}\n\n"
        chunks.append(head + _render(rows, fmt))
    return "\n".join(chunks)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    try:
        conf = load_config(args.config) if args.config else {}
        overrides = {"seed": args.seed, "duration": args.duration, "out": args.out,
                     "rewiring": args.rewiring, "schedule": args.schedule,
                     "accel": None if args.accel is None else args.accel == "on",
                     "dram": None if args.dram is None else args.dram == "on"}
        cfg, out_dir = build_sim_config(conf, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    def progress(t, total):
        if args.verbose:
            print(f"\r{t}/{total} steps", end="", file=sys.stderr, flush=True)

    try:
        summary, _, _ = run_experiment(cfg, out_dir, progress=progress)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.verbose:
        print(file=sys.stderr)
    missing = [n for n in OUTPUTS if not (out_dir / n).is_file()]
    report = {"final_reward": summary.final_reward, "turnover": summary.turnover,
              "wall_time_s": round(summary.wall_time_s, 3), "out": str(out_dir)}
    print(json.dumps(report))
    if missing:
        print(f"error: missing outputs in {out_dir}: {missing}", file=sys.stderr)
        return EXIT_ERROR
    if summary.half_overflows or not summary.deliveries_ok:
        print(f"error: invariant counters fired (binary16 overflows={summary.half_overflows}, "
              f"deliveries_ok={summary.deliveries_ok})", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_tables(args) -> int:
    sys.stdout.write(tables_text(args.format))
    return EXIT_OK


def cmd_capacity(args) -> int:
    sys.stdout.write(tables_text(args.format, ("capacity",)))
    return EXIT_OK


def cmd_energy(args) -> int:
    sys.stdout.write(tables_text(args.format, ("energy",)))
    return EXIT_OK


def cmd_exp_test(args) -> int:
    t = time.perf_counter()
    ops, ref = exp_golden()
    got = exp_accel_many(ops)
    golden = int(max(abs(int(a) - int(b)) for a, b in zip(got, ref)))
    grid = float(exp_error_lsb(exp_grid()).max())
    ok = golden <= 1 and grid <= 1.0
    print(f"golden vectors: {len(ops)} operands, max |diff| = {golden} LSB")
    print(f"grid (2^20 points): max error = {grid:.4f} LSB")
    if args.exhaustive:
        worst = exp_scan_exhaustive()
        ok = ok and worst <= 1.0
        print(f"exhaustive (2^32 operands): max error = {worst:.4f} LSB")
    print(f"{'PASS' if ok else 'FAIL'} ({time.perf_counter() - t:.1f} s)")
    return EXIT_OK if ok else EXIT_ERROR


def cmd_rng_test(args) -> int:
    ref = kiss_golden()
    got, _ = kiss_block(DEFAULT_SEED, len(ref))
    bad = sum(int(a) != b for a, b in zip(got, ref))
    print(f"KISS golden vectors: {len(ref)} outputs, {bad} mismatches")
    print("PASS" if bad == 0 else "FAIL")
    return EXIT_OK if bad == 0 else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="synsampling", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the closed-loop learning experiment")
    r.add_argument("--config", metavar="PATH")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", metavar="DIR")
    r.add_argument("--accel", choices=("on", "off"))
    r.add_argument("--dram", choices=("on", "off"))
    r.add_argument("--rewiring", choices=MODES)
    r.add_argument("--schedule", choices=(SEQUENTIAL, PARALLEL))
    r.add_argument("--duration", type=float, metavar="SECONDS")
    r.add_argument("-v", "--verbose", action="store_true")
    r.set_defaults(func=cmd_run)

    for name, fn, text in (("tables", cmd_tables, "cycle, capacity and energy tables"),
                           ("capacity", cmd_capacity, "capacity table"),
                           ("energy", cmd_energy, "energy table")):
        t = sub.add_parser(name, help=text)
        t.add_argument("--format", choices=("markdown", "csv"), default="markdown")
        t.set_defaults(func=fn)

    e = sub.add_parser("exp-test", help="exp unit golden-vector and grid check")
    e.add_argument("--exhaustive", action="store_true", help="also scan all 2^32 operands")
    e.set_defaults(func=cmd_exp_test)

    k = sub.add_parser("rng-test", help="KISS golden-vector check")
    k.set_defaults(func=cmd_rng_test)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
