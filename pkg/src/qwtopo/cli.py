"""Command-line entry point, run configuration and table output.

Every command takes a flat set of dashed keys (``--delta``, ``--delta-step``,
...). Values come from defaults, then an optional JSON ``--config`` file, then
flags. Angles are radians; on the command line ``pi``, ``pi/2``, ``3pi/4`` and
``3*pi/4`` are accepted as shorthand.

Exit codes: 0 success, 1 invalid input, 2 runtime or I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__, bands, experiments, ssh
from ._numerics import bz_grid
from .errors import ValidationError
from .walk import TWO_PI, CoinState, LatticeState, StepParams, distribution, propagate

OUTPUT_DIR_ENV = "QWTOPO_OUTPUT_DIR"
FORMATS = ("csv", "json")

_PI_RE = re.compile(r"^\s*([+-]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_angle(text: str) -> float:
    """Float or ``[a][*]pi[/b]`` shorthand, e.g. ``pi/2``, ``3pi/4``, ``-2*pi``."""
    m = _PI_RE.match(text)
    if m:
        coef = m.group(1)
        a = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
        b = float(m.group(2)) if m.group(2) else 1.0
        return a * math.pi / b
    return float(text)


# --------------------------------------------------------------------------
# Parameter schema
# --------------------------------------------------------------------------

def _short(x: float) -> str:
    return f"{x:.4f}".rstrip("0").rstrip(".")


def _in_range(lo: float, hi: float) -> Callable[[str, Any], None]:
    def check(key, value):
        if not lo <= value <= hi:
            raise ValidationError(f"{key} must lie in [{_short(lo)}, {_short(hi)}]")
    return check


def _at_least(lo: float, strict: bool = False) -> Callable[[str, Any], None]:
    def check(key, value):
        if value < lo or (strict and value == lo):
            op = ">" if strict else ">="
            raise ValidationError(f"{key} must be {op} {lo:g}, got {value!r}")
    return check


def _coin_check(key, value):
    if value[0] == 0 and value[1] == 0:
        raise ValidationError(f"{key} must be a non-zero pair 'a,b'")


def _each(check):
    def run(key, values):
        if not values:
            raise ValidationError(f"{key} must list at least one value")
        for v in values:
            check(key, v)
    return run


@dataclass(frozen=True)
class Param:
    name: str
    kind: str            # angle | float | int | pair | angles | str
    default: Any
    check: Callable[[str, Any], None] | None = None
    help: str = ""


_DELTA = Param("delta", "angle", math.pi, _in_range(0.0, TWO_PI), "q-plate retardation (rad)")
_WORKERS = Param("workers", "int", 1, _at_least(1), "thread-pool size for sweeps")
_SHOTS = Param("shots", "int", 0, _at_least(0), "sampled photon count per row (0: exact only)")

COMMANDS: dict[str, tuple[str, tuple[Param, ...]]] = {
    "evolve": ("n-step walk from a localized state; dumps P(m)", (
        _DELTA,
        Param("n", "int", 6, _at_least(0), "number of steps"),
        Param("coin", "pair", (0.0, 1.0), _coin_check, "initial coin 'a,b' (normalized)"),
        Param("q", "float", 0.5, _at_least(0.0, strict=True), "q-plate charge"),
    )),
    "bands": ("per-k table of quasi-energy, group velocity and Bloch vector", (
        _DELTA,
        Param("grid", "int", 512, _at_least(2), "k points on [-pi, pi)"),
    )),
    "winding": ("winding number of the Bloch vector", (
        _DELTA,
        Param("grid", "int", 1024, _at_least(64), "k points on [-pi, pi)"),
    )),
    "spreading": ("spreading coefficient L by quadrature, closed form and residues", (
        _DELTA,
        Param("grid", "int", 4096, _at_least(256), "quadrature points"),
    )),
    "sweep-delta": ("finite-n moments against asymptotes over a delta grid", (
        Param("delta-start", "angle", 0.0, _in_range(0.0, TWO_PI)),
        Param("delta-stop", "angle", TWO_PI, _in_range(0.0, TWO_PI)),
        Param("delta-step", "angle", math.pi / 16, _at_least(0.0, strict=True)),
        Param("n", "int", 6, _at_least(1), "number of steps"),
        Param("coin", "pair", (0.0, 1.0), _coin_check, "initial coin 'a,b' (normalized)"),
        _SHOTS, _WORKERS,
    )),
    "sweep-coin": ("moments over meridian coins cos(theta/2)|L> + sin(theta/2)|R>", (
        Param("theta-start", "angle", 0.0, _in_range(0.0, math.pi)),
        Param("theta-stop", "angle", math.pi, _in_range(0.0, math.pi)),
        Param("theta-step", "angle", math.pi / 22, _at_least(0.0, strict=True)),
        Param("deltas", "angles", (math.pi / 4, 3 * math.pi / 8, 3 * math.pi / 4, math.pi),
              _each(_in_range(0.0, TWO_PI)), "comma-separated retardations"),
        Param("n", "int", 6, _at_least(1), "number of steps"),
        _SHOTS, _WORKERS,
    )),
    "sweep-ssh": ("SSH M2/tau^2 against the closed-form L over t'", (
        Param("t", "float", 1.0, _at_least(0.0, strict=True), "intra-cell hopping"),
        Param("t-prime-start", "float", 0.0, _at_least(0.0)),
        Param("t-prime-stop", "float", 2.0, _at_least(0.0)),
        Param("t-prime-step", "float", 2.0 / 25, _at_least(0.0, strict=True)),
        Param("tau", "float", 50.0, _at_least(0.0, strict=True), "evolution time"),
        Param("chi0", "pair", (1.0, 0.0), _coin_check, "initial sublattice spinor 'a,b'"),
        _WORKERS,
    )),
    "ssh-bands": ("per-k table of the SSH lower band", (
        Param("t", "float", 1.0, _at_least(0.0), "intra-cell hopping"),
        Param("t-prime", "float", 1.5, _at_least(0.0), "inter-cell hopping"),
        Param("grid", "int", 512, _at_least(2), "k points on [-pi, pi)"),
    )),
    "detect-kink": ("slope discontinuities of a column in a CSV table", (
        Param("input", "str", "", None, "CSV file written by a sweep command"),
        Param("x", "str", "delta", None, "abscissa column"),
        Param("y", "str", "L_closed", None, "ordinate column"),
        Param("factor", "float", 5.0, _at_least(0.0, strict=True), "threshold in medians"),
        Param("atol", "float", 1e-12, _at_least(0.0), "absolute threshold floor"),
    )),
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run: command, its parameters, and output options."""

    command: str
    params: dict = field(default_factory=dict)
    output: str | None = None
    seed: int = 0
    format: str = "csv"

    def document(self) -> dict:
        doc = {"command": self.command, "format": self.format, "output": self.output,
               "seed": self.seed}
        for key, value in self.params.items():
            doc[key] = list(value) if isinstance(value, tuple) else value
        return doc

    def to_json(self) -> str:
        return json.dumps(self.document(), indent=2)


def _from_cli(param: Param, text: str):
    key = param.name
    try:
        if param.kind == "angle":
            return parse_angle(text)
        if param.kind == "float":
            return float(text)
        if param.kind == "int":
            return int(text)
        if param.kind == "pair":
            parts = [float(p) for p in text.split(",")]
            if len(parts) != 2:
                raise ValueError
            return tuple(parts)
        if param.kind == "angles":
            return tuple(parse_angle(p) for p in text.split(","))
        return text
    except ValueError:
        raise ValidationError(f"--{key}: cannot parse {text!r} as {param.kind}") from None


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _from_json(param: Param, value):
    key, kind = param.name, param.kind
    if kind in ("angle", "float") and _is_number(value):
        return float(value)
    if kind == "int" and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind == "pair" and isinstance(value, list) and len(value) == 2 and all(map(_is_number, value)):
        return tuple(float(v) for v in value)
    if kind == "angles" and isinstance(value, list) and all(map(_is_number, value)):
        return tuple(float(v) for v in value)
    if kind == "str" and isinstance(value, str):
        return value
    raise ValidationError(f"{key}: expected {kind} in radians/plain numbers, got {value!r}")


def _validate_common(command, output, seed, fmt):
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    if fmt not in FORMATS:
        raise ValidationError(f"format must be one of {', '.join(FORMATS)}, got {fmt!r}")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ValidationError(f"seed must be a non-negative integer, got {seed!r}")
    if output is not None and not isinstance(output, str):
        raise ValidationError(f"output must be a path string, got {output!r}")


def _resolve(command: str, file_doc: dict, cli_values: dict, output, seed, fmt) -> RunConfig:
    _validate_common(command, output, seed, fmt)
    schema = {p.name: p for p in COMMANDS[command][1]}
    params = {name: p.default for name, p in schema.items()}
    for key, value in file_doc.items():
        if key not in schema:
            raise ValidationError(f"unknown key {key!r} for command {command!r}")
        params[key] = _from_json(schema[key], value)
    for key, text in cli_values.items():
        params[key] = _from_cli(schema[key], text)
    for name, p in schema.items():
        if p.check is not None:
            p.check(name, params[name])
    return RunConfig(command, params, output, seed, fmt)


def _split_top_level(doc: dict):
    doc = dict(doc)
    top = {k: doc.pop(k) for k in ("command", "output", "seed", "format") if k in doc}
    return top, doc


def _load_document(text: str, origin: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{origin}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{origin}: expected a JSON object of key/value pairs")
    return doc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qwtopo", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"qwtopo {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, (summary, params) in COMMANDS.items():
        p = sub.add_parser(name, help=summary, description=summary)
        p.add_argument("--config", help="JSON file of key/value pairs (flags override it)")
        p.add_argument("--output", "-o", help=f"output path, '-' for stdout "
                                             f"(default: ${OUTPUT_DIR_ENV}/<command>.<format> or stdout)")
        p.add_argument("--format", help="csv (default) or json")
        p.add_argument("--seed", help="base seed for sampled columns (default 0)")
        p.add_argument("--print-config", action="store_true",
                       help="print the resolved configuration as JSON and exit")
        for param in params:
            default = param.default
            shown = ",".join(f"{v:g}" for v in default) if isinstance(default, tuple) else default
            p.add_argument(f"--{param.name}", dest=param.name, default=None,
                           help=f"{param.help} (default: {shown})".strip())
    return parser


def _parse(argv: Sequence[str]) -> tuple[RunConfig, bool]:
    ns = build_parser().parse_args(list(argv))
    if ns.command is None:
        raise ValidationError("no command given")
    file_doc: dict = {}
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ValidationError(f"cannot read config {ns.config!r}: {exc.strerror}") from None
        file_doc = _load_document(text, ns.config)
    top, file_doc = _split_top_level(file_doc)
    if "command" in top and top["command"] != ns.command:
        raise ValidationError(
            f"config file is for command {top['command']!r}, not {ns.command!r}")
    output = ns.output if ns.output is not None else top.get("output")
    fmt = ns.format if ns.format is not None else top.get("format", "csv")
    if ns.seed is not None:
        try:
            seed = int(ns.seed)
        except ValueError:
            raise ValidationError(f"--seed: cannot parse {ns.seed!r} as int") from None
    else:
        seed = top.get("seed", 0)
    cli_values = {p.name: getattr(ns, p.name) for p in COMMANDS[ns.command][1]
                  if getattr(ns, p.name) is not None}
    return _resolve(ns.command, file_doc, cli_values, output, seed, fmt), ns.print_config


def parse_config(source: str | Sequence[str]) -> RunConfig:
    """Build a validated :class:`RunConfig`.

    ``source`` is either a JSON document (a string, as printed by
    ``--print-config``) or a list of command-line arguments.
    """
    if isinstance(source, str):
        top, doc = _split_top_level(_load_document(source, "config"))
        if "command" not in top:
            raise ValidationError("config document needs a 'command' key")
        return _resolve(top["command"], doc, {}, top.get("output"), top.get("seed", 0),
                        top.get("format", "csv"))
    return _parse(source)[0]


# --------------------------------------------------------------------------
# Table output
# --------------------------------------------------------------------------

def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _json_value(value):
    if isinstance(value, (float, np.floating)):
        return None if math.isnan(value) else float(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def render_table(rows: list[dict], schema: Sequence[str], format: str = "csv",
                 meta: dict | None = None) -> str:
    """Table as text: CSV with a ``#`` metadata block, or a JSON array of objects."""
    for i, row in enumerate(rows):
        missing = [c for c in schema if c not in row]
        if missing:
            raise ValidationError(f"row {i} lacks columns {missing}")
    if format == "json":
        objs = [{c: _json_value(row[c]) for c in schema} for row in rows]
        return json.dumps(objs, indent=1) + "\n"
    if format != "csv":
        raise ValidationError(f"format must be one of {', '.join(FORMATS)}, got {format!r}")
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        text = value if isinstance(value, str) else json.dumps(value, sort_keys=True)
        buf.write(f"# {key}: {text}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(schema)
    for row in rows:
        writer.writerow([format_value(row[c]) for c in schema])
    return buf.getvalue()


def write_table(rows: list[dict], schema: Sequence[str], path: str | None,
                format: str = "csv", meta: dict | None = None) -> None:
    """Write rows to ``path`` (``None`` or ``'-'``: stdout).

    I/O failures are re-raised as ``OSError`` naming the path.
    """
    text = render_table(rows, schema, format, meta)
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path!r}: {exc.strerror or exc}") from exc


def read_table(path: str) -> list[dict]:
    """Rows of a CSV written by :func:`write_table`; numeric cells become floats."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise ValidationError(f"cannot read table {path!r}: {exc.strerror}") from None
    rows = []
    for raw in csv.DictReader(lines):
        row = {}
        for key, cell in raw.items():
            try:
                row[key] = float(cell)
            except (TypeError, ValueError):
                row[key] = cell
        rows.append(row)
    return rows


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def _coin(pair) -> CoinState:
    return CoinState.normalized(*pair)


def _cmd_evolve(p, seed):
    params = StepParams(p["delta"], p["q"])
    dist = distribution(propagate(LatticeState.localized(_coin(p["coin"])), params, p["n"]))
    rows = [{"site": int(m), "probability": float(pr)} for m, pr in zip(dist.sites(), dist.probs)]
    return rows, ("site", "probability")


def _cmd_bands(p, seed):
    ks = bz_grid(p["grid"])
    bv = bands.bloch_vector(p["delta"], ks)
    e = bands.quasi_energy(p["delta"], ks)
    v = bands.group_velocity(p["delta"], ks)
    rows = [{"k": ks[j], "E": e[j], "V": v[j], "n_x": bv.n[j, 0], "n_y": bv.n[j, 1],
             "n_z": bv.n[j, 2]} for j in range(ks.size)]
    return rows, ("k", "E", "V", "n_x", "n_y", "n_z")


def _cmd_winding(p, seed):
    res = bands.winding_number(p["delta"], p["grid"])
    return [{"delta": p["delta"], "W": res.W, "residual": res.residual,
             "max_axis_overlap": res.max_axis_overlap}], ("delta", "W", "residual", "max_axis_overlap")


def _cmd_spreading(p, seed):
    rows = [{"delta": p["delta"], "method": m, "L": bands.spreading_coefficient(p["delta"], m, p["grid"]).L}
            for m in bands.SpreadingCoefficient.METHODS]
    return rows, ("delta", "method", "L")


def _grid(start, stop, step):
    count = experiments.grid_count(start, stop, step)
    return start, min(stop, start + (count - 1) * step), count


def _cmd_sweep_delta(p, seed):
    start, stop, count = _grid(p["delta-start"], p["delta-stop"], p["delta-step"])
    cfg = experiments.SweepConfig("delta_sweep", start, stop, count, n=p["n"],
                                  coin=_coin(p["coin"]), shots=p["shots"], seed=seed,
                                  workers=p["workers"])
    cols = experiments.DELTA_COLUMNS + (experiments.SAMPLED_COLUMNS if p["shots"] else ())
    return experiments.run_delta_sweep(cfg), cols


def _cmd_sweep_coin(p, seed):
    start, stop, count = _grid(p["theta-start"], p["theta-stop"], p["theta-step"])
    cfg = experiments.SweepConfig("coin_sweep", start, stop, count, n=p["n"],
                                  deltas=tuple(p["deltas"]), shots=p["shots"], seed=seed,
                                  workers=p["workers"])
    cols = experiments.COIN_COLUMNS + (experiments.SAMPLED_COLUMNS if p["shots"] else ())
    return experiments.run_coin_sweep(cfg), cols


def _cmd_sweep_ssh(p, seed):
    start, stop, count = _grid(p["t-prime-start"], p["t-prime-stop"], p["t-prime-step"])
    cfg = experiments.SweepConfig("ssh_sweep", start, stop, count, tau=p["tau"], t=p["t"],
                                  chi0=_coin(p["chi0"]), seed=seed, workers=p["workers"])
    return experiments.run_ssh_sweep(cfg), experiments.SSH_COLUMNS


def _cmd_ssh_bands(p, seed):
    params = ssh.SSHParams(p["t"], p["t-prime"])
    ks = bz_grid(p["grid"])
    n = ssh.ssh_bloch_vector(params, ks)
    e = -np.asarray(ssh.ssh_energy(params, ks))
    v = ssh.ssh_group_velocity(params, ks)
    rows = [{"k": ks[j], "E": e[j], "V": v[j], "n_x": n[j, 0], "n_y": n[j, 1], "n_z": n[j, 2]}
            for j in range(ks.size)]
    return rows, ("k", "E", "V", "n_x", "n_y", "n_z")


def _cmd_detect_kink(p, seed):
    if not p["input"]:
        raise ValidationError("input must name a CSV table")
    rows = read_table(p["input"])
    for col in (p["x"], p["y"]):
        if rows and col not in rows[0]:
            raise ValidationError(f"column {col!r} not found in {p['input']!r}")
    kinks = experiments.detect_transition(rows, p["x"], p["y"], p["factor"], p["atol"])
    return [{p["x"]: x} for x in kinks], (p["x"],)


HANDLERS = {
    "evolve": _cmd_evolve,
    "bands": _cmd_bands,
    "winding": _cmd_winding,
    "spreading": _cmd_spreading,
    "sweep-delta": _cmd_sweep_delta,
    "sweep-coin": _cmd_sweep_coin,
    "sweep-ssh": _cmd_sweep_ssh,
    "ssh-bands": _cmd_ssh_bands,
    "detect-kink": _cmd_detect_kink,
}


def execute(config: RunConfig) -> tuple[list[dict], tuple[str, ...]]:
    """Run a resolved configuration and return ``(rows, columns)``."""
    return HANDLERS[config.command](config.params, config.seed)


def metadata(config: RunConfig) -> dict:
    return {"qwtopo": __version__, "command": config.command, "seed": config.seed,
            "config": config.document()}


def _output_path(config: RunConfig) -> str | None:
    if config.output is not None:
        return config.output
    out_dir = os.environ.get(OUTPUT_DIR_ENV)
    if out_dir:
        return os.path.join(out_dir, f"{config.command}.{config.format}")
    return None


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        build_parser().print_usage(sys.stderr)
        return 1
    try:
        config, print_only = _parse(argv)
        if print_only:
            sys.stdout.write(config.to_json() + "\n")
            return 0
        rows, columns = execute(config)
        write_table(rows, columns, _output_path(config), config.format, metadata(config))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - every other failure maps to exit 2
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
