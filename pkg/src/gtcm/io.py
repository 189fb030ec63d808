"""File formats: run configs, sweep specs, diagnostics CSV and checkpoints.

Config files are plain text, one ``key = value`` per line, ``#`` starts a
comment.  Checkpoints are little-endian binary:

    b"TCM1" | u32 version | u32 n1, n2, n3 | f64 l1, l2, l3 | f64 alpha, beta, time
    | seven f64 arrays u1 u2 u3 v1 v2 v3 theta, physical space, x1 fastest
"""
from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import IC_KINDS, ModelParams, State, Switches
from .spectral import Field, Grid, VectorField
from .timestepper import SCHEMES, StepperConfig


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, source: str = "<config>"):
        where = f"{source}:{line}: " if line else f"{source}: "
        super().__init__(where + message)
        self.line = line
        self.source = source


# ---------------------------------------------------------------------------
# Run configuration

@dataclass(frozen=True)
class InitialConditionSpec:
    kind: str = "taylor_green"
    amplitude: float = 1.0
    seed: int = 0
    path: Optional[str] = None
    max_mode: Optional[int] = None


@dataclass(frozen=True)
class RunConfig:
    grid: Grid = field(default_factory=lambda: Grid.cube(16))
    params: ModelParams = field(default_factory=ModelParams)
    stepper: StepperConfig = field(default_factory=StepperConfig)
    ic: InitialConditionSpec = field(default_factory=InitialConditionSpec)
    out_dir: str = "out"
    checkpoint_every: int = 0
    lambda_s: float = 2.5
    cancellations: bool = True

    @property
    def cadence(self) -> int:
        return self.stepper.cadence


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int(text: str) -> int:
    return int(text.strip())


def _parse_float(text: str) -> float:
    return float(text.strip())


def _parse_dt(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("adaptive", "none", "cfl") else _parse_float(text)


def _parse_opt_int(text: str) -> Optional[int]:
    return None if text.strip().lower() in ("", "none", "auto") else _parse_int(text)


def _parse_opt_str(text: str) -> Optional[str]:
    t = text.strip()
    return None if t.lower() in ("", "none") else t


# key -> (section, attribute, parser)
_KEYS = {
    "grid.n1": ("grid", "n1", _parse_int),
    "grid.n2": ("grid", "n2", _parse_int),
    "grid.n3": ("grid", "n3", _parse_int),
    "grid.l1": ("grid", "l1", _parse_float),
    "grid.l2": ("grid", "l2", _parse_float),
    "grid.l3": ("grid", "l3", _parse_float),
    "model.alpha": ("params", "alpha", _parse_float),
    "model.beta": ("params", "beta", _parse_float),
    "model.damping_fine_grid": ("params", "damping_fine_grid", _parse_bool),
    "step.scheme": ("stepper", "scheme", str.strip),
    "step.dt": ("stepper", "dt", _parse_dt),
    "step.dt_max": ("stepper", "dt_max", _parse_float),
    "step.cfl_safety": ("stepper", "cfl_safety", _parse_float),
    "step.t_end": ("stepper", "t_end", _parse_float),
    "ic.kind": ("ic", "kind", str.strip),
    "ic.amplitude": ("ic", "amplitude", _parse_float),
    "ic.seed": ("ic", "seed", _parse_int),
    "ic.path": ("ic", "path", _parse_opt_str),
    "ic.max_mode": ("ic", "max_mode", _parse_opt_int),
    "out.dir": ("run", "out_dir", str.strip),
    "out.cadence": ("stepper", "cadence", _parse_int),
    "out.checkpoint_every": ("run", "checkpoint_every", _parse_int),
    "out.lambda_s": ("run", "lambda_s", _parse_float),
    "out.cancellations": ("run", "cancellations", _parse_bool),
}
for _name in Switches().as_dict():
    _KEYS[f"model.switches.{_name}"] = ("switches", _name, _parse_bool)


def iter_key_values(text: str, source: str = "<config>"):
    """Yield (line_number, key, raw_value) from the key = value grammar."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("missing key before '='", lineno, source)
        yield lineno, key, value


def _build_run_config(entries, source: str, base: Optional[RunConfig] = None) -> RunConfig:
    base = base or RunConfig()
    sections = {
        "grid": {f.name: getattr(base.grid, f.name) for f in fields(Grid)},
        "params": {"alpha": base.params.alpha, "beta": base.params.beta,
                   "damping_fine_grid": base.params.damping_fine_grid},
        "switches": base.params.switches.as_dict(),
        "stepper": {f.name: getattr(base.stepper, f.name) for f in fields(StepperConfig)},
        "ic": {f.name: getattr(base.ic, f.name) for f in fields(InitialConditionSpec)},
        "run": {"out_dir": base.out_dir, "checkpoint_every": base.checkpoint_every,
                "lambda_s": base.lambda_s, "cancellations": base.cancellations},
    }
    line_of: dict[str, int] = {}
    seen: dict[str, int] = {}
    for lineno, key, value in entries:
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first set on line {seen[key]})", lineno, source)
        seen[key] = lineno
        section, attr, parser = _KEYS[key]
        try:
            sections[section][attr] = parser(value)
        except ValueError as err:
            raise ConfigError(f"bad value for {key}: {err}", lineno, source) from None
        line_of[section] = line_of.get(section, lineno)
        line_of[f"{section}.{attr}"] = lineno

    def build(section, factory):
        try:
            return factory(**sections[section])
        except (ValueError, TypeError) as err:
            msg = str(err)
            lineno = next(
                (ln for name, ln in line_of.items()
                 if name.startswith(section + ".") and name.split(".", 1)[1] in msg),
                line_of.get(section),
            )
            raise ConfigError(msg, lineno, source) from None

    grid = build("grid", Grid)
    switches = build("switches", Switches)
    sections["params"]["switches"] = switches
    params = build("params", ModelParams)
    stepper = build("stepper", StepperConfig)
    ic = build("ic", InitialConditionSpec)
    if ic.kind not in IC_KINDS:
        raise ConfigError(f"unknown ic.kind {ic.kind!r}; expected one of {IC_KINDS}",
                          line_of.get("ic.kind"), source)
    if not (ic.amplitude >= 0):
        raise ConfigError("ic.amplitude must be >= 0", line_of.get("ic.amplitude"), source)
    if ic.kind == "from_checkpoint" and not ic.path:
        raise ConfigError("ic.kind = from_checkpoint needs ic.path", line_of.get("ic.kind"), source)
    run = sections["run"]
    if run["checkpoint_every"] < 0:
        raise ConfigError("out.checkpoint_every must be >= 0",
                          line_of.get("run.checkpoint_every"), source)
    if not run["out_dir"]:
        raise ConfigError("out.dir must not be empty", line_of.get("run.out_dir"), source)
    return RunConfig(grid=grid, params=params, stepper=stepper, ic=ic, **run)


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    return _build_run_config(iter_key_values(text, source), source)


def load_run_config(path) -> RunConfig:
    path = Path(path)
    return parse_run_config(path.read_text(), str(path))


def format_run_config(cfg: RunConfig) -> str:
    """Canonical key = value text; parses back to an equal RunConfig."""
    g, p, s, ic = cfg.grid, cfg.params, cfg.stepper, cfg.ic
    lines = [
        f"grid.n1 = {g.n1}",
        f"grid.n2 = {g.n2}",
        f"grid.n3 = {g.n3}",
        f"grid.l1 = {g.l1!r}",
        f"grid.l2 = {g.l2!r}",
        f"grid.l3 = {g.l3!r}",
        f"model.alpha = {p.alpha!r}",
        f"model.beta = {p.beta!r}",
        f"model.damping_fine_grid = {str(p.damping_fine_grid).lower()}",
    ]
    lines += [f"model.switches.{k} = {str(v).lower()}" for k, v in p.switches.as_dict().items()]
    lines += [
        f"step.scheme = {s.scheme}",
        f"step.dt = {'adaptive' if s.dt is None else repr(s.dt)}",
        f"step.dt_max = {s.dt_max!r}",
        f"step.cfl_safety = {s.cfl_safety!r}",
        f"step.t_end = {s.t_end!r}",
        f"ic.kind = {ic.kind}",
        f"ic.amplitude = {ic.amplitude!r}",
        f"ic.seed = {ic.seed}",
        f"ic.path = {ic.path if ic.path else 'none'}",
        f"ic.max_mode = {'auto' if ic.max_mode is None else ic.max_mode}",
        f"out.dir = {cfg.out_dir}",
        f"out.cadence = {s.cadence}",
        f"out.checkpoint_every = {cfg.checkpoint_every}",
        f"out.lambda_s = {cfg.lambda_s!r}",
        f"out.cancellations = {str(cfg.cancellations).lower()}",
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Sweep specification

@dataclass(frozen=True)
class SweepSpec:
    alphas: tuple
    betas: tuple
    template: RunConfig
    workers: int = 1

    def __post_init__(self):
        if not self.alphas or not self.betas:
            raise ValueError("sweep needs at least one alpha and one beta")
        if self.workers < 1:
            raise ValueError("sweep.workers must be >= 1")

    def cells(self):
        for a in self.alphas:
            for b in self.betas:
                yield a, b


def _parse_float_list(text: str) -> tuple:
    items = [t for t in text.replace(",", " ").split() if t]
    if not items:
        raise ValueError("empty list")
    return tuple(float(t) for t in items)


def parse_sweep_spec(text: str, source: str = "<sweep>", base_dir: Optional[Path] = None) -> SweepSpec:
    """Sweep keys are sweep.alpha, sweep.beta (lists), sweep.workers and
    optionally sweep.template (path to a run config); any other key is a run
    config key applied on top of the template."""
    sweep: dict = {}
    rest = []
    lines: dict[str, int] = {}
    for lineno, key, value in iter_key_values(text, source):
        if key.startswith("sweep."):
            lines[key] = lineno
            try:
                if key in ("sweep.alpha", "sweep.beta"):
                    sweep[key] = _parse_float_list(value)
                elif key == "sweep.workers":
                    sweep[key] = _parse_int(value)
                elif key == "sweep.template":
                    sweep[key] = value
                else:
                    raise ConfigError(f"unknown key {key!r}", lineno, source)
            except ValueError as err:
                if isinstance(err, ConfigError):
                    raise
                raise ConfigError(f"bad value for {key}: {err}", lineno, source) from None
        else:
            rest.append((lineno, key, value))
    base = None
    if "sweep.template" in sweep:
        tpath = Path(sweep["sweep.template"])
        if base_dir is not None and not tpath.is_absolute():
            tpath = base_dir / tpath
        try:
            base = load_run_config(tpath)
        except OSError as err:
            raise ConfigError(f"cannot read template: {err}", lines["sweep.template"], source) from None
    template = _build_run_config(rest, source, base)
    for key in ("sweep.alpha", "sweep.beta"):
        if key not in sweep:
            raise ConfigError(f"missing required key {key}", None, source)
    try:
        return SweepSpec(sweep["sweep.alpha"], sweep["sweep.beta"], template,
                         sweep.get("sweep.workers", 1))
    except ValueError as err:
        raise ConfigError(str(err), None, source) from None


def load_sweep_spec(path) -> SweepSpec:
    path = Path(path)
    return parse_sweep_spec(path.read_text(), str(path), path.parent)


# ---------------------------------------------------------------------------
# Diagnostics CSV

def format_float(x: float) -> str:
    """Shortest round-tripping representation."""
    return repr(float(x))


def diagnostics_csv_text(records: Sequence, columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in records:
        w.writerow([format_float(getattr(r, c)) for c in columns])
    return buf.getvalue()


def write_diagnostics_csv(path, records: Sequence, columns: Optional[Sequence[str]] = None) -> None:
    from .diagnostics import CSV_COLUMNS

    Path(path).write_text(diagnostics_csv_text(records, columns or CSV_COLUMNS))


def read_diagnostics_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in row] for row in body]) if body else np.zeros((0, len(header)))
    return header, data


def write_plot_data(directory, records: Sequence, columns: Sequence[str]) -> list[Path]:
    """One two-column (time, value) text file per quantity."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for c in columns:
        if c == "time":
            continue
        p = directory / f"{c}.dat"
        p.write_text("".join(f"{format_float(r.time)} {format_float(getattr(r, c))}\n" for r in records))
        written.append(p)
    return written


# ---------------------------------------------------------------------------
# Checkpoints

MAGIC = b"TCM1"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sIIII6d")


class CheckpointError(ValueError):
    pass


def checkpoint_bytes(state: State, params: ModelParams) -> bytes:
    s = state.physical()
    g = s.grid
    header = _HEADER.pack(MAGIC, CHECKPOINT_VERSION, g.n1, g.n2, g.n3,
                          g.l1, g.l2, g.l3, params.alpha, params.beta, float(s.time))
    arrays = [s.u.data[0], s.u.data[1], s.u.data[2], s.v.data[0], s.v.data[1], s.v.data[2], s.theta.data]
    payload = b"".join(np.asarray(a, dtype="<f8").ravel(order="F").tobytes() for a in arrays)
    return header + payload


def save_checkpoint(path, state: State, params: ModelParams) -> None:
    Path(path).write_bytes(checkpoint_bytes(state, params))


def parse_checkpoint(blob: bytes) -> tuple[State, dict]:
    if len(blob) < _HEADER.size:
        raise CheckpointError("file too short for a checkpoint header")
    magic, version, n1, n2, n3, l1, l2, l3, alpha, beta, time = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    grid = Grid(n1, n2, n3, l1, l2, l3)
    count = grid.npoints
    expected = _HEADER.size + 7 * 8 * count
    if len(blob) != expected:
        raise CheckpointError(f"payload size {len(blob)} != expected {expected}")
    flat = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).astype(float)
    arrays = [flat[i * count:(i + 1) * count].reshape(grid.shape, order="F") for i in range(7)]
    state = State(
        VectorField(grid, np.stack(arrays[0:3])),
        VectorField(grid, np.stack(arrays[3:6])),
        Field(grid, np.ascontiguousarray(arrays[6])),
        time=time,
    )
    return state, {"alpha": alpha, "beta": beta, "time": time, "version": version}


def load_checkpoint(path) -> tuple[State, dict]:
    """State in physical representation (bit-exact) and the header values."""
    return parse_checkpoint(Path(path).read_bytes())
