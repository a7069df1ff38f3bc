"""Parameter sweeps over the capacity bounds, CSV output, and a one-shot
``bounds`` command.

Intensities on the command line and in sweep grids are in dB with
``X = 10 ** (X_dB / 10)`` (sigma2 = 1 normalization). Every number written out
is in nats.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import bounds as bnd
from .channel import monte_carlo_mutual_information, mutual_information
from .errors import BracketError, ConvergenceError, DomainError, FeasibilityError, SolverError
from .input_dist import (
    AvgOnlyConstraints,
    ChannelParams,
    PeakAvgConstraints,
    solve_b,
    solve_mn,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3

SWEEP_VARS = ("A_dB", "P_dB", "xi", "varsigma2")
ORACLES = ("mi", "monte_carlo")
FIXED_KEYS = ("A_dB", "P_dB", "xi", "varsigma2", "sigma2", "A_over_P", "beta", "delta",
              "mc_samples")
CURVE_KEYS = FIXED_KEYS + ("scenario", "reference")
DEFAULT_FIXED = {"sigma2": 1.0, "beta": 1e-3, "delta": 1e-3, "mc_samples": 20000}

_ROW_ERRORS = (DomainError, SolverError, ConvergenceError, BracketError, FeasibilityError)


def from_db(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def to_db(x: float) -> float:
    if not x > 0:
        raise DomainError(f"cannot express {x} in dB")
    return 10.0 * math.log10(x)


def _parse_scenario(value) -> bnd.Scenario:
    if isinstance(value, bnd.Scenario):
        return value
    key = str(value).replace("-", "").replace("_", "").lower()
    for s in bnd.Scenario:
        if s.value.lower() == key:
            return s
    raise DomainError(f"unknown scenario {value!r}; use peak-avg or avg-only")


@dataclass(frozen=True)
class Curve:
    """One line of a figure: a label plus parameter overrides."""

    label: str
    overrides: tuple = ()

    def params(self) -> dict:
        return dict(self.overrides)


def _curve(label: str, **overrides) -> Curve:
    bad = set(overrides) - set(CURVE_KEYS)
    if bad:
        raise DomainError(f"unknown curve keys {sorted(bad)}")
    return Curve(label, tuple(sorted(overrides.items())))


@dataclass(frozen=True)
class SweepConfig:
    scenario: bnd.Scenario
    sweep_var: str
    grid: tuple
    fixed: tuple = ()
    curves: tuple = (Curve("default"),)
    oracles: frozenset = frozenset()
    seed: int = 0
    name: str = "custom"
    notes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "scenario", _parse_scenario(self.scenario))
        if self.sweep_var not in SWEEP_VARS:
            raise DomainError(f"sweep_var must be one of {SWEEP_VARS}, got {self.sweep_var!r}")
        grid = tuple(float(v) for v in self.grid)
        if not grid:
            raise DomainError("grid must be nonempty")
        if not all(math.isfinite(v) for v in grid):
            raise DomainError("grid values must be finite")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise DomainError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        fixed = dict(DEFAULT_FIXED)
        fixed.update(dict(self.fixed))
        unknown = set(fixed) - set(FIXED_KEYS)
        if unknown:
            raise DomainError(f"unknown fixed parameters {sorted(unknown)}")
        object.__setattr__(self, "fixed", tuple(sorted(fixed.items())))
        if not self.curves:
            raise DomainError("at least one curve is required")
        oracles = frozenset(self.oracles)
        if not oracles <= set(ORACLES):
            raise DomainError(f"oracles must be drawn from {ORACLES}")
        object.__setattr__(self, "oracles", oracles)
        for curve in self.curves:
            _check_point(self.point_params(curve, grid[0]), self.scenario)

    def point_params(self, curve: Curve, value: float) -> dict:
        """Parameters at one grid point: fixed, then curve overrides, then the swept value."""
        p = dict(self.fixed)
        p.update(curve.params())
        p[self.sweep_var] = value
        return p


def _check_point(p: dict, default: bnd.Scenario) -> None:
    """Type-level checks that do not depend on the swept intensity."""
    if "xi" not in p:
        raise DomainError("xi is required")
    if not 0 < p["xi"] <= 1:
        raise DomainError(f"xi must lie in (0, 1], got {p['xi']}")
    if p.get("varsigma2", 1.5) < 0:
        raise DomainError("varsigma2 must be >= 0")
    if not p["sigma2"] > 0:
        raise DomainError("sigma2 must be > 0")
    bnd.UpperBoundParams(p["beta"], p["delta"])
    if p.get("A_over_P", 1.0) <= 0:
        raise DomainError("A_over_P must be > 0")
    if int(p["mc_samples"]) < 2:
        raise DomainError("mc_samples must be >= 2")
    scenario = _parse_scenario(p.get("scenario", default))
    if p.get("reference") not in (None, "shannon"):
        raise DomainError(f"unknown reference curve {p['reference']!r}")
    if p.get("reference") is None and "A_dB" not in p and "P_dB" not in p:
        raise DomainError("an intensity (A_dB or P_dB) is required")
    if scenario is bnd.Scenario.AVG_ONLY and "P_dB" not in p and "A_dB" not in p:
        raise DomainError("average-only curves need P_dB")


@dataclass(frozen=True)
class SweepRow:
    curve: str
    sweep_value: float
    c_low: float | None = None
    c_upp: float | None = None
    gap: float | None = None
    asymptotic_gap: float | None = None
    mi_oracle: float | None = None
    mc_oracle: float | None = None
    b: float | None = None
    branch: str | None = None
    m: float | None = None
    n: float | None = None
    error: str = ""


ROW_FIELDS = tuple(f.name for f in dataclasses.fields(SweepRow))


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------


def _intensities(p: dict) -> tuple[float, float]:
    """(A, P) in linear units; A may be nan when it is not defined."""
    ratio = p.get("A_over_P", 1.0)
    if "A_dB" in p:
        A = from_db(p["A_dB"])
        P = from_db(p["P_dB"]) if "P_dB" in p else A / ratio
    else:
        P = from_db(p["P_dB"])
        A = P * ratio
    return A, P


def evaluate_point(config: SweepConfig, curve_index: int, value: float) -> SweepRow:
    curve = config.curves[curve_index]
    p = config.point_params(curve, value)
    scenario = _parse_scenario(p.get("scenario", config.scenario))
    row = {"curve": curve.label, "sweep_value": value}
    try:
        A, P = _intensities(p)
        if p.get("reference") == "shannon":
            c = bnd.shannon_awgn(P * P / p["sigma2"])
            row.update(c_low=c, c_upp=c, gap=0.0, asymptotic_gap=0.0)
            return SweepRow(**row)
        params = ChannelParams(p["sigma2"], p["varsigma2"])
        if scenario is bnd.Scenario.PEAK_AVG:
            dist = solve_b(params, PeakAvgConstraints(A, p["xi"], P))
            report = bnd.report_peak_avg(dist, bnd.UpperBoundParams(p["beta"], p["delta"]))
            row.update(b=dist.b, branch=dist.branch.value)
        else:
            dist = solve_mn(params, AvgOnlyConstraints(p["xi"], P))
            report = bnd.report_avg_only(dist, p["beta"])
            row.update(m=dist.m, n=dist.n)
        row.update(c_low=report.c_low, c_upp=report.c_upp, gap=report.gap,
                   asymptotic_gap=report.asymptotic_gap)
        if "mi" in config.oracles:
            row["mi_oracle"] = mutual_information(dist).mi
        if "monte_carlo" in config.oracles:
            seed = _point_seed(config.seed, curve_index, config.grid.index(value))
            row["mc_oracle"] = monte_carlo_mutual_information(
                dist, seed, int(p["mc_samples"]))[0]
    except _ROW_ERRORS as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return SweepRow(**row)


def _point_seed(seed: int, curve_index: int, grid_index: int) -> int:
    ss = np.random.SeedSequence([seed, curve_index, grid_index])
    return int(ss.generate_state(1)[0])


def _evaluate_task(args):
    return evaluate_point(*args)


def run_sweep(config: SweepConfig, jobs: int = 1) -> list[SweepRow]:
    """One row per (curve, grid point), curves in order, grid ascending.

    Infeasible or unsolvable points produce a row with ``error`` set; the
    sweep carries on. With ``jobs > 1`` points are evaluated in worker
    processes and reassembled in grid order.
    """
    tasks = [(config, ci, v) for ci in range(len(config.curves)) for v in config.grid]
    if jobs <= 1:
        return [_evaluate_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_evaluate_task, tasks))


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def columns_for(config: SweepConfig) -> tuple[str, ...]:
    """Header of a sweep: optional columns appear only when they can be filled."""
    scenarios = set()
    for curve in config.curves:
        p = curve.params()
        if p.get("reference") is None:
            scenarios.add(_parse_scenario(p.get("scenario", config.scenario)))
    keep = {"curve", "sweep_value", "c_low", "c_upp", "gap", "asymptotic_gap", "error"}
    if "mi" in config.oracles:
        keep.add("mi_oracle")
    if "monte_carlo" in config.oracles:
        keep.add("mc_oracle")
    if bnd.Scenario.PEAK_AVG in scenarios:
        keep |= {"b", "branch"}
    if bnd.Scenario.AVG_ONLY in scenarios:
        keep |= {"m", "n"}
    return tuple(f for f in ROW_FIELDS if f in keep)


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".12g")
    return str(value)


def emit_csv(
    rows: Iterable[SweepRow],
    destination=None,
    columns: Sequence[str] | None = None,
    sweep_name: str = "sweep_value",
    comments: Sequence[str] = (),
) -> bytes:
    """Serialize rows as UTF-8 CSV and return the bytes.

    ``destination`` may be a path, a binary file object, or None (bytes only).
    Comment lines start with ``#`` and precede the header.
    """
    rows = list(rows)
    if columns is None:
        columns = [f for f in ROW_FIELDS
                   if f in ("curve", "sweep_value", "c_low", "c_upp", "gap",
                            "asymptotic_gap", "error")
                   or any(getattr(r, f) is not None for r in rows)]
    bad = set(columns) - set(ROW_FIELDS)
    if bad:
        raise DomainError(f"unknown columns {sorted(bad)}")
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([sweep_name if c == "sweep_value" else c for c in columns])
    for r in rows:
        writer.writerow([_format(getattr(r, c)) for c in columns])
    data = buf.getvalue().encode("utf-8")
    if destination is None:
        return data
    if isinstance(destination, (str, Path)):
        with open(destination, "wb") as fh:
            fh.write(data)
    else:
        destination.write(data)
    return data


def sweep_comments(config: SweepConfig) -> list[str]:
    lines = [f"preset: {config.name}", f"scenario: {config.scenario.value}",
             f"sweep: {config.sweep_var}", "units: nats; intensities X = 10^(X_dB/10)"]
    lines += [f"{k} = {_format(v)}" for k, v in config.fixed]
    for curve in config.curves:
        lines.append(f"curve {curve.label}: " + ", ".join(
            f"{k}={_format(v)}" for k, v in curve.overrides))
    if config.oracles:
        lines.append("oracles: " + ", ".join(sorted(config.oracles)) + f"; seed {config.seed}")
    lines += list(config.notes)
    return lines


def write_sweep(config: SweepConfig, rows: Sequence[SweepRow], destination=None) -> bytes:
    return emit_csv(rows, destination, columns_for(config), config.sweep_var,
                    sweep_comments(config))


# --------------------------------------------------------------------------
# Presets
# --------------------------------------------------------------------------


def _steps(start: float, stop: float, step: float) -> tuple:
    n = int(round((stop - start) / step))
    return tuple(round(start + i * step, 10) for i in range(n + 1))


_UPPER_NOTE = "upper bound is asymptotic; trust it from about 30 dB upward"


def preset(name: str) -> SweepConfig:
    """Figure settings. Curve values not stated in the figure text are approximations."""
    P, AO = bnd.Scenario.PEAK_AVG, bnd.Scenario.AVG_ONLY
    if name == "fig2":
        return SweepConfig(P, "A_dB", _steps(20, 70, 2.5), (("xi", 0.3), ("varsigma2", 1.5)),
                           tuple(_curve(f"A/P={r:g}", A_over_P=r) for r in (0.5, 1.5, 3.0)),
                           name=name, notes=(_UPPER_NOTE,))
    if name == "fig3":
        return SweepConfig(P, "xi", _steps(0.05, 1.0, 0.05),
                           (("A_dB", 45.0), ("varsigma2", 1.5)),
                           tuple(_curve(f"A/P={r:g}", A_over_P=r) for r in (3.0, 4.0, 5.0)),
                           name=name, notes=("A/P values are approximations of the figure legend",))
    if name == "fig4":
        return SweepConfig(P, "A_dB", _steps(20, 70, 2.5), (("xi", 0.3), ("A_over_P", 1.5)),
                           tuple(_curve(f"varsigma2={s:g}", varsigma2=s) for s in (0.0, 1.0, 2.0, 4.0)),
                           name=name, notes=("varsigma2 = 0 is the signal-independent limit",
                                             "varsigma2 values are approximations of the figure legend",
                                             _UPPER_NOTE))
    if name == "fig5":
        return SweepConfig(AO, "P_dB", _steps(20, 70, 2.5), (("varsigma2", 1.5),),
                           tuple(_curve(f"xi={x:g}", xi=x) for x in (0.1, 0.3, 0.5, 1.0)),
                           name=name, notes=("xi values are approximations of the figure legend",))
    if name == "fig6":
        return SweepConfig(AO, "varsigma2", _steps(0.0, 10.0, 0.5), (("xi", 0.3),),
                           tuple(_curve(f"P={d:g}dB", P_dB=d) for d in (30.0, 40.0, 50.0, 60.0)),
                           name=name, notes=("P values are approximations of the figure legend",))
    external = "curves of the earlier signal-independent results are omitted"
    shannon = "shannon: 0.5 ln(1 + P^2 / sigma2), independent of xi"
    if name == "fig7":
        return SweepConfig(P, "P_dB", _steps(20, 70, 2.5), (("xi", 0.3), ("varsigma2", 1.5)),
                           (_curve("peak-avg A=P", A_over_P=1.0),
                            _curve("avg-only", scenario="AvgOnly"),
                            _curve("shannon", reference="shannon")),
                           name=name, notes=(external, shannon, _UPPER_NOTE))
    if name == "fig8":
        return SweepConfig(P, "xi", _steps(0.05, 0.95, 0.05),
                           (("P_dB", 45.0), ("varsigma2", 1.5)),
                           (_curve("peak-avg A=P=45dB", A_over_P=1.0),
                            _curve("avg-only P=45dB", scenario="AvgOnly"),
                            _curve("shannon", reference="shannon")),
                           name=name, notes=(external, shannon))
    raise DomainError(f"unknown preset {name!r}; choose one of {', '.join(PRESETS)}")


PRESETS = tuple(f"fig{i}" for i in range(2, 9))


# --------------------------------------------------------------------------
# Config files and overrides
# --------------------------------------------------------------------------


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _parse_grid(text: str) -> tuple:
    if ":" in text:
        parts = [float(s) for s in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise DomainError(f"grid range must be start:stop:step, got {text!r}")
        return _steps(*parts)
    return tuple(float(s) for s in text.split(",") if s.strip())


def _parse_number(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DomainError(f"{key} expects a number, got {text!r}") from None


def build_config(settings: dict, base: SweepConfig | None = None) -> SweepConfig:
    """Apply string settings (from a file or ``--set``) on top of ``base``."""
    settings = dict(settings)
    if "preset" in settings:
        name = settings.pop("preset")
        if base is None or base.name != name:
            base = preset(name)
    kw = {}
    if base is not None:
        kw = {f.name: getattr(base, f.name) for f in dataclasses.fields(SweepConfig)}
    fixed = dict(kw.get("fixed", ()))
    for key, text in settings.items():
        if key == "scenario":
            kw["scenario"] = _parse_scenario(text)
        elif key == "sweep_var":
            kw["sweep_var"] = text
        elif key == "grid":
            kw["grid"] = _parse_grid(text)
        elif key == "oracles":
            kw["oracles"] = frozenset(s.strip() for s in text.split(",") if s.strip())
        elif key == "seed":
            kw["seed"] = int(text)
        elif key == "curve_var":
            kw["_curve_var"] = text
        elif key == "curve_values":
            kw["_curve_values"] = [float(s) for s in text.split(",") if s.strip()]
        elif key in FIXED_KEYS:
            fixed[key] = _parse_number(key, text)
        else:
            raise DomainError(f"unknown setting {key!r}")
    var = kw.pop("_curve_var", None)
    values = kw.pop("_curve_values", None)
    if (var is None) != (values is None):
        raise DomainError("curve_var and curve_values must be given together")
    if var is not None:
        if var not in FIXED_KEYS:
            raise DomainError(f"curve_var must be one of {FIXED_KEYS}")
        kw["curves"] = tuple(_curve(f"{var}={v:g}", **{var: v}) for v in values)
    kw["fixed"] = tuple(fixed.items())
    missing = {"scenario", "sweep_var", "grid"} - set(kw)
    if missing:
        raise DomainError(f"configuration lacks {sorted(missing)}")
    return SweepConfig(**kw)


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vlc-capacity",
                                 description="Capacity bounds for VLC with signal-dependent noise.")
    sub = ap.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="run a figure preset or a configured sweep, write CSV")
    sw.add_argument("--preset", choices=PRESETS)
    sw.add_argument("--config", help="flat key=value configuration file")
    sw.add_argument("--out", help="CSV destination (default: stdout)")
    sw.add_argument("--oracle", action="append", choices=ORACLES, default=[],
                    help="add an oracle column; repeatable")
    sw.add_argument("--seed", type=int)
    sw.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a configuration value; repeatable")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes")

    bd = sub.add_parser("bounds", help="print the bound report of one operating point")
    bd.add_argument("--scenario", choices=("peak-avg", "avg-only"), required=True)
    bd.add_argument("--A-dB", type=float, dest="A_dB")
    bd.add_argument("--P-dB", type=float, dest="P_dB")
    bd.add_argument("--A-over-P", type=float, dest="A_over_P", default=1.0,
                    help="peak-to-nominal ratio used when only one intensity is given")
    bd.add_argument("--xi", type=float, required=True)
    bd.add_argument("--varsigma2", type=float, default=1.5)
    bd.add_argument("--sigma2", type=float, default=1.0)
    bd.add_argument("--beta", type=float, default=1e-3)
    bd.add_argument("--delta", type=float, default=1e-3)
    bd.add_argument("--mi", action="store_true", help="also compute the quadrature MI")
    bd.add_argument("--json", action="store_true")
    return ap


def _cmd_sweep(args, out) -> int:
    settings = {}
    if args.config:
        settings.update(read_config_file(args.config))
    if args.preset:
        settings["preset"] = args.preset
    for item in args.set:
        if "=" not in item:
            raise DomainError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        settings[k.strip()] = v.strip()
    if args.oracle:
        settings["oracles"] = ",".join(args.oracle)
    if args.seed is not None:
        settings["seed"] = str(args.seed)
    config = build_config(settings)
    rows = run_sweep(config, jobs=args.jobs)
    data = write_sweep(config, rows)
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        out.write(data.decode("utf-8"))
    return EXIT_OK


def _cmd_bounds(args, out) -> int:
    if args.A_dB is None and args.P_dB is None:
        raise DomainError("give --A-dB or --P-dB")
    p = {k: getattr(args, k) for k in ("xi", "varsigma2", "sigma2", "A_over_P")}
    if args.A_dB is not None:
        p["A_dB"] = args.A_dB
    if args.P_dB is not None:
        p["P_dB"] = args.P_dB
    A, P = _intensities(p)
    params = ChannelParams(args.sigma2, args.varsigma2)
    if args.scenario == "peak-avg":
        dist = solve_b(params, PeakAvgConstraints(A, args.xi, P))
        report = bnd.report_peak_avg(dist, bnd.UpperBoundParams(args.beta, args.delta))
    else:
        if args.P_dB is None:
            raise DomainError("average-only needs --P-dB")
        dist = solve_mn(params, AvgOnlyConstraints(args.xi, P))
        report = bnd.report_avg_only(dist, args.beta)
    doc = report.as_dict()
    doc["inputs"] = {"A": A if args.scenario == "peak-avg" else None, "P": P, "xi": args.xi,
                     "varsigma2": args.varsigma2, "sigma2": args.sigma2}
    if args.mi:
        doc["mi_oracle"] = mutual_information(dist).mi
    if args.json:
        out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return EXIT_OK
    flat = [(k, doc[k]) for k in ("scenario", "c_low", "c_upp", "gap", "asymptotic_gap")]
    if "mi_oracle" in doc:
        flat.append(("mi_oracle", doc["mi_oracle"]))
    flat += [(k, v) for k, v in doc["aux"].items()]
    flat += [(f"input.{k}", v) for k, v in doc["inputs"].items() if v is not None]
    width = max(len(k) for k, _ in flat)
    for k, v in flat:
        out.write(f"{k:<{width}}  {_format(v)}\n")
    out.write(f"note: {doc['validity']}\n")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "sweep":
            return _cmd_sweep(args, sys.stdout)
        return _cmd_bounds(args, sys.stdout)
    except (SolverError, ConvergenceError, BracketError) as exc:
        print(f"vlc-capacity: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DomainError, FeasibilityError, ValueError) as exc:
        print(f"vlc-capacity: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"vlc-capacity: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
