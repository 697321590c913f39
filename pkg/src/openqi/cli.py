"""Command-line entry point: ``openqi run | plot | extensivity``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__
from .config import (
    ConfigError,
    ExtensivitySpec,
    RunSpec,
    load_extensivity_config,
    load_run_config,
    preset_path,
)
from .extensivity import (
    CouplingKind,
    ConvergenceError,
    fit_scaling_exponent,
    ground_state_pair,
    ground_state_star,
    homogeneous_bath,
    interaction_energy_closed_form,
)
from .svgplot import render
from .sweep import ScalingCurve, SweepError, compare_policies

log = logging.getLogger("openqi")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_THRESHOLD = 4

CURVE_COLUMNS = ("N", "gamma", "f_q", "crlb", "wall_time_s")


class NumericalFailure(RuntimeError):
    pass


class ThresholdFailure(RuntimeError):
    pass


@dataclass
class RunManifest:
    config_path: str
    out_dir: str
    files: list[str] = field(default_factory=list)
    curves: list[dict] = field(default_factory=list)
    version: str = __version__
    rng_free: bool = True

    def to_json(self) -> str:
        body = {
            "tool": "openqi",
            "version": self.version,
            "config": self.config_path,
            "out_dir": self.out_dir,
            "rng_free": self.rng_free,
            "files": self.files,
            "curves": self.curves,
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _num(x: float) -> str:
    return repr(float(x))


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text).strip("_") or "curve"


class _Output:
    """Tracks written files so a failed run can be rolled back."""

    def __init__(self, out_dir: Path):
        self.dir = out_dir
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.dir / name
        self.written.append(p)
        return p

    def names(self) -> list[str]:
        return [p.name for p in self.written]

    def rollback(self):
        for p in self.written:
            p.unlink(missing_ok=True)


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _curve_rows(curve: ScalingCurve, timing: bool):
    for r in curve.records:
        yield [r.n, _num(r.gamma), _num(r.f_q), _num(r.crlb), _num(r.wall_time if timing else 0.0)]


def write_curves(curves: list[ScalingCurve], out: _Output, timing: bool) -> list[Path]:
    paths = []
    combined = []
    for c in curves:
        name = _slug(f"{c.config.state.value}__{c.config.label or c.name}")
        p = out.path(f"{name}.csv")
        rows = list(_curve_rows(c, timing))
        _write_rows(p, CURVE_COLUMNS, rows)
        paths.append(p)
        combined.extend([name] + row for row in rows)
    _write_rows(out.path("all_curves.csv"), ("curve",) + CURVE_COLUMNS, combined)
    return paths


def read_curve_csv(path: str | Path) -> list[tuple[float, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CURVE_COLUMNS:
            raise ValueError(f"{path}: columns must be exactly {','.join(CURVE_COLUMNS)}")
        return [(float(row[0]), float(row[3])) for row in reader if row]


def plot(csv_paths, out_svg, title: str = "") -> Path:
    """Render curve CSVs into one log-log SVG; labels are the file stems."""
    csv_paths = [Path(p) for p in csv_paths]
    if not csv_paths:
        raise ValueError("no CSV files given")
    curves = [(p.stem, read_curve_csv(p)) for p in csv_paths]
    out_svg = Path(out_svg)
    out_svg.write_text(render(curves, title=title), encoding="utf-8")
    return out_svg


def _curve_meta(c: ScalingCurve, policy_label: str) -> dict:
    return {
        "name": _slug(f"{c.config.state.value}__{c.config.label or c.name}"),
        "state": c.config.state.value,
        "dissipator": c.config.dissipator.value,
        "policy": policy_label,
        "gamma0": c.config.gamma0,
        "rate_exponent": c.config.policy.rate_exponent,
        "complete": c.complete,
        "slope": None if c.fit is None else c.fit.slope,
        "stderr": None if c.fit is None else c.fit.stderr,
        "classification": None if c.classification is None else c.classification.value,
    }


def run_spec(spec: RunSpec, out_dir, workers: int | None = None) -> tuple[RunManifest, list[ScalingCurve]]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = _Output(out_dir)
    manifest = RunManifest(spec.source, str(out_dir))
    curves: list[ScalingCurve] = []
    try:
        for state in spec.states:
            base = replace(spec.base, state=state)
            curves.extend(compare_policies(base, spec.policies, workers))
        failed = [
            f"{c.name} N={r.n}: {r.error}" for c in curves for r in c.records if not r.ok
        ]
        if failed:
            raise NumericalFailure("incomplete curves; " + "; ".join(failed))
        csvs = write_curves(curves, out, spec.timing)
        plot(csvs, out.path("crlb.svg"), title=f"{spec.base.dissipator.value} dissipator")
        manifest.curves = [_curve_meta(c, c.config.label) for c in curves]
        manifest.files = out.names()
        (out_dir / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    except BaseException:
        out.rollback()
        raise
    return manifest, curves


def run(config_path, out_dir, workers: int | None = None, fit_window: str | None = None):
    spec = load_run_config(config_path, fit_window=fit_window)
    return run_spec(spec, out_dir, workers)[0]


# ---------------------------------------------------------------------------
# extensivity


def _family_rows(spec: ExtensivitySpec, fam):
    """(x, |h| solver or None, |h| closed form) per grid point."""
    rows = []
    if fam.kind == "single_pair":
        for g in fam.g_grid:
            sol = ground_state_pair(spec.omega_a, spec.omega_a, g, fam.n_a, fam.n_a + fam.n_r)
            closed = 2.0 * g * math.sqrt(fam.n_a * fam.n_r)
            rows.append((g, abs(sol.h_int), closed))
        return rows
    for n in fam.n_grid:
        bath = homogeneous_bath(n, spec.epsilon, spec.g, spec.m_avg, spec.omega_min, spec.omega_max)
        if fam.kind == "single_mode":
            sol = ground_state_star(bath, spec.omega_a, n)
            solver = abs(sol.h_int)
            closed = interaction_energy_closed_form(CouplingKind.SINGLE_MODE, n, 0, bath)
        elif fam.kind == "two_mode_linear":
            sol = ground_state_star(
                bath, spec.omega_a, n / 2, omega_b=spec.omega_a - spec.detuning, n_b=n / 2
            )
            solver = abs(sol.h_int)
            closed = interaction_energy_closed_form(CouplingKind.TWO_MODE_LINEAR, n / 2, n / 2, bath)
        else:
            # not a one-body quadratic form: no solver route
            solver = None
            closed = interaction_energy_closed_form(
                CouplingKind.TWO_MODE_NUMBER_CONSERVING, n / 2, n / 2, bath
            )
        rows.append((n, solver, closed))
    return rows


def extensivity_spec_report(spec: ExtensivitySpec, out_dir) -> tuple[RunManifest, list[dict]]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = _Output(out_dir)
    manifest = RunManifest(spec.source, str(out_dir))
    summary = []
    try:
        for fam in spec.families:
            rows = _family_rows(spec, fam)
            xname = "g" if fam.kind == "single_pair" else "N"
            table = []
            for x, solver, closed in rows:
                rel = "" if solver is None else _num(abs(solver - closed) / closed)
                table.append([_num(x), "" if solver is None else _num(solver), _num(closed), rel])
            _write_rows(
                out.path(f"extensivity_{_slug(fam.name)}.csv"),
                (xname, "h_int_solver", "h_int_closed_form", "rel_error"),
                table,
            )
            fit_vals = [(x, s if s is not None else c) for x, s, c in rows]
            fit = fit_scaling_exponent(fit_vals)
            errs = [abs(s - c) / c for _, s, c in rows if s is not None]
            summary.append(
                {
                    "family": fam.name,
                    "kind": fam.kind,
                    "exponent": fit.slope,
                    "stderr": fit.stderr,
                    "expected": fam.expected,
                    "max_rel_error": max(errs) if errs else None,
                    "ok": abs(fit.slope - fam.expected) <= spec.tolerance,
                }
            )
        _write_rows(
            out.path("extensivity_summary.csv"),
            ("family", "kind", "exponent", "stderr", "expected", "max_rel_error", "ok"),
            [
                [s["family"], s["kind"], _num(s["exponent"]), _num(s["stderr"]), _num(s["expected"]),
                 "" if s["max_rel_error"] is None else _num(s["max_rel_error"]), str(s["ok"]).lower()]
                for s in summary
            ],
        )
        manifest.files = out.names()
        manifest.curves = summary
        (out_dir / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    except BaseException:
        out.rollback()
        raise
    return manifest, summary


def extensivity_report(config_path, out_dir) -> RunManifest:
    """Write the extensivity CSVs; raises ThresholdFailure on an exponent mismatch."""
    spec = load_extensivity_config(config_path)
    manifest, summary = extensivity_spec_report(spec, out_dir)
    bad = [s["family"] for s in summary if not s["ok"]]
    if bad:
        raise ThresholdFailure(f"exponent off by more than {spec.tolerance}: {', '.join(bad)}")
    return manifest


# ---------------------------------------------------------------------------


def _config_arg(args, default_preset):
    if args.config and args.preset:
        raise ConfigError("--config", "give either --config or --preset, not both")
    if args.config:
        return Path(args.config)
    return preset_path(args.preset or default_preset)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="openqi", description=__doc__)
    p.add_argument("--version", action="version", version=f"openqi {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="CRLB-vs-N sweep from a config file or preset")
    r.add_argument("--config")
    r.add_argument("--preset", choices=("fig1", "fig2"))
    r.add_argument("--out", required=True)
    r.add_argument("--threads", type=int, default=None,
                   help="worker processes (falls back to $OPENQI_THREADS, then 1)")
    r.add_argument("--fit-window", default=None, help="N_min:N_max, or upper_half")

    pl = sub.add_parser("plot", help="render curve CSVs as a log-log SVG")
    pl.add_argument("csv", nargs="+")
    pl.add_argument("--out", required=True)
    pl.add_argument("--title", default="")

    e = sub.add_parser("extensivity", help="ground-state interaction-energy scaling report")
    e.add_argument("--config")
    e.add_argument("--preset", choices=("extensivity",))
    e.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            manifest = run(_config_arg(args, "fig1"), args.out, args.threads, args.fit_window)
            for c in manifest.curves:
                slope = "n/a" if c["slope"] is None else f"{c['slope']:+.3f} +- {c['stderr']:.3f}"
                print(f"{c['name']:<40} slope {slope:<18} {c['classification']}")
        elif args.command == "plot":
            plot(args.csv, args.out, args.title)
        else:
            manifest = extensivity_report(_config_arg(args, "extensivity"), args.out)
            for s in manifest.curves:
                print(f"{s['family']:<24} exponent {s['exponent']:.4f} (expected {s['expected']})")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ThresholdFailure as exc:
        print(f"threshold failure: {exc}", file=sys.stderr)
        return EXIT_THRESHOLD
    except (NumericalFailure, SweepError, ConvergenceError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
