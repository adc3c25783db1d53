"""Command line: ``risbound bound | sweep | validate``."""

from __future__ import annotations

import csv
import io
import sys
from pathlib import Path

import click
import numpy as np

from .localization import bounds
from .scenario import ScenarioError, load_scenario, tomllib
from .sweep import COLUMNS, SweepResult, run_sweep, sweep_from_dict
from .validation import ScenarioTooLarge, run_validation

SCHEMA_VERSION = "1"
BOUND_HEADER = ("schema_version", "seed", "m1", "include_los", "speb_m2", "soeb_rad2",
                "peb_m", "oeb_rad", "flags")
SWEEP_HEADER = ("schema_version", "seed", "variable", "value", "trial", *COLUMNS, "failures", "flags")
AGGREGATES = (("mean", None), ("p05", 5.0), ("p95", 95.0))

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def fmt(x) -> str:
    """Shortest round-tripping text for floats; blanks for missing values."""
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_bytes(text.encode("utf-8"))


def _input_error(exc) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(EXIT_INPUT)


def _load(path, seed, no_los):
    try:
        sc = load_scenario(path, seed)
    except (ScenarioError, OSError) as exc:
        _input_error(exc)
    return sc.replace(include_los=False) if no_los else sc


def _percentile(x: np.ndarray, q: float) -> float:
    with np.errstate(invalid="ignore"):
        v = float(np.percentile(x, q))
    # interpolating between two infinite samples gives nan
    return np.inf if np.isnan(v) and np.isinf(x).any() else v


def sweep_rows(result: SweepResult, with_los: bool = True) -> list[list]:
    """Trial rows ordered by (value, trial), each value followed by its aggregates."""
    spec = result.spec
    cols = [c for c in COLUMNS if with_los or "_los_" not in c]
    rows = []
    for value in spec.values:
        group = [r for r in result.rows if r[0] == value]
        fails = result.failures(value)
        for _, trial, vals, flags, err in sorted(group, key=lambda r: r[1]):
            row = [SCHEMA_VERSION, result.seed, spec.variable, value, trial]
            row += [vals.get(c) if c in cols else None for c in COLUMNS]
            row += [int(bool(err)), err or ";".join(flags)]
            rows.append(row)
        for name, q in AGGREGATES:
            row = [SCHEMA_VERSION, result.seed, spec.variable, value, name]
            for c in COLUMNS:
                x = np.array([vals[c] for _, _, vals, _, err in group if not err and c in vals])
                if c not in cols or x.size == 0:
                    row.append(None)
                else:
                    with np.errstate(invalid="ignore"):
                        row.append(float(np.mean(x)) if q is None else _percentile(x, q))
            row += [fails, ""]
            rows.append(row)
    return rows


@click.group()
def main():
    """Bayesian position and orientation error bounds for RIS-aided localization."""


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV output (stdout if omitted)")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Overrides the file's seed")
@click.option("--no-los", is_flag=True, help="Drop the direct BS-UE path")
def bound(scenario_path, out, seed, no_los):
    """Evaluate SPEB/SOEB for one scenario."""
    sc = _load(scenario_path, seed, no_los)
    rep = bounds(sc)
    row = [SCHEMA_VERSION, sc.seed, sc.m1, int(sc.include_los), rep.speb, rep.soeb,
           rep.peb, rep.oeb, ";".join(rep.flags)]
    summary = (f"SPEB = {fmt(rep.speb)} m^2\nSOEB = {fmt(rep.soeb)} rad^2\n"
               f"PEB  = {fmt(rep.peb)} m\nOEB  = {fmt(rep.oeb)} rad\n")
    if rep.flags:
        summary += f"flags: {';'.join(rep.flags)}\n"
    click.echo(summary, nl=False, err=out is None)
    _emit(to_csv(BOUND_HEADER, [row]), out)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path(dir_okay=False))
@click.option("--sweep", "sweep_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None)
@click.option("--trials", type=click.IntRange(1), default=None, help="Overrides the sweep file")
@click.option("--workers", type=click.IntRange(1), default=1)
@click.option("--no-los", is_flag=True, help="Skip the variants with the direct path")
def sweep(scenario_path, sweep_path, out, seed, trials, workers, no_los):
    """Monte-Carlo sweep of one parameter over random placements."""
    sc = _load(scenario_path, seed, False)
    try:
        data = tomllib.loads(Path(sweep_path).read_text(encoding="utf-8"))
        if trials is not None:
            data["trials"] = trials
        spec = sweep_from_dict(data)
    except (ScenarioError, OSError, tomllib.TOMLDecodeError) as exc:
        _input_error(f"{sweep_path}: {exc}")
    result = run_sweep(sc, spec, sc.seed, workers=workers, with_los=not no_los)
    _emit(to_csv(SWEEP_HEADER, sweep_rows(result, not no_los)), out)
    total = sum(result.failures(v) for v in spec.values)
    click.echo(f"{len(result.rows)} trials, {total} failed", err=True)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None)
@click.option("--no-los", is_flag=True)
def validate(scenario_path, seed, no_los):
    """Oracle equivalence and structural checks on a desk-scale scenario."""
    sc = _load(scenario_path, seed, no_los)
    try:
        reports = run_validation(sc)
    except ScenarioTooLarge as exc:
        _input_error(exc)
    failed = 0
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        failed += not r.passed
        line = f"{status}  {r.name:<40s}"
        if r.residuals:
            line += f" worst={r.worst:.3e} tol={r.tolerance:.0e}"
        click.echo(line)
        for note in r.notes:
            click.echo(f"      {note}")
    click.echo(f"{len(reports) - failed}/{len(reports)} checks passed")
    sys.exit(EXIT_FAIL if failed else EXIT_OK)


if __name__ == "__main__":
    main()
