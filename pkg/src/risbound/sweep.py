"""Monte-Carlo sweeps over random placements."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .arrays import square_ura
from .fim_core import assemble_bayesian_fim
from .geometry import GeometryError
from .labels import LabeledMatrix
from .localization import location_bayesian_efim, speb_soeb
from .scenario import Layout, Scenario, ScenarioError, random_placement
from .waveform import WaveformError

VARIABLES = ("n_rx_elements", "n_ris_elements", "n_ris", "sigma_m", "tx_power")
# (non-Bayesian | Bayesian) x (no LOS | LOS)
VARIANTS = ("nb", "b", "nb_los", "b_los")
QUANTITIES = ("speb_m2", "soeb_rad2", "peb_m", "oeb_rad")
COLUMNS = tuple(f"{v}_{q}" for v in VARIANTS for q in QUANTITIES)


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    trials: int = 200
    layout: Layout = Layout()

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ScenarioError("variable", f"expected one of {', '.join(VARIABLES)}")
        if not self.values:
            raise ScenarioError("values", "empty value list")
        if self.trials < 1:
            raise ScenarioError("trials", "need at least one trial")


def sweep_from_dict(data: dict) -> SweepSpec:
    for k in data:
        if k not in ("variable", "values", "trials", "half_width_m", "ris_height_m", "ue_height_m"):
            raise ScenarioError(k, "unknown key")
    if "variable" not in data or "values" not in data:
        raise ScenarioError("sweep", "variable and values are required")
    layout = Layout(half_width=float(data.get("half_width_m", 50.0)),
                    ris_height=float(data.get("ris_height_m", 35.0)),
                    ue_height=float(data.get("ue_height_m", 5.0)))
    return SweepSpec(data["variable"], tuple(data["values"]), int(data.get("trials", 200)), layout)


def apply_variable(template: Scenario, variable: str, value) -> Scenario:
    lam = template.waveform.wavelength
    if variable == "n_rx_elements":
        return template.replace(ue=dataclasses.replace(template.ue, array=square_ura(int(value), lam / 2)))
    if variable == "n_ris_elements":
        g = square_ura(int(value), lam / 2)
        return template.replace(ris=tuple(
            dataclasses.replace(r, array=g, gamma=np.ones(g.count, dtype=complex)) for r in template.ris))
    if variable == "n_ris":
        n = int(value)
        if not template.ris:
            raise ScenarioError("ris", "n_ris sweeps need at least one RIS template")
        src = list(template.ris)
        return template.replace(ris=tuple(src[min(i, len(src) - 1)] for i in range(n)))
    if variable == "sigma_m":
        return template.replace(ris=tuple(
            r if r.known else dataclasses.replace(r, sigma2=float(value)) for r in template.ris))
    if variable == "tx_power":
        return template.replace(waveform=dataclasses.replace(template.waveform, tx_power_dbm=float(value)))
    raise ScenarioError("variable", f"unknown sweep variable {variable!r}")


def _without_los(J: LabeledMatrix) -> LabeledMatrix:
    return J.sub([l for l in J.labels if l.path != 0])


def trial_bounds(sc: Scenario, with_los: bool = True) -> tuple[dict, list]:
    """All bound variants for one placed scenario, keyed by column name."""
    out, flags = {}, []
    J = assemble_bayesian_fim(sc.replace(include_los=with_los))
    variants = [(False, _without_los(J))] + ([(True, J)] if with_los else [])
    for los, JJ in variants:
        s = sc.replace(include_los=los)
        for bayes in (False, True):
            res = location_bayesian_efim(s, nonbayesian=not bayes, J=JJ)
            rep = speb_soeb(res.efim)
            name = ("b" if bayes else "nb") + ("_los" if los else "")
            out.update({f"{name}_speb_m2": rep.speb, f"{name}_soeb_rad2": rep.soeb,
                        f"{name}_peb_m": rep.peb, f"{name}_oeb_rad": rep.oeb})
            flags += [f"{name}:{f}" for f in rep.flags] + ([f"{name}:pinv"] if res.pinv_used else [])
    return out, flags


def run_trial(args) -> tuple[dict, list, str | None]:
    template, variable, value, seed, trial, with_los, layout = args
    # one stream per trial, shared across sweep values (common random numbers)
    rng = np.random.default_rng([seed, trial])
    try:
        sc = random_placement(apply_variable(template, variable, value), rng, layout)
        vals, flags = trial_bounds(sc, with_los)
        return vals, flags, None
    except (GeometryError, WaveformError, ScenarioError, np.linalg.LinAlgError) as exc:
        return {}, [], f"{type(exc).__name__}: {exc}"


@dataclass
class SweepResult:
    spec: SweepSpec
    seed: int
    rows: list  # (value, trial, values, flags, error)

    def table(self, column: str) -> np.ndarray:
        """values x trials array of one column (nan for failed trials)."""
        out = np.full((len(self.spec.values), self.spec.trials), np.nan)
        pos = {v: i for i, v in enumerate(self.spec.values)}
        for value, trial, vals, _, _ in self.rows:
            if column in vals:
                out[pos[value], trial] = vals[column]
        return out

    def failures(self, value) -> int:
        return sum(1 for v, _, _, _, err in self.rows if v == value and err)


def run_sweep(template: Scenario, spec: SweepSpec, seed: int, workers: int = 1,
              with_los: bool = True) -> SweepResult:
    tasks = [(template, spec.variable, v, seed, t, with_los, spec.layout)
             for v in spec.values for t in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_trial, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        results = [run_trial(t) for t in tasks]
    rows = [(task[2], task[4], *res) for task, res in zip(tasks, results)]
    return SweepResult(spec, seed, rows)
