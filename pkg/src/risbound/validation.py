"""Checks that tie the closed-form FIM to the oracle and to its structural properties."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .efim_analysis import (Report, beta_structure_report, corollary_report, estimability_report,
                            numerical_rank, ris_angle_efim_residual, special_loss_blocks,
                            verify_loss_factorization)
from .fim_core import FACTOR_TABLE, Factor, build_context, data_fim, prior_fim
from .geometry import GeometryError
from .labels import GEOMETRIC_KINDS, RIS_ANGLE_KINDS, LabeledMatrix, label_values
from .localization import (channel_labels, jacobian, location_bayesian_efim, location_fim,
                           location_labels, per_path_applicable)
from .oracle import fd_angle_jacobian, fd_fim, fd_location_fim
from .waveform import ris_control

MAX_PARAMETERS = 40
EPS = np.finfo(float).eps


class ScenarioTooLarge(ValueError):
    pass


def _prior(scenario, labels) -> LabeledMatrix:
    bp = scenario.beta_prior
    if isinstance(bp, str):
        return LabeledMatrix(labels, np.zeros((len(labels), len(labels))))
    return prior_fim(bp, scenario.m1, scenario.include_los)


PAIRWISE_STEPS = {"angle": 1e-3, "tau_samples": 1e-3, "beta": 1e-3}


def _kind_groups(labels):
    groups = {}
    for i, lab in enumerate(labels):
        groups.setdefault((lab.kind, lab.path == 0), []).append(i)
    return groups


def oracle_report(scenario, table: Mapping[str, Factor] = FACTOR_TABLE, J_fd=None) -> Report:
    """Closed-form Bayesian FIM against the finite-difference one (relative Frobenius)."""
    J = data_fim(build_context(scenario), table=table)
    J_fd = fd_fim(scenario) if J_fd is None else J_fd
    prior = _prior(scenario, J.labels)
    A, B = (J + prior).values, (J_fd + prior).values
    rep = Report("oracle equivalence", tolerance=1e-6)
    rep.residuals["full"] = float(np.linalg.norm(A - B) / np.linalg.norm(B))
    return rep


def pairwise_oracle_report(scenario, table: Mapping[str, Factor] = FACTOR_TABLE, J_fd=None) -> Report:
    """One residual per pair of parameter kinds (LOS and RIS paths kept apart).

    Entries are normalized by sqrt(J_ii J_jj) of the oracle, which makes weakly
    observed parameters count as much as strong ones.  Their derivatives are
    small next to the signal, so the oracle uses wider steps with Richardson
    extrapolation here to keep roundoff out of the comparison.
    """
    J = data_fim(build_context(scenario), table=table)
    J_fd = fd_fim(scenario, steps=PAIRWISE_STEPS, richardson=True) if J_fd is None else J_fd
    A, B = J.values, J_fd.values
    d = np.sqrt(np.clip(np.diag(B), 0, None))
    d[d == 0] = 1.0
    N = np.abs(A - B) / np.outer(d, d)
    rep = Report("oracle pairwise blocks", tolerance=1e-5)
    groups = _kind_groups(J.labels)
    for (k1, los1), r in groups.items():
        for (k2, los2), c in groups.items():
            key = f"{k1}{'@los' if los1 else ''}/{k2}{'@los' if los2 else ''}"
            rep.residuals[key] = float(N[np.ix_(r, c)].max())
    return rep


def symmetry_report(scenario, table: Mapping[str, Factor] = FACTOR_TABLE) -> Report:
    """Asymmetry of the block-by-block assembly before it is symmetrized."""
    raw = data_fim(build_context(scenario), table=table, symmetrize=False).values
    rep = Report("symmetry", tolerance=1e-12)
    rep.residuals["asymmetry"] = float(np.linalg.norm(raw - raw.T) / np.linalg.norm(raw))
    return rep


def psd_report(scenario, table: Mapping[str, Factor] = FACTOR_TABLE) -> Report:
    w = np.linalg.eigvalsh(data_fim(build_context(scenario), table=table).values)
    rep = Report("positive semidefinite", tolerance=1e-8)
    rep.residuals["negative_eigenvalue"] = float(max(0.0, -w[0]) / max(w[-1], EPS))
    return rep


def rank_report(scenario, rtol: float = 1e-9) -> Report:
    """Numerical rank of the RIS-path data FIM, raw and Jacobi-scaled, relative to 9 M1."""
    J = data_fim(build_context(scenario), include_los=False).values
    d = np.sqrt(np.clip(np.diag(J), 0, None))
    d[d == 0] = 1.0
    limit = 9 * scenario.m1
    rep = Report("rank", tolerance=0.0)
    raw, scaled = numerical_rank(J, rtol), numerical_rank(J / np.outer(d, d), rtol)
    rep.residuals["raw_excess"] = float(max(0, raw - limit))
    rep.residuals["scaled_excess"] = float(max(0, scaled - limit))
    rep.notes.append(f"rank raw={raw} scaled={scaled} size={J.shape[0]} limit={limit}")
    return rep


def los_decoupling_report(scenario, table: Mapping[str, Factor] = FACTOR_TABLE) -> Report:
    """LOS/RIS cross blocks of the data FIM, normalized by sqrt(J_ii J_jj)."""
    J = data_fim(build_context(scenario), include_los=True, table=table, symmetrize=False)
    d = np.sqrt(np.clip(np.diag(J.values), 0, None))
    d[d == 0] = 1.0
    N = J.values / np.outer(d, d)
    los = [i for i, l in enumerate(J.labels) if l.path == 0]
    ris = [i for i, l in enumerate(J.labels) if l.path != 0]
    rep = Report("LOS/RIS decoupling", tolerance=1e-14)
    rep.residuals["cross"] = float(np.abs(N[np.ix_(los, ris)]).max()) if ris else 0.0
    return rep


def jacobian_report(scenario, h: float = 1e-6, include_aoi: bool = True, tol: float = 1e-6) -> Report:
    """Analytic location Jacobian against central differences of the geometry.

    An entry passes when |U - FD| <= tol |FD| + 16 eps |f| / h, the second
    term being the roundoff of differencing a parameter of size |f|.  The
    residual reported is that error divided by the allowance, times ``tol``.
    """
    try:
        jac = jacobian(scenario, include_aoi=include_aoi)
    except GeometryError as exc:
        rep = Report("Jacobian", {"degenerate": np.inf}, tol)
        rep.notes.append(str(exc))
        return rep
    fd = fd_angle_jacobian(scenario, list(jac.rows), list(jac.cols), h)
    f = np.abs(label_values(jac.cols, scenario.path_params()))
    allow = tol * np.abs(fd) + 16 * EPS * f[None, :] / h
    r = tol * np.abs(jac.values - fd) / allow
    rep = Report("Jacobian", tolerance=tol)
    for i, row in enumerate(jac.rows):
        rep.residuals[str(row)] = float(r[i].max())
    return rep


def location_oracle_report(scenario, h: float = 1e-5) -> Report:
    """Channel-to-location mapping against differencing mu through the geometry.

    Uses the full geometric parameterization (angles of incidence included)
    with the path gains known, so both sides are the same Fisher information.
    """
    ctx = build_context(scenario)
    J = data_fim(ctx)
    labs = channel_labels(scenario, include_aoi=True)
    JL = location_fim(scenario, J.sub(labs), jacobian(scenario, include_aoi=True))
    fd = fd_location_fim(scenario, list(JL.labels), h=h, richardson=True)
    A, B = JL.values, fd.block(JL.labels, JL.labels)
    rep = Report("location-space oracle", tolerance=1e-6)
    rep.residuals["full"] = float(np.linalg.norm(A - B) / np.linalg.norm(B))
    return rep


def composition_report(scenario) -> Report:
    rep = Report("per-path composition", tolerance=1e-8)
    a = location_bayesian_efim(scenario, route="per_path").efim.values
    b = location_bayesian_efim(scenario, route="monolithic").efim.values
    rep.residuals["ue_efim"] = float(np.abs(a - b).max() / np.abs(b).max())
    return rep


def ris_angle_report(scenario) -> Report:
    rep = Report("zero RIS-angle EFIM without gain prior", tolerance=1e-8)
    rep.residuals["max_entry"] = ris_angle_efim_residual(scenario)
    return rep


def run_validation(scenario, table: Mapping[str, Factor] = FACTOR_TABLE) -> list[Report]:
    """Every applicable check on a desk-scale scenario."""
    n = scenario.parameter_count()
    if n > MAX_PARAMETERS:
        raise ScenarioTooLarge(
            f"{n} channel parameters; validation differentiates the full signal per parameter "
            f"and is limited to {MAX_PARAMETERS}. Reduce the number of RISs or drop the LOS path.")
    reports = [oracle_report(scenario, table), pairwise_oracle_report(scenario, table),
               symmetry_report(scenario, table), psd_report(scenario, table)]
    ctrl = ris_control(scenario) if scenario.m1 else None
    unitary = ctrl is not None and ctrl.unitary
    if scenario.m1:
        J = data_fim(build_context(scenario), table=table)
        if unitary:
            reports.append(beta_structure_report(J))
        reports.append(rank_report(scenario))
        reports.append(ris_angle_report(scenario.replace(beta_prior=None)))
        try:
            reports.append(corollary_report(scenario))
        except np.linalg.LinAlgError as exc:
            r = Report("AoI/AoR dependence")
            r.notes.append(f"skipped: {exc}")
            reports.append(r)
        if unitary and not isinstance(scenario.beta_prior, str):
            reports += [verify_loss_factorization(scenario), special_loss_blocks(scenario)]
        if scenario.include_los and ctrl.zero_sum:
            reports.append(los_decoupling_report(scenario, table))
    reports.append(jacobian_report(scenario))
    reports.append(location_oracle_report(scenario))
    if scenario.m1 and per_path_applicable(scenario):
        reports.append(composition_report(scenario))
    est = estimability_report(scenario)
    r = Report("estimability")
    r.notes.append("not estimable: " + (", ".join(k for k in GEOMETRIC_KINDS if k in est and not est[k])
                                        or "none"))
    reports.append(r)
    return reports


__all__ = ["MAX_PARAMETERS", "ScenarioTooLarge", "oracle_report", "pairwise_oracle_report", "symmetry_report", "psd_report",
           "rank_report", "los_decoupling_report", "jacobian_report", "location_oracle_report",
           "composition_report", "ris_angle_report", "run_validation", "RIS_ANGLE_KINDS",
           "location_labels"]
