"""From channel-parameter information to UE position/orientation bounds.

Location parameters per entity are ordered [theta0, phi0, px, py, pz]; the UE
comes first, followed by every RIS whose pose is uncertain.  Perfectly known
RISs carry no location labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .efim_analysis import EfimResult, channel_efim, efim, schur
from .fim_core import assemble_bayesian_fim, build_context
from .geometry import SPEED_OF_LIGHT, GeometryError, azimuth_degenerate, path_vectors
from .labels import GEOMETRIC_KINDS, REDUCED_KINDS, LabeledMatrix, ParamLabel, zeta_labels
from .waveform import ris_control

ENTITY_KINDS = ("theta0", "phi0", "px", "py", "pz")
LOS_GEOMETRIC = ("theta_ru", "phi_ru", "theta_tu", "phi_tu", "tau")


class LocationLabel(NamedTuple):
    kind: str
    ris_index: int | None = None

    def __str__(self):
        return self.kind if self.ris_index is None else f"{self.kind}[{self.ris_index}]"


UE_LABELS = tuple(LocationLabel(f"ue_{k}") for k in ENTITY_KINDS)


def ris_labels(m: int) -> list[LocationLabel]:
    return [LocationLabel(f"ris_{k}", m) for k in ENTITY_KINDS]


def location_labels(scenario) -> list[LocationLabel]:
    out = list(UE_LABELS)
    for m in scenario.perturbed:
        out += ris_labels(m)
    return out


def channel_labels(scenario, include_aoi: bool = False, include_los: bool | None = None):
    los = scenario.include_los if include_los is None else include_los
    kinds = GEOMETRIC_KINDS if include_aoi else REDUCED_KINDS
    return zeta_labels(scenario.m1, los, kinds)


# ----------------------------------------------------------------- Jacobian

def _angle_grads(v):
    """Gradients of (elevation, azimuth) with respect to the vector v."""
    x, y, z = v
    r2 = v @ v
    rho2 = x * x + y * y
    d_theta = -(np.array([0.0, 0.0, 1.0]) - z * v / r2) / np.sqrt(rho2)
    d_phi = np.array([-y, x, 0.0]) / rho2
    return d_theta, d_phi


def _frame_rates(v, theta0):
    """d v_local / d theta0 and d v_local / d phi0 for v_local = Q^T (target - origin)."""
    n = np.array([0.0, -np.sin(theta0), np.cos(theta0)])  # R_x(theta0) e_z
    return np.cross([1.0, 0.0, 0.0], v), -np.cross(n, v)


@dataclass(frozen=True, eq=False)
class Jacobian:
    rows: tuple
    cols: tuple
    values: np.ndarray

    def block(self, rows, cols) -> np.ndarray:
        ri = {l: i for i, l in enumerate(self.rows)}
        ci = {l: i for i, l in enumerate(self.cols)}
        return self.values[np.ix_([ri[r] for r in rows], [ci[c] for c in cols])]


def jacobian(scenario, include_aoi: bool = False, include_los: bool | None = None) -> Jacobian:
    """d(channel parameter)/d(location parameter), rows = location labels."""
    rows = location_labels(scenario)
    cols = channel_labels(scenario, include_aoi, include_los)
    ri = {l: i for i, l in enumerate(rows)}
    ci = {l: j for j, l in enumerate(cols)}
    U = np.zeros((len(rows), len(cols)))
    bs, ue = scenario.bs.pose, scenario.ue.pose

    def put(entity, m, kind, grad_o=None, grad_p=None):
        prefix = "ue" if entity is None else "ris"
        lab = ParamLabel(kind, m)
        if lab not in ci:
            return
        j = ci[lab]
        for k, g in zip(("theta0", "phi0"), (grad_o if grad_o is not None else (None, None))):
            r = LocationLabel(f"{prefix}_{k}", entity)
            if g is not None and r in ri:
                U[ri[r], j] += g
        if grad_p is not None:
            for k, g in zip(("px", "py", "pz"), grad_p):
                r = LocationLabel(f"{prefix}_{k}", entity)
                if r in ri:
                    U[ri[r], j] += g

    def angles(vec, name, m):
        if azimuth_degenerate(vec):
            raise GeometryError(f"path {m}: azimuth {name} undefined (direction on the local z axis)")
        return _angle_grads(vec)

    paths = ([0] if (scenario.include_los if include_los is None else include_los) else [])
    paths += list(range(1, scenario.m1 + 1))
    Q_ue = ue.rotation
    for m in paths:
        pose_m = None if m == 0 else scenario.ris[m - 1].pose
        vec = path_vectors(bs, ue, pose_m)
        ris_entity = m if m in scenario.perturbed else -1  # -1: labels absent

        # AoA at the UE: e = Q_ue^T (source - p)
        gt, gp = angles(vec["ru"], "phi_ru", m)
        rt, rp = _frame_rates(vec["ru"], ue.orientation[0])
        for kind, g in (("theta_ru", gt), ("phi_ru", gp)):
            put(None, m, kind, (g @ rt, g @ rp), -(Q_ue @ g))
            if m:
                put(ris_entity, m, kind, None, Q_ue @ g)

        # AoD at the BS (global frame)
        gt, gp = angles(vec["tu"], "phi_tu", m)
        for kind, g in (("theta_tu", gt), ("phi_tu", gp)):
            put(None if m == 0 else ris_entity, m, kind, None, g)

        if m == 0:
            d = vec["tu"]
            put(None, 0, "tau", None, d / (np.linalg.norm(d) * SPEED_OF_LIGHT))
            continue

        Q_m = pose_m.rotation
        # AoR: v = Q_m^T (p - p_m); AoI: c = Q_m^T (p_BS - p_m)
        for key, (kt, kp) in (("tl", ("theta_tl", "phi_tl")), ("rl", ("theta_rl", "phi_rl"))):
            gt, gp = angles(vec[key], kp, m)
            rt, rp = _frame_rates(vec[key], pose_m.orientation[0])
            for kind, g in ((kt, gt), (kp, gp)):
                put(ris_entity, m, kind, (g @ rt, g @ rp), -(Q_m @ g))
                if key == "tl":
                    put(None, m, kind, None, Q_m @ g)

        d1 = pose_m.position - bs.position
        d2 = ue.position - pose_m.position
        u1 = d1 / (np.linalg.norm(d1) * SPEED_OF_LIGHT)
        u2 = d2 / (np.linalg.norm(d2) * SPEED_OF_LIGHT)
        put(None, m, "tau", None, u2)
        put(ris_entity, m, "tau", None, u1 - u2)
    return Jacobian(tuple(rows), tuple(cols), U)


# ------------------------------------------------------- location-space FIM

def location_fim(scenario, channel_efim_matrix: LabeledMatrix, jac: Jacobian | None = None) -> LabeledMatrix:
    """Upsilon J Upsilon^T over the location labels."""
    if jac is None:
        aoi = any(l.kind in ("theta_rl", "phi_rl") for l in channel_efim_matrix.labels)
        los = any(l.path == 0 for l in channel_efim_matrix.labels)
        jac = jacobian(scenario, include_aoi=aoi, include_los=los)
    if set(jac.cols) != set(channel_efim_matrix.labels):
        missing = set(jac.cols) ^ set(channel_efim_matrix.labels)
        raise ValueError(f"channel labels do not match the Jacobian: {sorted(map(str, missing))[:4]}")
    J = channel_efim_matrix.block(jac.cols, jac.cols)
    return LabeledMatrix(jac.rows, jac.values @ J @ jac.values.T)


def _prior_matrix(scenario, labels, nonbayesian: bool) -> np.ndarray:
    P = np.zeros((len(labels), len(labels)))
    idx = {l: i for i, l in enumerate(labels)}
    if scenario.ue_prior is not None:
        ii = [idx[l] for l in UE_LABELS]
        P[np.ix_(ii, ii)] += scenario.ue_prior
    if not nonbayesian:
        for m in scenario.perturbed:
            s2 = scenario.ris[m - 1].sigma2
            if s2 is not None:
                for l in ris_labels(m):
                    if l in idx:
                        P[idx[l], idx[l]] += 2.0 / s2
    return P


def per_path_applicable(scenario) -> bool:
    if scenario.m1 == 0:
        return True
    ctrl = ris_control(scenario)
    return ctrl.unitary and (ctrl.zero_sum or not scenario.include_los)


def _ue_efim_from_location(scenario, JL: LabeledMatrix, nonbayesian: bool) -> EfimResult:
    JL = JL + LabeledMatrix(JL.labels, _prior_matrix(scenario, JL.labels, nonbayesian))
    if len(JL) == len(UE_LABELS):
        return EfimResult(JL, JL.scaled(0.0), 1.0, False)
    return efim(JL, list(UE_LABELS))


def location_bayesian_efim(scenario, route: str = "auto", nonbayesian: bool = False,
                           include_aoi: bool = False, J: LabeledMatrix | None = None) -> EfimResult:
    """UE position/orientation EFIM.

    ``route="per_path"`` composes one term per path (valid under unitary,
    zero-sum RIS sequences), ``"monolithic"`` maps the whole channel EFIM and
    eliminates the RIS poses jointly, ``"auto"`` picks per-path when valid.
    ``nonbayesian`` drops the RIS pose priors.
    """
    if route == "auto":
        route = "per_path" if per_path_applicable(scenario) else "monolithic"
    if J is None:
        J = assemble_bayesian_fim(scenario)
    kinds = GEOMETRIC_KINDS if include_aoi else REDUCED_KINDS
    bp = scenario.beta_prior
    if route == "monolithic":
        Je = channel_efim(J, bp, kinds)
        JL = location_fim(scenario, Je.efim, jacobian(scenario, include_aoi))
        res = _ue_efim_from_location(scenario, JL, nonbayesian)
        return EfimResult(res.efim, res.info_loss, res.nuisance_condition,
                          res.pinv_used or Je.pinv_used)
    if route != "per_path":
        raise ValueError(f"unknown route {route!r}")
    if not per_path_applicable(scenario):
        raise ValueError("per-path composition needs unitary zero-sum RIS sequences")

    jac = jacobian(scenario, include_aoi)
    ue_idx = list(UE_LABELS)
    total = np.zeros((5, 5))
    loss = np.zeros((5, 5))
    cond, pinv = 1.0, False
    paths = ([0] if scenario.include_los else []) + list(range(1, scenario.m1 + 1))
    prior = _prior_matrix(scenario, jac.rows, nonbayesian)
    pidx = {l: i for i, l in enumerate(jac.rows)}
    if scenario.ue_prior is not None:
        total += scenario.ue_prior
    for m in paths:
        labs = [l for l in J.labels if l.path == m]
        Je = channel_efim(J.sub(labs), bp, kinds)
        cols = list(Je.efim.labels)
        pinv |= Je.pinv_used
        Jm = Je.efim.values
        U_ue = jac.block(ue_idx, cols)
        ue_term = U_ue @ Jm @ U_ue.T
        if m in scenario.perturbed:
            rl = ris_labels(m)
            U_r = jac.block(rl, cols)
            ii = [pidx[l] for l in rl]
            Jrr = U_r @ Jm @ U_r.T + prior[np.ix_(ii, ii)]
            term, l_m, c, p = schur(ue_term, U_ue @ Jm @ U_r.T, Jrr)
            loss += l_m
            cond = max(cond, c)
            pinv |= p
        else:
            term = ue_term
        total += term
    return EfimResult(LabeledMatrix(ue_idx, total), LabeledMatrix(ue_idx, loss), cond, pinv)


# ------------------------------------------------------------------ bounds

@dataclass
class BoundsReport:
    speb: float
    soeb: float
    location_efim: LabeledMatrix
    flags: list = field(default_factory=list)
    null_space: np.ndarray | None = None

    @property
    def peb(self) -> float:
        return float(np.sqrt(self.speb))

    @property
    def oeb(self) -> float:
        return float(np.sqrt(self.soeb))

    @property
    def singular(self) -> bool:
        return "singular" in self.flags


def speb_soeb(efim_matrix: LabeledMatrix, rtol: float = 1e-12) -> BoundsReport:
    """SOEB = trace of the orientation part of the inverse, SPEB of the position part."""
    E = efim_matrix.block(UE_LABELS, UE_LABELS)
    d = np.sqrt(np.clip(np.diag(E), 0, None))
    safe = np.where(d > 0, d, 1.0)
    S = E / np.outer(safe, safe)
    w, V = np.linalg.eigh(S)
    if np.any(d == 0) or w[0] <= rtol * max(w[-1], 0.0):
        null = V[:, w <= rtol * max(w[-1], 0.0)] / safe[:, None]
        null = null / np.linalg.norm(null, axis=0) if null.size else null
        return BoundsReport(np.inf, np.inf, efim_matrix, ["singular"], null)
    inv = (V / w) @ V.T / np.outer(safe, safe)
    diag = np.diag(inv)
    return BoundsReport(float(diag[2:].sum()), float(diag[:2].sum()), efim_matrix)


def bounds(scenario, route: str = "auto", nonbayesian: bool = False) -> BoundsReport:
    res = location_bayesian_efim(scenario, route=route, nonbayesian=nonbayesian)
    rep = speb_soeb(res.efim)
    if res.pinv_used:
        rep.flags.append("pinv")
    return rep


__all__ = ["LocationLabel", "UE_LABELS", "ris_labels", "location_labels", "channel_labels",
           "Jacobian", "jacobian", "location_fim", "location_bayesian_efim", "BoundsReport",
           "speb_soeb", "bounds", "per_path_applicable", "build_context"]
