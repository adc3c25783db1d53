"""Equivalent FIM by Schur complement, and structural checks of the loss terms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .arrays import aoi_alphas, steering
from .fim_core import FACTOR_TABLE, build_context, complex_block, data_fim, fim_block, prior_fim
from .labels import (BETA_KINDS, GEOMETRIC_KINDS, RIS_ANGLE_KINDS, LabeledMatrix,
                     ParamLabel)

PINV_THRESHOLD = 1e-12


@dataclass(frozen=True, eq=False)
class EfimResult:
    efim: LabeledMatrix
    info_loss: LabeledMatrix
    nuisance_condition: float
    pinv_used: bool = False


def _scaled_solver(J22: np.ndarray, threshold: float = PINV_THRESHOLD):
    """Return (solve, condition, pinv_used) for the symmetric PSD block J22.

    The block is Jacobi-scaled first: FIM entries routinely span twenty
    orders of magnitude (delays vs angles), which would otherwise swamp the
    condition estimate.
    """
    d = np.sqrt(np.clip(np.diag(J22), 0, None))
    d[d == 0] = 1.0
    S = J22 / np.outer(d, d)
    w = np.linalg.eigvalsh(S)
    wmax = max(w[-1], 0.0)
    cond = np.inf if w[0] <= 0 else wmax / w[0]
    if wmax > 0 and w[0] > threshold * wmax:
        try:
            c = cho_factor(S)
            return (lambda B: cho_solve(c, B / d[:, None]) / d[:, None]), cond, False
        except LinAlgError:
            pass
    # eigen-thresholded pseudo-inverse; exact for Schur complements when the
    # cross block lies in the range of J22, which holds for Gram-type FIMs
    w, V = np.linalg.eigh(S)
    keep = w > threshold * max(wmax, np.finfo(float).tiny)
    Sp = (V[:, keep] / w[keep]) @ V[:, keep].T
    return (lambda B: (Sp @ (B / d[:, None])) / d[:, None]), cond, True


def schur(J11, J12, J22, threshold: float = PINV_THRESHOLD):
    """(J11 - J12 J22^-1 J12^T, loss, condition, pinv_used) for plain arrays."""
    if J22.size == 0:
        return J11, np.zeros_like(J11), 1.0, False
    solve, cond, pinv = _scaled_solver(J22, threshold)
    loss = J12 @ solve(J12.T)
    loss = (loss + loss.T) / 2
    return J11 - loss, loss, cond, pinv


def efim(J: LabeledMatrix, keep: Iterable, threshold: float = PINV_THRESHOLD) -> EfimResult:
    """EFIM of the ``keep`` labels with every other label treated as nuisance."""
    keep = list(keep) if not isinstance(keep, (set, frozenset)) else [l for l in J.labels if l in keep]
    if not keep:
        raise ValueError("keep set is empty")
    keep_set = set(keep)
    if len(keep_set) != len(keep) or not keep_set <= set(J.labels):
        raise ValueError("keep labels must be distinct labels of J")
    if len(keep_set) == len(J.labels):
        raise ValueError("keep set covers every label; nothing to eliminate")
    rest = [l for l in J.labels if l not in keep_set]
    Je, loss, cond, pinv = schur(J.block(keep, keep), J.block(keep, rest), J.block(rest, rest), threshold)
    return EfimResult(LabeledMatrix(keep, Je), LabeledMatrix(keep, loss), cond, pinv)


def geometric_labels(J: LabeledMatrix, kinds=GEOMETRIC_KINDS) -> list:
    return [l for l in J.labels if l.kind in kinds]


def channel_efim(J: LabeledMatrix, beta_prior, kinds=GEOMETRIC_KINDS) -> EfimResult:
    """EFIM of the geometric labels of ``kinds``.

    Labels of other geometric kinds are dropped (not eliminated); the path
    gains are eliminated unless they are perfectly known, in which case they
    are dropped too.
    """
    keep = [l for l in J.labels if l.kind in kinds]
    if isinstance(beta_prior, str):
        sub = J.sub(keep)
        zero = LabeledMatrix(keep, np.zeros((len(keep), len(keep))))
        return EfimResult(sub, zero, 1.0, False)
    return efim(J.sub(keep + [l for l in J.labels if l.kind in BETA_KINDS]), keep)


# ------------------------------------------------- gain blocks and rank

@dataclass
class Report:
    """Named residuals with pass/fail against a tolerance."""

    name: str
    residuals: dict = field(default_factory=dict)
    tolerance: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def worst(self) -> float:
        return max(self.residuals.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return bool(self.worst <= self.tolerance)


def _rel(a, b, scale=None):
    scale = np.abs(b).max() if scale is None else scale
    return float(np.abs(np.asarray(a) - np.asarray(b)).max() / scale) if scale > 0 else float(np.abs(a - b).max())


def beta_structure_report(J: LabeledMatrix, literal: bool = False) -> Report:
    """Gain-block structure under a unitary sequence matrix.

    Always checks that the real/imaginary gain blocks are diagonal and equal
    and that their cross block vanishes.  ``literal=True`` additionally checks
    the cross block against the imaginary-imaginary block entrywise.
    """
    rr, ii, ri = (J.kind_block("beta_re", "beta_re"), J.kind_block("beta_im", "beta_im"),
                  J.kind_block("beta_re", "beta_im"))
    scale = max(np.abs(np.diag(rr)).max(), np.abs(np.diag(ii)).max())
    off = lambda X: np.abs(X - np.diag(np.diag(X))).max()  # noqa: E731
    rep = Report("gain blocks", tolerance=1e-10)
    rep.residuals["rr_offdiag"] = off(rr) / scale
    rep.residuals["ii_offdiag"] = off(ii) / scale
    rep.residuals["rr_vs_ii"] = np.abs(rr - ii).max() / scale
    rep.residuals["ri_zero"] = np.abs(ri).max() / scale
    if literal:
        rep.residuals["ri_vs_ii"] = np.abs(ri - ii).max() / scale
    return rep


def numerical_rank(M: np.ndarray, rtol: float = 1e-9) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0


# ------------------------------------------------------- information loss

# same-factor pairs whose loss does not factorize; handled by special_loss_blocks
SPECIAL_PAIRS = (("theta_ru", "theta_ru"), ("phi_ru", "phi_ru"), ("theta_ru", "phi_ru"),
                 ("theta_tu", "theta_tu"), ("phi_tu", "phi_tu"), ("theta_tu", "phi_tu"),
                 ("tau", "tau"))
_EXEMPT = {frozenset(("theta_ru", "phi_ru")), frozenset(("theta_tu", "phi_tu"))}


def _ris_only(scenario):
    return scenario.replace(include_los=False) if scenario.include_los else scenario


def _bayes_parts(scenario):
    ctx = build_context(_ris_only(scenario))
    J = data_fim(ctx, include_los=False)
    bp = scenario.beta_prior
    Jt = J + prior_fim(None if isinstance(bp, str) else bp, ctx.m1)
    return ctx, J, Jt


def _info_scale(J: LabeledMatrix, k1: str, k2: str) -> float:
    """sqrt(max J_k1k1 * max J_k2k2): the natural size of a (k1, k2) block.

    Residuals are measured against this rather than the loss itself, which
    can be exactly zero in theory (e.g. receive angles of a centered array).
    """
    d1 = np.abs(np.diag(J.kind_block(k1, k1))).max()
    d2 = np.abs(np.diag(J.kind_block(k2, k2))).max()
    return float(np.sqrt(d1 * d2)) or 1.0


def _direct_loss(Jt: LabeledMatrix, k1: str, k2: str) -> np.ndarray:
    geo = geometric_labels(Jt)
    res = efim(Jt.sub(geo + Jt.select(BETA_KINDS)), geo)
    return res.info_loss.block(res.info_loss.select([k1]), res.info_loss.select([k2]))


def verify_loss_factorization(scenario) -> Report:
    """Loss block = J~_bb^-1 J_bb J_v1v2 for every non-exempt pair of distinct kinds."""
    _, J, Jt = _bayes_parts(scenario)
    factor = np.diag(np.diag(J.kind_block("beta_re", "beta_re"))
                     / np.diag(Jt.kind_block("beta_re", "beta_re")))
    rep = Report("loss factorization", tolerance=1e-8)
    geo = geometric_labels(Jt)
    loss = efim(Jt.sub(geo + Jt.select(BETA_KINDS)), geo).info_loss
    for i, k1 in enumerate(GEOMETRIC_KINDS):
        for k2 in GEOMETRIC_KINDS[i + 1:]:
            if frozenset((k1, k2)) in _EXEMPT:
                continue
            direct = loss.block(loss.select([k1]), loss.select([k2]))
            fact = factor @ J.kind_block(k1, k2)
            rep.residuals[f"{k1}/{k2}"] = _rel(fact, direct, _info_scale(J, k1, k2))
    return rep


def special_loss_blocks(scenario) -> Report:
    """Loss of same-factor pairs from complex gain correlations.

    For path m, with z_v = (2/sigma^2) d_v^H d_beta_re (complex), the loss is
    Re{z_v1 conj(z_v2)} / J~_bb; equivalently |J_v,bi + j J_v,br|^2 / J~_bb on
    the diagonal.
    """
    ctx, _, Jt = _bayes_parts(scenario)
    jt = np.diag(Jt.kind_block("beta_re", "beta_re"))
    idx = np.arange(1, ctx.m1 + 1)
    rep = Report("special loss blocks", tolerance=1e-8)
    for k1, k2 in SPECIAL_PAIRS:
        z1 = np.diag(complex_block(ctx, k1, idx, "beta_re", idx))
        z2 = np.diag(complex_block(ctx, k2, idx, "beta_re", idx))
        closed = np.diag((z1 * np.conj(z2)).real / jt)
        direct = _direct_loss(Jt, k1, k2)
        rep.residuals[f"{k1}/{k2}"] = _rel(closed, direct, _info_scale(Jt, k1, k2))
    return rep


# ------------------------------------------------------------ estimability

def estimability_report(scenario, rtol: float = 1e-8) -> dict[str, bool]:
    """Per geometric kind: is its EFIM diagonal block nonsingular?

    The block is scaled by the diagonal of the matching data-FIM block (paths
    differ in strength by orders of magnitude); it counts as singular when its
    smallest scaled eigenvalue is below ``rtol``.
    """
    ctx = build_context(scenario)
    J = data_fim(ctx)
    bp = scenario.beta_prior
    Jt = J if isinstance(bp, str) else J + prior_fim(bp, ctx.m1, scenario.include_los)
    res = channel_efim(Jt, bp)
    out = {}
    for kind in GEOMETRIC_KINDS:
        labs = res.efim.select([kind])
        if not labs:
            continue
        d = np.diag(J.block(labs, labs))
        if np.any(d <= 0):
            out[kind] = False
            continue
        E = res.efim.block(labs, labs) / np.sqrt(np.outer(d, d))
        out[kind] = bool(np.linalg.eigvalsh(E)[0] > rtol)
    return out


def ris_angle_efim_residual(scenario) -> float:
    """max |EFIM| over the RIS-angle diagonal blocks relative to max |data FIM|.

    Meant for scenarios without a gain prior, where the blocks should vanish.
    """
    ctx = build_context(scenario)
    J = data_fim(ctx)
    res = channel_efim(J, None)
    worst = 0.0
    for kind in RIS_ANGLE_KINDS:
        labs = res.efim.select([kind])
        worst = max(worst, np.abs(res.efim.block(labs, labs)).max())
    return float(worst / np.abs(J.values).max())


# ------------------------------------------------- incidence vs reflection

def corollary_report(scenario) -> Report:
    """AoI weights and FIM columns as combinations of the AoR ones, per RIS."""
    ctx = build_context(_ris_only(scenario))
    J = data_fim(ctx, include_los=False)
    lam = scenario.waveform.wavelength
    rep = Report("AoI/AoR dependence", tolerance=1e-8)
    for m, (node, p) in enumerate(zip(scenario.ris, ctx.paths[1:]), start=1):
        if not node.array.is_planar_z:
            rep.notes.append(f"RIS {m} is not planar in its local frame; skipped")
            continue
        ak, ap = aoi_alphas(p.theta_tl, p.phi_tl, p.theta_rl, p.phi_rl)
        tl = steering(node.array, p.theta_tl, p.phi_tl, lam)
        rl = steering(node.array, p.theta_rl, p.phi_rl, lam)
        kscale = max(np.abs(rl.K).max(), np.abs(rl.P).max(), 1e-300)
        rep.residuals[f"K_rl[{m}]"] = np.abs(ak[0] * tl.K + ak[1] * tl.P - rl.K).max() / kscale
        rep.residuals[f"P_rl[{m}]"] = np.abs(ap[0] * tl.K + ap[1] * tl.P - rl.P).max() / kscale
        # the AoI and AoR derivatives enter with opposite signs of j
        col = lambda k: J.block(J.labels, [ParamLabel(k, m)])[:, 0]  # noqa: E731
        for target, (a1, a2) in (("theta_rl", ak), ("phi_rl", ap)):
            pred = -(a1 * col("theta_tl") + a2 * col("phi_tl"))
            actual = col(target)
            s = np.abs(actual).max()
            rep.residuals[f"J_{target}[{m}]"] = _rel(pred, actual, s if s > 0 else None)
    return rep


__all__ = ["EfimResult", "efim", "schur", "channel_efim", "Report", "beta_structure_report",
           "numerical_rank", "verify_loss_factorization", "special_loss_blocks",
           "estimability_report", "ris_angle_efim_residual", "corollary_report",
           "FACTOR_TABLE", "fim_block"]
