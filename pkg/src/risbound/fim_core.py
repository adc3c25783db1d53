"""Closed-form Fisher information of the LOS and RIS channel parameters.

Every derivative of the noise-free signal of path m has the separable form

    c_m * gamma_t^m * rx_m[r] * (tx_m^H F x[n]) * w_n^k * exp(-j w_n tau_m)

where exactly one factor differs from the signal itself.  ``FACTOR_TABLE``
records, per parameter kind, which rx / tx / RIS-gain vector and which power
of the subcarrier frequency appear, together with the constant phase picked
up by the derivative.  Any FIM entry is then the real part of a product of
five Gram-type factors (receive, RIS gain, sequence correlation, transmit,
signal factor).  The LOS path is carried as an extra path with index 0, unit
RIS gain and an all-ones sequence column.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .arrays import steering
from .geometry import derive_path_params
from .labels import (BETA_KINDS, KINDS, LOS_KINDS, LabeledMatrix, ParamLabel,
                     eta_labels, zeta_labels)
from .waveform import effective_sigma2, precoder, ris_control, signal_factor


@dataclass(frozen=True)
class Factor:
    phase: complex
    amp: str   # "b": beta/sqrt(rho); "unit": 1/sqrt(rho)
    gain: str  # RIS gain vector: l, tl, ptl, rl, prl
    rx: str    # a, k, p  (steering vector or its K/P weighted version)
    tx: str
    freq: int  # power of w_n


FACTOR_TABLE: Mapping[str, Factor] = MappingProxyType({
    "theta_ru": Factor(-1j, "b", "l", "k", "a", 0),
    "phi_ru": Factor(-1j, "b", "l", "p", "a", 0),
    "theta_tl": Factor(1j, "b", "tl", "a", "a", 0),
    "phi_tl": Factor(1j, "b", "ptl", "a", "a", 0),
    "theta_rl": Factor(-1j, "b", "rl", "a", "a", 0),
    "phi_rl": Factor(-1j, "b", "prl", "a", "a", 0),
    "theta_tu": Factor(1j, "b", "l", "a", "k", 0),
    "phi_tu": Factor(1j, "b", "l", "a", "p", 0),
    "tau": Factor(-1j, "b", "l", "a", "a", 1),
    "beta_re": Factor(1, "unit", "l", "a", "a", 0),
    "beta_im": Factor(1j, "unit", "l", "a", "a", 0),
})


@dataclass(frozen=True, eq=False)
class FimContext:
    """Precomputed factors; column/entry 0 is the LOS path, 1..M1 the RIS paths."""

    m1: int
    include_los: bool
    paths: tuple
    rx: Mapping[str, np.ndarray]    # N_R x (M1+1)
    tx: Mapping[str, np.ndarray]    # N_T x (M1+1)
    gain: Mapping[str, np.ndarray]  # (M1+1,), conjugated as k_l, k_tl, ...
    amp: Mapping[str, np.ndarray]   # (M1+1,)
    seq_gram: np.ndarray            # [1 D]^H [1 D]
    signal: tuple                   # R_0, R_1, R_2 over all M1+1 delays
    ffh: np.ndarray                 # F F^H
    sigma2: float

    # views named after the matrices of the closed-form expressions
    @property
    def A_ru(self):
        return self.rx["a"][:, 1:]

    @property
    def K_ru(self):
        return self.rx["k"][:, 1:]

    @property
    def P_ru(self):
        return self.rx["p"][:, 1:]

    @property
    def A_tu(self):
        return self.tx["a"][:, 1:]

    @property
    def K_tu(self):
        return self.tx["k"][:, 1:]

    @property
    def P_tu(self):
        return self.tx["p"][:, 1:]

    @property
    def B(self):
        return np.diag(self.amp["b"][1:])

    @property
    def k_l(self):
        return self.gain["l"][1:]

    @property
    def k_tl(self):
        return self.gain["tl"][1:]

    @property
    def p_tl(self):
        return self.gain["ptl"][1:]

    @property
    def k_rl(self):
        return self.gain["rl"][1:]

    @property
    def p_rl(self):
        return self.gain["prl"][1:]

    @property
    def d_gram(self):
        return self.seq_gram[1:, 1:]

    @property
    def los_coupling(self):
        return self.seq_gram[0, 1:]

    def R(self, k: int):
        return self.signal[k][1:, 1:]

    def R_los_cross(self, k: int):
        return self.signal[k][0:1, 1:]

    def R_los(self, k: int):
        return self.signal[k][0, 0]


def build_context(scenario, printed_orientation: bool = True) -> FimContext:
    """Precompute every factor of the closed form.

    ``printed_orientation=False`` drops the conjugation of the RIS gain
    vectors; it exists only to reconcile conventions against the oracle.
    """
    cfg = scenario.waveform
    lam = cfg.wavelength
    m1 = len(scenario.ris)
    paths = tuple(derive_path_params(scenario, i) for i in range(m1 + 1))
    ctrl = ris_control(scenario)

    ue = [steering(scenario.ue.array, p.theta_ru, p.phi_ru, lam) for p in paths]
    bs = [steering(scenario.bs.array, p.theta_tu, p.phi_tu, lam) for p in paths]
    rx = {"a": np.column_stack([s.a for s in ue]),
          "k": np.column_stack([s.K * s.a for s in ue]),
          "p": np.column_stack([s.P * s.a for s in ue])}
    tx = {"a": np.column_stack([s.a for s in bs]),
          "k": np.column_stack([s.K * s.a for s in bs]),
          "p": np.column_stack([s.P * s.a for s in bs])}

    gain = {k: np.zeros(m1 + 1, dtype=complex) for k in ("l", "tl", "ptl", "rl", "prl")}
    gain["l"][0] = 1.0
    for m, (node, p) in enumerate(zip(scenario.ris, paths[1:]), start=1):
        a_tl = steering(node.array, p.theta_tl, p.phi_tl, lam)
        a_rl = steering(node.array, p.theta_rl, p.phi_rl, lam)
        ga_rl = ctrl.gamma_slow[m - 1] * a_rl.a
        # entries are (a_tl^H Gamma a_rl)^* etc: the trailing Hermitian of the row vectors
        gain["l"][m] = np.conj(np.vdot(a_tl.a, ga_rl))
        gain["tl"][m] = np.conj(np.vdot(a_tl.K * a_tl.a, ga_rl))
        gain["ptl"][m] = np.conj(np.vdot(a_tl.P * a_tl.a, ga_rl))
        gain["rl"][m] = np.conj(np.vdot(a_tl.a, ga_rl * a_rl.K))
        gain["prl"][m] = np.conj(np.vdot(a_tl.a, ga_rl * a_rl.P))
    if not printed_orientation:
        gain = {k: np.conj(v) for k, v in gain.items()}

    rho = np.array([p.rho_inv for p in paths])
    beta = np.array([p.beta for p in paths])
    amp = {"b": beta * np.sqrt(rho), "unit": np.sqrt(rho).astype(complex)}

    D = np.column_stack([np.ones(cfg.n_symbols), ctrl.d_gamma])
    delays = np.array([p.tau for p in paths])
    F = precoder(scenario)
    return FimContext(
        m1=m1, include_los=bool(scenario.include_los), paths=paths,
        rx=MappingProxyType(rx), tx=MappingProxyType(tx), gain=MappingProxyType(gain),
        amp=MappingProxyType(amp), seq_gram=D.conj().T @ D,
        signal=tuple(signal_factor(k, delays, cfg) for k in range(3)),
        ffh=F @ F.conj().T, sigma2=effective_sigma2(cfg))


def _coef(ctx, f: Factor, idx):
    return f.phase * ctx.amp[f.amp][idx] * np.conj(ctx.gain[f.gain][idx])


def complex_block(ctx: FimContext, kind1: str, idx1, kind2: str, idx2,
                  table: Mapping[str, Factor] = FACTOR_TABLE) -> np.ndarray:
    """(2/sigma^2) sum over t, n, pilots of conj(d mu/d v1) * d mu/d v2, before Re{}."""
    f1, f2 = table[kind1], table[kind2]
    idx1, idx2 = np.atleast_1d(idx1), np.atleast_1d(idx2)
    c = np.outer(np.conj(_coef(ctx, f1, idx1)), _coef(ctx, f2, idx2))
    rx = ctx.rx[f1.rx][:, idx1].conj().T @ ctx.rx[f2.rx][:, idx2]
    tx = (ctx.tx[f2.tx][:, idx2].conj().T @ ctx.ffh @ ctx.tx[f1.tx][:, idx1]).T
    seq = ctx.seq_gram[np.ix_(idx1, idx2)]
    sig = ctx.signal[f1.freq + f2.freq][np.ix_(idx1, idx2)]
    return (2 / ctx.sigma2) * c * rx * seq * tx * sig


def _ris_idx(ctx):
    return np.arange(1, ctx.m1 + 1)


def fim_block(ctx: FimContext, row_kind: str, col_kind: str,
              table: Mapping[str, Factor] = FACTOR_TABLE) -> np.ndarray:
    """M1 x M1 block between two RIS-path parameter kinds."""
    idx = _ris_idx(ctx)
    return complex_block(ctx, row_kind, idx, col_kind, idx, table).real


def fim_block_los_cross(ctx: FimContext, los_kind: str, ris_kind: str,
                        table: Mapping[str, Factor] = FACTOR_TABLE) -> np.ndarray:
    """1 x M1 row coupling a LOS parameter with the RIS paths."""
    if los_kind not in LOS_KINDS:
        raise ValueError(f"{los_kind} is not a LOS parameter")
    return complex_block(ctx, los_kind, [0], ris_kind, _ris_idx(ctx), table).real


def fim_block_los(ctx: FimContext, kind1: str, kind2: str,
                  table: Mapping[str, Factor] = FACTOR_TABLE) -> float:
    for k in (kind1, kind2):
        if k not in LOS_KINDS:
            raise ValueError(f"{k} is not a LOS parameter")
    return float(complex_block(ctx, kind1, [0], kind2, [0], table).real[0, 0])


def prior_fim(sigma2_beta: float | None, m1: int, include_los: bool = False) -> LabeledMatrix:
    """Gaussian prior on the path gains; ``None`` (or inf) means no prior."""
    labels = zeta_labels(m1, include_los)
    out = np.zeros((len(labels), len(labels)))
    if sigma2_beta is not None and not np.isinf(sigma2_beta):
        if not sigma2_beta > 0:
            raise ValueError(f"prior variance must be positive, got {sigma2_beta}")
        for i, lab in enumerate(labels):
            if lab.kind in BETA_KINDS:
                out[i, i] = 2.0 / sigma2_beta
    return LabeledMatrix(labels, out)


def data_fim(ctx: FimContext, include_los: bool | None = None,
             table: Mapping[str, Factor] = FACTOR_TABLE, symmetrize: bool = True) -> LabeledMatrix:
    """Data FIM over zeta, assembled block by block from the factor table.

    Every block is computed independently, so ``symmetrize=False`` exposes
    the raw asymmetry of the assembly.
    """
    los = ctx.include_los if include_los is None else include_los
    labels = zeta_labels(ctx.m1, los)
    groups = {}
    for i, lab in enumerate(labels):
        groups.setdefault((lab.kind, lab.path == 0), []).append(i)
    J = np.zeros((len(labels), len(labels)))
    for (k1, los1), rows in groups.items():
        idx1 = [0] if los1 else _ris_idx(ctx)
        for (k2, los2), cols in groups.items():
            idx2 = [0] if los2 else _ris_idx(ctx)
            J[np.ix_(rows, cols)] = complex_block(ctx, k1, idx1, k2, idx2, table).real
    return LabeledMatrix(labels, J, symmetrize=symmetrize)


def assemble_bayesian_fim(scenario, include_los: bool | None = None,
                          table: Mapping[str, Factor] = FACTOR_TABLE,
                          ctx: FimContext | None = None) -> LabeledMatrix:
    """Data FIM plus the path-gain prior.

    A perfectly known gain (``beta_prior == "known"``) adds no finite prior
    here; callers drop the gain labels instead of eliminating them.
    """
    los = scenario.include_los if include_los is None else include_los
    ctx = build_context(scenario) if ctx is None else ctx
    J = data_fim(ctx, los, table)
    bp = scenario.beta_prior
    if isinstance(bp, str):
        return J
    return J + prior_fim(bp, ctx.m1, los)


__all__ = ["FACTOR_TABLE", "Factor", "FimContext", "LabeledMatrix", "ParamLabel", "KINDS",
           "build_context", "complex_block", "fim_block", "fim_block_los_cross", "fim_block_los",
           "prior_fim", "data_fim", "assemble_bayesian_fim", "eta_labels", "zeta_labels"]
