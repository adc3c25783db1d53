"""Precoder, RIS sequences, signal factors, pathloss and noise level."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard

from .arrays import ArrayGeometry, steering
from .geometry import SPEED_OF_LIGHT, elevation_azimuth


class WaveformError(ValueError):
    pass


class CapacityError(WaveformError):
    """Too few symbols to give every RIS its own sequence."""


class PathlossDomainError(WaveformError):
    """The RIS is illuminated or observed from behind (or at grazing)."""


@dataclass(frozen=True)
class WaveformConfig:
    carrier_hz: float = 30e9
    bandwidth_hz: float = 0.1e9
    n_subcarriers: int = 256
    n_symbols: int = 8
    n_beams: int | None = None  # None: one beam per BS antenna
    beam_angles: tuple[tuple[float, float], ...] | None = None  # None: aim at the paths
    pilot_energy: float | tuple[float, ...] = 1.0
    tx_power_dbm: float = 5.0
    tx_gain_db: float = 6.0
    rx_gain_db: float = 2.0
    noise_density_dbm_hz: float = -174.0

    def __post_init__(self):
        if self.n_subcarriers < 1 or self.n_symbols < 1:
            raise WaveformError("need at least one subcarrier and one symbol")
        if self.n_beams is not None and self.n_beams < 1:
            raise WaveformError("need at least one beam")
        if not (self.carrier_hz > 0 and self.bandwidth_hz > 0):
            raise WaveformError("carrier and bandwidth must be positive")
        s = np.atleast_1d(np.asarray(self.pilot_energy, dtype=float))
        if np.any(s < 0):
            raise WaveformError("pilot energy must be nonnegative")
        if s.size not in (1, self.n_subcarriers):
            raise WaveformError("pilot energy must be a scalar or one value per subcarrier")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def sample_period(self) -> float:
        return 1.0 / self.bandwidth_hz

    def omegas(self) -> np.ndarray:
        """Angular subcarrier frequencies 2*pi*n/(N*T_s), n = 1..N."""
        n = np.arange(1, self.n_subcarriers + 1)
        return 2 * np.pi * n / (self.n_subcarriers * self.sample_period)

    def energies(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.pilot_energy, dtype=float),
                               (self.n_subcarriers,)).copy()


@dataclass(frozen=True, eq=False)
class RisControl:
    gamma_slow: tuple[np.ndarray, ...]
    d_gamma: np.ndarray

    @property
    def unitary(self) -> bool:
        D = self.d_gamma
        return bool(np.allclose(D.conj().T @ D, np.eye(D.shape[1]), atol=1e-12))

    @property
    def zero_sum(self) -> bool:
        return bool(np.allclose(self.d_gamma.sum(axis=0), 0.0, atol=1e-12))


def directional_precoder(geom: ArrayGeometry, beam_angles, lam: float) -> np.ndarray:
    beams = list(beam_angles)
    if not beams:
        raise WaveformError("empty beam list")
    F = np.column_stack([steering(geom, t, p, lam).a for t, p in beams])
    return F / np.sqrt(np.trace(F.conj().T @ F).real)


def sequence_matrix(t_symbols: int, m1: int, kind: str = "hadamard") -> np.ndarray:
    """T x M1 unitary sequence matrix whose columns each sum to zero."""
    if t_symbols <= m1:
        raise CapacityError(f"T = {t_symbols} symbols cannot host {m1} zero-sum orthogonal sequences")
    if kind == "hadamard":
        if t_symbols & (t_symbols - 1):
            raise WaveformError(f"Hadamard size must be a power of two, got {t_symbols}")
        H = hadamard(t_symbols).astype(complex)
        return H[:, 1:m1 + 1] / np.sqrt(t_symbols)
    if kind == "dft":
        t = np.arange(t_symbols)[:, None]
        k = np.arange(1, m1 + 1)[None, :]
        return np.exp(-2j * np.pi * t * k / t_symbols) / np.sqrt(t_symbols)
    raise WaveformError(f"unknown sequence kind {kind!r}")


def signal_factor(k: int, delays, cfg: WaveformConfig) -> np.ndarray:
    """[R_k]_uv = sum_n w_n^k s[n] exp(-j w_n (tau_v - tau_u))."""
    if k not in (0, 1, 2):
        raise WaveformError("signal factor order must be 0, 1 or 2")
    w = cfg.omegas()
    tau = np.asarray(delays, dtype=float)
    # e_u[n] = exp(-j w_n tau_u); R = E^H diag(w^k s) E
    E = np.exp(-1j * np.outer(w, tau))
    return (E.conj().T * (w ** k * cfg.energies())) @ E


def ris_pathloss(lam, theta_tl, theta_rl, d_tl, d_rl) -> float:
    if not (d_tl > 0 and d_rl > 0):
        raise WaveformError("distances must be positive")
    c = np.cos(theta_tl) * np.cos(theta_rl)
    if np.cos(theta_tl) <= 0 or np.cos(theta_rl) <= 0:
        raise PathlossDomainError(
            f"RIS seen from behind or at grazing (theta_tl={theta_tl:.4f}, theta_rl={theta_rl:.4f})")
    return float(lam ** 4 * c ** 0.57 / (512 * np.pi ** 2 * d_rl ** 2 * d_tl ** 2))


def los_pathloss(lam, d) -> float:
    if not d > 0:
        raise WaveformError("distance must be positive")
    return float((lam / (4 * np.pi * d)) ** 2)


def effective_sigma2(cfg: WaveformConfig) -> float:
    """N0 B / (P G_tx G_rx); pathloss lives in the path amplitudes."""
    db = (cfg.noise_density_dbm_hz + 10 * np.log10(cfg.bandwidth_hz)
          - cfg.tx_power_dbm - cfg.tx_gain_db - cfg.rx_gain_db)
    return float(10 ** (db / 10))


def beam_targets(scenario) -> list[tuple[float, float]]:
    """Default beams: BS-to-RIS directions (BS-to-UE when there is no RIS).

    The beams do not depend on ``include_los`` so that switching the LOS path
    on and off compares the same transmitter.
    """
    bs = scenario.bs.pose.position
    pts = [r.pose.position for r in scenario.ris] or [scenario.ue.pose.position]
    return [elevation_azimuth(p - bs) for p in pts]


def precoder(scenario) -> np.ndarray:
    cfg = scenario.waveform
    geom = scenario.bs.array
    if cfg.beam_angles is not None:
        beams = list(cfg.beam_angles)
    else:
        targets = beam_targets(scenario)
        n_b = cfg.n_beams or geom.count
        beams = [targets[i % len(targets)] for i in range(n_b)]
    return directional_precoder(geom, beams, cfg.wavelength)


def ris_control(scenario) -> RisControl:
    m1 = len(scenario.ris)
    seq = scenario.sequence
    if seq.matrix is not None:
        D = np.asarray(seq.matrix, dtype=complex)
        if D.shape != (scenario.waveform.n_symbols, m1):
            raise WaveformError(f"sequence matrix must be {scenario.waveform.n_symbols} x {m1}")
    elif m1 == 0:
        D = np.zeros((scenario.waveform.n_symbols, 0), dtype=complex)
    else:
        D = sequence_matrix(scenario.waveform.n_symbols, m1, seq.kind)
    gammas = tuple(np.asarray(r.gamma, dtype=complex) for r in scenario.ris)
    for g, r in zip(gammas, scenario.ris):
        if g.shape != (r.array.count,):
            raise WaveformError("RIS phase profile length must match the element count")
        if np.any(np.abs(g) > 1 + 1e-12):
            raise WaveformError("RIS reflection coefficients must have |gamma| <= 1")
    return RisControl(gammas, D)
