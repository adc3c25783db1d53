"""Finite-difference ground truth for the closed-form FIM.

The noise-free received signal is synthesized directly from the channel
model, with its own array-response code, and differentiated numerically.
Nothing here goes through the closed-form factor tables or their context.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import Pose, derive_path_params, wrap_angle
from .labels import LabeledMatrix, ParamLabel, label_values, zeta_labels
from .waveform import effective_sigma2, precoder, ris_control

DEFAULT_STEPS = {"angle": 1e-6, "tau_samples": 1e-5, "beta": 1e-6}


@dataclass(frozen=True, eq=False)
class MuTensor:
    """Noise-free observations indexed (symbol t, subcarrier n, pilot b, rx element).

    Pilots are the N_B basis vectors sqrt(s[n]) e_b, which realizes
    E{x x^H} = s[n] I exactly.
    """

    values: np.ndarray
    fingerprint: tuple


def _response(delta: np.ndarray, theta: float, phi: float, lam: float) -> np.ndarray:
    k = (2 * np.pi / lam) * np.array(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    return np.exp(-1j * (k @ delta))


def _fingerprint(scenario):
    return (scenario.m1, scenario.include_los, scenario.seed,
            scenario.waveform.n_symbols, scenario.waveform.n_subcarriers)


def compute_mu(scenario, params=None, labels=None, *, rho_inv=None, F=None) -> MuTensor:
    """Synthesize mu for the channel parameters ``params`` (ordered as ``labels``).

    ``rho_inv`` and ``F`` default to the scenario's pathloss and precoder; pass
    them explicitly to hold them fixed while the geometry moves.
    """
    cfg = scenario.waveform
    lam = cfg.wavelength
    labels = zeta_labels(scenario.m1, scenario.include_los) if labels is None else list(labels)
    true_paths = [derive_path_params(scenario, i) for i in range(scenario.m1 + 1)]
    if params is None:
        params = label_values(labels, true_paths)
    params = np.asarray(params, dtype=float)
    if params.shape != (len(labels),):
        raise ValueError("params and labels differ in length")
    # start from the true values, overwrite with the supplied ones
    vals = {}
    for i, p in enumerate(true_paths):
        for k in ("theta_ru", "phi_ru", "theta_tl", "phi_tl", "theta_rl", "phi_rl",
                  "theta_tu", "phi_tu", "tau"):
            vals[(k, i)] = getattr(p, k)
        vals[("beta_re", i)] = p.beta.real
        vals[("beta_im", i)] = p.beta.imag
    for lab, v in zip(labels, params):
        vals[(lab.kind, lab.path)] = v
    if rho_inv is None:
        rho_inv = [p.rho_inv for p in true_paths]
    F = precoder(scenario) if F is None else F
    ctrl = ris_control(scenario)

    w = cfg.omegas()
    sqrt_s = np.sqrt(cfg.energies())
    T = cfg.n_symbols
    ue_d, bs_d = scenario.ue.array.delta, scenario.bs.array.delta
    mu = np.zeros((T, cfg.n_subcarriers, F.shape[1], ue_d.shape[1]), dtype=complex)

    paths = ([0] if scenario.include_los else []) + list(range(1, scenario.m1 + 1))
    for m in paths:
        v = lambda k: vals[(k, m)]  # noqa: E731
        amp = complex(v("beta_re"), v("beta_im")) * np.sqrt(rho_inv[m])
        a_ru = _response(ue_d, v("theta_ru"), v("phi_ru"), lam)
        a_tu = _response(bs_d, v("theta_tu"), v("phi_tu"), lam)
        if m == 0:
            gains_t = np.ones(T, dtype=complex)
        else:
            node = scenario.ris[m - 1]
            a_tl = _response(node.array.delta, v("theta_tl"), v("phi_tl"), lam)
            a_rl = _response(node.array.delta, v("theta_rl"), v("phi_rl"), lam)
            # a_tl^H Omega_t a_rl with Omega_t = gamma_t Gamma
            g = a_tl.conj() @ (ctrl.gamma_slow[m - 1] * a_rl)
            gains_t = ctrl.d_gamma[:, m - 1] * g
        tx = a_tu.conj() @ F  # a_tu^H F e_b for every pilot b
        delay = np.exp(-1j * w * v("tau")) * sqrt_s
        mu += amp * np.einsum("t,n,b,r->tnbr", gains_t, delay, tx, a_ru)
    return MuTensor(mu, _fingerprint(scenario))


def _step(kind: str, scenario, steps: dict) -> float:
    if kind == "tau":
        return steps["tau_samples"] * scenario.waveform.sample_period
    if kind.startswith("beta"):
        return steps["beta"]
    return steps["angle"]


def _derivatives(f, x0: np.ndarray, hs: np.ndarray, richardson: bool) -> list[np.ndarray]:
    out = []
    for i, h in enumerate(hs):
        def central(hh):
            xp, xm = x0.copy(), x0.copy()
            xp[i] += hh
            xm[i] -= hh
            return (f(xp) - f(xm)) / (2 * hh)
        d = central(h)
        if richardson:
            d = (4 * central(h / 2) - d) / 3
        out.append(d.ravel())
    return out


def _gram(derivs: list[np.ndarray], sigma2: float) -> np.ndarray:
    G = np.vstack(derivs)
    return (2 / sigma2) * (G.conj() @ G.T).real


def fd_fim(scenario, params=None, steps: dict | None = None, labels=None,
           richardson: bool = False) -> LabeledMatrix:
    """Data FIM of the channel parameters by central differences of mu."""
    steps = {**DEFAULT_STEPS, **(steps or {})}
    if any(not s > 0 for s in steps.values()):
        raise ValueError("finite-difference steps must be positive")
    labels = zeta_labels(scenario.m1, scenario.include_los) if labels is None else list(labels)
    if params is None:
        params = label_values(labels, [derive_path_params(scenario, i)
                                       for i in range(scenario.m1 + 1)])
    x0 = np.asarray(params, dtype=float)
    hs = np.array([_step(lab.kind, scenario, steps) for lab in labels])
    if np.any(hs < 1e-14 * np.maximum(1.0, np.abs(x0))):
        warnings.warn("finite-difference step close to the floating-point resolution", RuntimeWarning)
    rho = [derive_path_params(scenario, i).rho_inv for i in range(scenario.m1 + 1)]
    F = precoder(scenario)

    def f(x):
        return compute_mu(scenario, x, labels, rho_inv=rho, F=F).values

    J = _gram(_derivatives(f, x0, hs, richardson), effective_sigma2(scenario.waveform))
    return LabeledMatrix(labels, J)


# ------------------------------------------------------------ location space

def _move(scenario, label, delta: float):
    """Scenario with one location parameter shifted by ``delta``."""
    kind, idx = label.kind, label.ris_index
    if kind.startswith("ue_"):
        node = scenario.ue
    else:
        node = scenario.ris[idx - 1]
    pos = node.pose.position.copy()
    o = list(node.pose.orientation)
    attr = kind.split("_", 1)[1]
    if attr == "theta0":
        o[0] += delta
    elif attr == "phi0":
        o[1] += delta
    else:
        pos["xyz".index(attr[1])] += delta
    new = dataclasses.replace(node, pose=Pose(pos, tuple(o)))
    if kind.startswith("ue_"):
        return scenario.replace(ue=new)
    ris = list(scenario.ris)
    ris[idx - 1] = new
    return scenario.replace(ris=tuple(ris))


def fd_location_fim(scenario, location_labels, h: float = 1e-6, gains_known: bool = True,
                    richardson: bool = False) -> LabeledMatrix:
    """FIM of location parameters by differentiating mu through the geometry.

    Pathloss, path gains and the precoder are held at their nominal values, as
    in the chain-rule mapping from channel to location parameters.  With
    ``gains_known=False`` the path gains are kept as nuisance columns and the
    returned matrix is the full FIM over location labels plus gain labels.
    """
    labels = zeta_labels(scenario.m1, scenario.include_los)
    rho = [derive_path_params(scenario, i).rho_inv for i in range(scenario.m1 + 1)]
    F = precoder(scenario)

    def mu_at(sc):
        params = label_values(labels, [derive_path_params(sc, i) for i in range(sc.m1 + 1)])
        return compute_mu(sc, params, labels, rho_inv=rho, F=F).values

    derivs = []
    for lab in location_labels:
        def central(hh):
            return (mu_at(_move(scenario, lab, hh)) - mu_at(_move(scenario, lab, -hh))) / (2 * hh)
        d = central(h)
        if richardson:
            d = (4 * central(h / 2) - d) / 3
        derivs.append(d.ravel())
    out_labels = list(location_labels)
    if not gains_known:
        gain_labels = [lab for lab in labels if lab.kind.startswith("beta")]
        for lab in gain_labels:
            hh = 1e-6
            x = label_values(labels, [derive_path_params(scenario, i) for i in range(scenario.m1 + 1)])
            i = labels.index(lab)
            xp, xm = x.copy(), x.copy()
            xp[i] += hh
            xm[i] -= hh
            d = (compute_mu(scenario, xp, labels, rho_inv=rho, F=F).values
                 - compute_mu(scenario, xm, labels, rho_inv=rho, F=F).values) / (2 * hh)
            derivs.append(d.ravel())
        out_labels += gain_labels
    return LabeledMatrix(out_labels, _gram(derivs, effective_sigma2(scenario.waveform)))


def fd_angle_jacobian(scenario, location_labels, channel_labels, h: float = 1e-6) -> np.ndarray:
    """Central differences of the geometry angle/delay maps (rows: location labels)."""
    out = np.zeros((len(location_labels), len(channel_labels)))
    for i, lab in enumerate(location_labels):
        plus = [derive_path_params(_move(scenario, lab, h), k) for k in range(scenario.m1 + 1)]
        minus = [derive_path_params(_move(scenario, lab, -h), k) for k in range(scenario.m1 + 1)]
        for j, c in enumerate(channel_labels):
            a, b = getattr(plus[c.path], c.kind), getattr(minus[c.path], c.kind)
            diff = wrap_angle(a - b) if c.kind.startswith("phi") else a - b
            out[i, j] = diff / (2 * h)
    return out


__all__ = ["MuTensor", "compute_mu", "fd_fim", "fd_location_fim", "fd_angle_jacobian",
           "DEFAULT_STEPS", "ParamLabel"]
