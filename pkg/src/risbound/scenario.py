"""Scenario description, scenario-file loading and random placements."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .arrays import ArrayGeometry, square_ura, ura
from .geometry import (GeometryError, Pose, azimuth_degenerate, derive_path_params,
                       orientation_facing, path_vectors)
from .waveform import WaveformConfig, WaveformError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

KNOWN = "known"  # beta_prior value for perfectly known path gains


class ScenarioError(ValueError):
    """Invalid scenario input; ``where`` names the offending field or line."""

    def __init__(self, where: str, msg: str):
        super().__init__(f"{where}: {msg}")
        self.where = where


@dataclass(frozen=True, eq=False)
class Node:
    pose: Pose
    array: ArrayGeometry


@dataclass(frozen=True, eq=False)
class RisNode(Node):
    gamma: np.ndarray = None
    known: bool = True
    sigma2: float | None = None  # prior variance on the pose of a perturbed RIS
    beta: complex = 1.0

    def __post_init__(self):
        if self.gamma is None:
            object.__setattr__(self, "gamma", np.ones(self.array.count, dtype=complex))


@dataclass(frozen=True, eq=False)
class SequenceSpec:
    kind: str = "hadamard"
    matrix: np.ndarray | None = None  # explicit T x M1 override


@dataclass(frozen=True, eq=False)
class Scenario:
    bs: Node
    ue: Node
    ris: tuple[RisNode, ...]
    waveform: WaveformConfig = field(default_factory=WaveformConfig)
    sequence: SequenceSpec = field(default_factory=SequenceSpec)
    beta_prior: float | str | None = KNOWN  # variance, KNOWN, or None for no prior
    include_los: bool = True
    los_beta: complex = 1.0
    ue_prior: np.ndarray | None = None  # optional 5x5 prior FIM on (o, p)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ris", tuple(self.ris))
        if not self.ris and not self.include_los:
            raise ScenarioError("scenario", "at least one path (RIS or LOS) is required")
        if self.bs.pose.orientation != (0.0, 0.0):
            raise ScenarioError("bs.orientation_deg", "BS array is defined in the global frame")
        bp = self.beta_prior
        if isinstance(bp, str) and bp != KNOWN:
            raise ScenarioError("beta_prior", f"unknown value {bp!r}")
        if bp is not None and not isinstance(bp, str) and not bp > 0:
            raise ScenarioError("beta_prior", "variance must be positive")
        for i, r in enumerate(self.ris):
            if not r.known and r.sigma2 is not None and not r.sigma2 > 0:
                raise ScenarioError(f"ris[{i}].sigma2", "variance must be positive")

    @property
    def m1(self) -> int:
        return len(self.ris)

    @property
    def perturbed(self) -> list[int]:
        """Path indices (1-based) of RISs with uncertain pose."""
        return [m for m, r in enumerate(self.ris, start=1) if not r.known]

    def replace(self, **kw) -> "Scenario":
        return dataclasses.replace(self, **kw)

    def path_params(self):
        return [derive_path_params(self, i) for i in range(self.m1 + 1)]

    def parameter_count(self) -> int:
        return 11 * self.m1 + (7 if self.include_los else 0)


def random_gamma(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random(n))


def random_beta(rng: np.random.Generator) -> complex:
    return complex(np.exp(2j * np.pi * rng.random()))


def facing_orientation(ris_pos, bs_pos, ue_pos) -> tuple[float, float]:
    """RIS orientation whose normal bisects the directions to the BS and the UE."""
    u1 = np.asarray(bs_pos, float) - ris_pos
    u2 = np.asarray(ue_pos, float) - ris_pos
    n = u1 / np.linalg.norm(u1) + u2 / np.linalg.norm(u2)
    if np.linalg.norm(n) < 1e-9:
        raise GeometryError("BS and UE on opposite sides of the RIS; no facing orientation")
    return orientation_facing(n)


def geometry_ok(scenario: Scenario, min_cos: float = 0.05) -> bool:
    """Both RIS sides illuminated from the front and every azimuth well-defined."""
    bs, ue = scenario.bs.pose, scenario.ue.pose
    try:
        for r in scenario.ris:
            vec = path_vectors(bs, ue, r.pose)
            for key in ("rl", "tl"):
                v = vec[key]
                if v[2] / np.linalg.norm(v) < min_cos:
                    return False
            if any(azimuth_degenerate(v) for v in vec.values()):
                return False
        vec = path_vectors(bs, ue, None)
        if any(azimuth_degenerate(v) for v in vec.values()):
            return False
        scenario.path_params()
    except (GeometryError, WaveformError):
        return False
    return True


# ---------------------------------------------------------------- file format

_TOP = {"seed", "include_los", "beta_prior", "los_beta", "ue_prior_sigma2",
        "waveform", "sequence", "bs", "ue", "ris"}
_WAVEFORM = {"carrier_ghz": 1e9, "bandwidth_ghz": 1e9, "carrier_hz": 1.0, "bandwidth_hz": 1.0}
_WAVEFORM_PLAIN = {"n_subcarriers", "n_symbols", "n_beams", "pilot_energy", "tx_power_dbm",
                   "tx_gain_db", "rx_gain_db", "noise_density_dbm_hz", "beam_angles_deg"}
_NODE = {"position_m", "orientation_deg", "array", "spacing_wavelengths"}
_RIS = _NODE | {"gamma", "known", "sigma2", "beta"}


def _check_keys(table: dict, allowed: set, where: str):
    for k in table:
        if k not in allowed:
            raise ScenarioError(f"{where}.{k}" if where else k, "unknown key")


def _vec(value, n: int, where: str) -> np.ndarray:
    try:
        v = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(where, f"expected {n} numbers") from None
    if v.shape != (n,) or not np.all(np.isfinite(v)):
        raise ScenarioError(where, f"expected {n} finite numbers")
    return v


def _array(table: dict, where: str, lam: float) -> ArrayGeometry:
    spec = table.get("array", [1, 1])
    spacing = float(table.get("spacing_wavelengths", 0.5)) * lam
    if isinstance(spec, int):
        if spec < 1:
            raise ScenarioError(f"{where}.array", "element count must be positive")
        return square_ura(spec, spacing)
    dims = _vec(spec, 2, f"{where}.array")
    if np.any(dims < 1) or np.any(dims != np.round(dims)):
        raise ScenarioError(f"{where}.array", "expected [nx, ny] positive integers")
    return ura(int(dims[0]), int(dims[1]), spacing)


def _complex(value, where: str) -> complex:
    v = _vec(value, 2, where)
    return complex(v[0], v[1])


def scenario_from_dict(data: dict[str, Any], seed: int | None = None) -> Scenario:
    """Build a Scenario from parsed scenario-file contents.

    Random quantities (RIS phase profiles, path gains) are drawn from a PCG64
    stream seeded by ``seed`` (or the file's ``seed``).
    """
    _check_keys(data, _TOP, "")
    seed = int(data.get("seed", 0) if seed is None else seed)
    rng = np.random.default_rng(seed)

    wf = dict(data.get("waveform", {}))
    _check_keys(wf, set(_WAVEFORM) | _WAVEFORM_PLAIN, "waveform")
    kw = {}
    for key, scale in _WAVEFORM.items():
        if key in wf:
            kw[key.replace("_ghz", "_hz")] = float(wf[key]) * scale
    for key in _WAVEFORM_PLAIN - {"beam_angles_deg", "pilot_energy"}:
        if key in wf:
            kw[key] = wf[key]
    if "pilot_energy" in wf:
        pe = wf["pilot_energy"]
        kw["pilot_energy"] = tuple(pe) if isinstance(pe, list) else float(pe)
    if "beam_angles_deg" in wf:
        try:
            kw["beam_angles"] = tuple((np.radians(t), np.radians(p)) for t, p in wf["beam_angles_deg"])
        except (TypeError, ValueError):
            raise ScenarioError("waveform.beam_angles_deg", "expected a list of [theta, phi] pairs") from None
    try:
        cfg = WaveformConfig(**kw)
    except (WaveformError, TypeError) as exc:
        raise ScenarioError("waveform", str(exc)) from None
    lam = cfg.wavelength

    nodes = {}
    for name in ("bs", "ue"):
        t = data.get(name)
        if not isinstance(t, dict):
            raise ScenarioError(name, "missing section")
        _check_keys(t, _NODE, name)
        if "position_m" not in t:
            raise ScenarioError(f"{name}.position_m", "missing")
        o = np.radians(_vec(t.get("orientation_deg", [0, 0]), 2, f"{name}.orientation_deg"))
        nodes[name] = Node(Pose(_vec(t["position_m"], 3, f"{name}.position_m"), tuple(o)),
                           _array(t, name, lam))

    ris = []
    for i, t in enumerate(data.get("ris", [])):
        where = f"ris[{i}]"
        _check_keys(t, _RIS, where)
        if "position_m" not in t:
            raise ScenarioError(f"{where}.position_m", "missing")
        pos = _vec(t["position_m"], 3, f"{where}.position_m")
        o = t.get("orientation_deg", "facing")
        if o == "facing":
            try:
                orient = facing_orientation(pos, nodes["bs"].pose.position, nodes["ue"].pose.position)
            except GeometryError as exc:
                raise ScenarioError(f"{where}.orientation_deg", str(exc)) from None
        else:
            orient = tuple(np.radians(_vec(o, 2, f"{where}.orientation_deg")))
        geom = _array(t, where, lam)
        g = t.get("gamma", "random")
        if g == "random":
            gamma = random_gamma(rng, geom.count)
        elif g == "ones":
            gamma = np.ones(geom.count, dtype=complex)
        elif g == "zero":
            gamma = np.zeros(geom.count, dtype=complex)
        else:
            raise ScenarioError(f"{where}.gamma", "expected 'random', 'ones' or 'zero'")
        beta = _complex(t["beta"], f"{where}.beta") if "beta" in t else random_beta(rng)
        known = bool(t.get("known", True))
        sigma2 = t.get("sigma2")
        if sigma2 is not None:
            sigma2 = float(sigma2)
        ris.append(RisNode(Pose(pos, orient), geom, gamma, known, sigma2, beta))

    seq = dict(data.get("sequence", {}))
    _check_keys(seq, {"kind"}, "sequence")
    kind = seq.get("kind", "hadamard")
    if kind not in ("hadamard", "dft"):
        raise ScenarioError("sequence.kind", "expected 'hadamard' or 'dft'")

    bp = data.get("beta_prior", KNOWN)
    if bp == "none":
        bp = None
    elif not isinstance(bp, str):
        bp = float(bp)
    los_beta = _complex(data["los_beta"], "los_beta") if "los_beta" in data else random_beta(rng)
    ue_prior = None
    if "ue_prior_sigma2" in data:
        s2 = float(data["ue_prior_sigma2"])
        if not s2 > 0:
            raise ScenarioError("ue_prior_sigma2", "variance must be positive")
        ue_prior = (2.0 / s2) * np.eye(5)
    try:
        sc = Scenario(nodes["bs"], nodes["ue"], tuple(ris), cfg, SequenceSpec(kind),
                      bp, bool(data.get("include_los", True)), los_beta, ue_prior, seed)
        sc.path_params()
    except ScenarioError:
        raise
    except (GeometryError, WaveformError) as exc:
        raise ScenarioError("geometry", str(exc)) from None
    if kind == "hadamard" and sc.m1 and cfg.n_symbols <= sc.m1:
        raise ScenarioError("waveform.n_symbols", f"need more than {sc.m1} symbols for {sc.m1} RISs")
    return sc


def load_scenario(path: str | Path, seed: int | None = None) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(str(path), f"parse error: {exc}") from None
    return scenario_from_dict(data, seed)


# ------------------------------------------------------------ random layouts

@dataclass(frozen=True)
class Layout:
    """Fixed heights and the square area used for random placements."""

    bs_position: tuple[float, float, float] = (0.0, 0.0, 40.0)
    ris_height: float = 35.0
    ue_height: float = 5.0
    half_width: float = 50.0
    max_attempts: int = 10_000


def random_placement(template: Scenario, rng: np.random.Generator,
                     layout: Layout = Layout()) -> Scenario:
    """Redraw UE and RIS (x, y), RIS phase profiles and path gains.

    Known RISs are turned to face the BS/UE bisector; perturbed RISs keep the
    template orientation.  Placements where any RIS would be seen from behind
    are rejected and redrawn.
    """
    bs = Node(Pose(layout.bs_position), template.bs.array)
    for _ in range(layout.max_attempts):
        xy = rng.uniform(-layout.half_width, layout.half_width, size=(template.m1 + 1, 2))
        ue = Node(Pose([*xy[0], layout.ue_height], template.ue.pose.orientation), template.ue.array)
        ris = []
        try:
            for r, (x, y) in zip(template.ris, xy[1:]):
                pos = np.array([x, y, layout.ris_height])
                orient = (facing_orientation(pos, bs.pose.position, ue.pose.position)
                          if r.known else r.pose.orientation)
                ris.append(dataclasses.replace(
                    r, pose=Pose(pos, orient), gamma=random_gamma(rng, r.array.count),
                    beta=random_beta(rng)))
        except GeometryError:
            continue
        sc = template.replace(bs=bs, ue=ue, ris=tuple(ris), los_beta=random_beta(rng))
        if geometry_ok(sc):
            return sc
    raise GeometryError("no admissible random placement found")


def desk_scenario(m1: int = 2, n_t: int = 4, n_r: int = 4, n_l: int = 16,
                  n_subcarriers: int = 16, t_symbols: int = 4, include_los: bool = True,
                  beta_prior: float | str | None = 1.0, n_perturbed: int = 0,
                  seed: int = 0) -> Scenario:
    """Small random scenario for oracle comparisons and structural checks."""
    rng = np.random.default_rng(seed)
    cfg = WaveformConfig(n_subcarriers=n_subcarriers, n_symbols=t_symbols)
    lam = cfg.wavelength
    ris = [RisNode(Pose([0.0, 0.0, 35.0], np.radians((45.0, 35.0))), square_ura(n_l, lam / 2),
                   known=i >= n_perturbed, sigma2=None if i >= n_perturbed else 0.1)
           for i in range(m1)]
    template = Scenario(Node(Pose([0.0, 0.0, 40.0]), square_ura(n_t, lam / 2)),
                        Node(Pose([10.0, 10.0, 5.0], np.radians((10.0, 0.0))), square_ura(n_r, lam / 2)),
                        tuple(ris), cfg, SequenceSpec(), beta_prior, include_los, seed=seed)
    return random_placement(template, rng)
