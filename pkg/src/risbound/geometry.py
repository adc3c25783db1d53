"""Poses, rotations and the scenario-to-channel-parameter angle maps.

All angles are radians, all lengths meters.  Elevation is measured from the
local +z axis, azimuth from the local +x axis towards +y.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

# below this fraction of the vector norm the local azimuth is considered undefined
_AZIMUTH_DEGENERACY = 1e-9


class GeometryError(ValueError):
    """Raised for geometrically impossible or degenerate configurations."""


def wrap_angle(x: float) -> float:
    """Map an angle to (-pi, pi]."""
    y = float(np.remainder(x + np.pi, 2 * np.pi) - np.pi)
    return np.pi if y <= -np.pi else y


@dataclass(frozen=True, eq=False)
class Pose:
    position: np.ndarray
    orientation: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        if not np.all(np.isfinite(p)):
            raise GeometryError(f"non-finite position {p}")
        p.setflags(write=False)
        object.__setattr__(self, "position", p)
        t0, p0 = self.orientation
        object.__setattr__(self, "orientation", (wrap_angle(t0), wrap_angle(p0)))

    @property
    def rotation(self) -> np.ndarray:
        return rotation_matrix(*self.orientation)


def rot_z(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_minus_x(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])


def rotation_matrix(theta0: float, phi0: float) -> np.ndarray:
    """Q = Q_z(phi0) Q_{-x}(theta0): maps local coordinates to global ones."""
    return rot_z(phi0) @ rot_minus_x(theta0)


def translated_coords(target, origin_pose: Pose) -> np.ndarray:
    """Coordinates of ``target`` in the local frame of ``origin_pose``."""
    d = np.asarray(target, dtype=float) - origin_pose.position
    return origin_pose.rotation.T @ d


def elevation_azimuth(v) -> tuple[float, float]:
    v = np.asarray(v, dtype=float)
    r = np.linalg.norm(v)
    if not r > 0:
        raise GeometryError("direction vector has zero norm")
    rho = np.hypot(v[0], v[1])
    # arctan2 keeps full accuracy near the poles, where arccos(z/r) does not
    theta = float(np.arctan2(rho, v[2]))
    if rho <= _AZIMUTH_DEGENERACY * r:
        return theta, 0.0
    phi = float(np.arctan2(v[1], v[0]))
    return theta, (np.pi if phi <= -np.pi else phi)


def azimuth_degenerate(v) -> bool:
    """True when the azimuth of ``v`` (and hence its derivatives) is undefined."""
    v = np.asarray(v, dtype=float)
    return bool(np.hypot(v[0], v[1]) <= _AZIMUTH_DEGENERACY * np.linalg.norm(v))


def orientation_facing(normal) -> tuple[float, float]:
    """Orientation (theta0, phi0) whose local +z axis points along ``normal``."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    # Q e_z = (-sin(phi0) sin(theta0), cos(phi0) sin(theta0), cos(theta0))
    theta0 = float(np.arccos(np.clip(n[2], -1.0, 1.0)))
    phi0 = float(np.arctan2(-n[0], n[1])) if np.hypot(n[0], n[1]) > 1e-12 else 0.0
    return theta0, phi0


@dataclass(frozen=True)
class PathParams:
    """Geometric channel parameters of one propagation path.

    The RIS angles (AoI ``*_rl`` and AoR ``*_tl``) are ``None`` on the LOS path.
    """

    theta_tu: float
    phi_tu: float
    theta_rl: float | None
    phi_rl: float | None
    theta_tl: float | None
    phi_tl: float | None
    theta_ru: float
    phi_ru: float
    tau: float
    beta: complex
    rho_inv: float

    @property
    def is_los(self) -> bool:
        return self.theta_tl is None

    @property
    def amplitude(self) -> complex:
        return self.beta * np.sqrt(self.rho_inv)


def path_vectors(bs: Pose, ue: Pose, ris: Pose | None) -> dict[str, np.ndarray]:
    """Vectors whose elevation/azimuth give each angle of a path.

    Keys: ``tu`` (global frame), ``rl`` and ``tl`` (RIS frame), ``ru`` (UE frame).
    """
    if ris is None:
        return {
            "tu": ue.position - bs.position,
            "ru": translated_coords(bs.position, ue),
        }
    return {
        "tu": ris.position - bs.position,
        "rl": translated_coords(bs.position, ris),
        "tl": translated_coords(ue.position, ris),
        "ru": translated_coords(ris.position, ue),
    }


def path_delay(bs: Pose, ue: Pose, ris: Pose | None) -> float:
    if ris is None:
        return float(np.linalg.norm(ue.position - bs.position)) / SPEED_OF_LIGHT
    d1 = np.linalg.norm(ris.position - bs.position)
    d2 = np.linalg.norm(ue.position - ris.position)
    return float(d1 + d2) / SPEED_OF_LIGHT


def check_distinct(bs: Pose, ue: Pose, ris: Pose | None, tol: float = 1e-9):
    pts = {"BS": bs.position, "UE": ue.position}
    if ris is not None:
        pts["RIS"] = ris.position
    names = list(pts)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            if np.linalg.norm(pts[a] - pts[b]) <= tol:
                raise GeometryError(f"{a} and {b} positions coincide")


def derive_path_params(scenario, path_index: int) -> PathParams:
    """Channel parameters of path ``path_index`` (0 = LOS, 1..M1 = RIS)."""
    from .waveform import los_pathloss, ris_pathloss

    lam = scenario.waveform.wavelength
    bs, ue = scenario.bs.pose, scenario.ue.pose
    if path_index == 0:
        check_distinct(bs, ue, None)
        vec = path_vectors(bs, ue, None)
        t_tu, p_tu = elevation_azimuth(vec["tu"])
        t_ru, p_ru = elevation_azimuth(vec["ru"])
        d = float(np.linalg.norm(vec["tu"]))
        return PathParams(t_tu, p_tu, None, None, None, None, t_ru, p_ru,
                          d / SPEED_OF_LIGHT, complex(scenario.los_beta),
                          los_pathloss(lam, d))
    if not 1 <= path_index <= len(scenario.ris):
        raise IndexError(f"path index {path_index} out of range")
    node = scenario.ris[path_index - 1]
    ris = node.pose
    check_distinct(bs, ue, ris)
    vec = path_vectors(bs, ue, ris)
    t_tu, p_tu = elevation_azimuth(vec["tu"])
    t_rl, p_rl = elevation_azimuth(vec["rl"])
    t_tl, p_tl = elevation_azimuth(vec["tl"])
    t_ru, p_ru = elevation_azimuth(vec["ru"])
    d_rl = float(np.linalg.norm(vec["rl"]))
    d_tl = float(np.linalg.norm(vec["tl"]))
    return PathParams(t_tu, p_tu, t_rl, p_rl, t_tl, p_tl, t_ru, p_ru,
                      (d_rl + d_tl) / SPEED_OF_LIGHT, complex(node.beta),
                      ris_pathloss(lam, t_tl, t_rl, d_tl, d_rl))
