"""Array layouts, steering vectors and their angle derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Element coordinates (3 x N, local frame) with the centroid at the origin."""

    delta: np.ndarray

    def __post_init__(self):
        d = np.array(self.delta, dtype=float)
        if d.ndim != 2 or d.shape[0] != 3 or d.shape[1] < 1:
            raise ValueError("delta must be a 3 x N matrix with N >= 1")
        scale = max(1.0, float(np.abs(d).max()))
        if np.abs(d.mean(axis=1)).max() > 1e-9 * scale:
            raise ValueError("array centroid must be at the origin")
        d.setflags(write=False)
        object.__setattr__(self, "delta", d)

    @property
    def count(self) -> int:
        return self.delta.shape[1]

    @property
    def is_planar_z(self) -> bool:
        return bool(np.all(self.delta[2] == 0.0))


def ura(nx: int, ny: int, spacing: float) -> ArrayGeometry:
    """Centered nx-by-ny grid in the local x-y plane, x index fastest."""
    if nx < 1 or ny < 1:
        raise ValueError("URA dimensions must be positive")
    xs = (np.arange(nx) - (nx - 1) / 2) * spacing
    ys = (np.arange(ny) - (ny - 1) / 2) * spacing
    gx, gy = np.meshgrid(xs, ys)
    return ArrayGeometry(np.vstack([gx.ravel(), gy.ravel(), np.zeros(nx * ny)]))


def square_ura(n: int, spacing: float) -> ArrayGeometry:
    """URA with n elements arranged as close to square as possible."""
    nx = int(np.floor(np.sqrt(n)))
    while n % nx:
        nx -= 1
    return ura(n // nx, nx, spacing)


def _check_lambda(lam):
    if not lam > 0:
        raise ValueError(f"wavelength must be positive, got {lam}")


def wavenumber(theta: float, phi: float, lam: float) -> np.ndarray:
    _check_lambda(lam)
    return (2 * np.pi / lam) * np.array(
        [np.cos(phi) * np.sin(theta), np.sin(phi) * np.sin(theta), np.cos(theta)])


def wavenumber_derivatives(theta: float, phi: float, lam: float):
    """(dk/dtheta, dk/dphi)."""
    _check_lambda(lam)
    c = 2 * np.pi / lam
    dk_t = c * np.array([np.cos(phi) * np.cos(theta), np.sin(phi) * np.cos(theta), -np.sin(theta)])
    dk_p = c * np.array([-np.sin(phi) * np.sin(theta), np.cos(phi) * np.sin(theta), 0.0])
    return dk_t, dk_p


@dataclass(frozen=True, eq=False)
class SteeringBundle:
    a: np.ndarray  # exp(-j delta^T k)
    K: np.ndarray  # delta^T dk/dtheta
    P: np.ndarray  # delta^T dk/dphi


def steering(geom: ArrayGeometry, theta: float, phi: float, lam: float) -> SteeringBundle:
    k = wavenumber(theta, phi, lam)
    dk_t, dk_p = wavenumber_derivatives(theta, phi, lam)
    a = np.exp(-1j * (geom.delta.T @ k))
    return SteeringBundle(a, geom.delta.T @ dk_t, geom.delta.T @ dk_p)


def aoi_alphas(theta_tl: float, phi_tl: float, theta_rl: float, phi_rl: float):
    """Coefficients expressing the AoI derivative weights through the AoR ones.

    For a planar array in the local z = 0 plane returns ``(alpha_k, alpha_p)``
    with ``alpha_k[0]*K_tl + alpha_k[1]*P_tl == K_rl`` and
    ``alpha_p[0]*K_tl + alpha_p[1]*P_tl == P_rl`` elementwise.
    """
    # columns: x/y coefficients of K_tl and P_tl (the common 2*pi/lambda cancels)
    V = np.array([
        [np.cos(phi_tl) * np.cos(theta_tl), -np.sin(phi_tl) * np.sin(theta_tl)],
        [np.sin(phi_tl) * np.cos(theta_tl), np.cos(phi_tl) * np.sin(theta_tl)],
    ])
    det = np.cos(theta_tl) * np.sin(theta_tl)
    if abs(det) < 1e-12:
        raise np.linalg.LinAlgError(
            "AoR at boresight or grazing: K_tl and P_tl are linearly dependent")
    nu_k = np.array([np.cos(phi_rl) * np.cos(theta_rl), np.sin(phi_rl) * np.cos(theta_rl)])
    nu_p = np.array([-np.sin(phi_rl) * np.sin(theta_rl), np.cos(phi_rl) * np.sin(theta_rl)])
    return np.linalg.solve(V, nu_k), np.linalg.solve(V, nu_p)
