import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import build
from risbound.geometry import (SPEED_OF_LIGHT, GeometryError, Pose, azimuth_degenerate, derive_path_params,
                               elevation_azimuth, path_delay, path_vectors, rotation_matrix,
                               translated_coords, wrap_angle)

angles = st.floats(-np.pi, np.pi, allow_nan=False)
coords = st.floats(-100, 100, allow_nan=False)


def test_zero_rotation_is_identity():
    np.testing.assert_array_equal(rotation_matrix(0.0, 0.0), np.eye(3))


def test_quarter_turn_about_x():
    # Q_z(0) Q_-x(pi/2) = [[1,0,0],[0,0,1],[0,-1,0]] applied to e_z
    np.testing.assert_allclose(rotation_matrix(np.pi / 2, 0.0) @ [0, 0, 1], [0, 1, 0], atol=1e-15)


@settings(max_examples=200)
@given(angles, angles)
def test_rotation_orthogonal(t, p):
    Q = rotation_matrix(t, p)
    np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(Q) - 1) < 1e-12


@given(angles, angles, coords, coords, coords)
def test_rotation_round_trip(t, p, x, y, z):
    v = np.array([x, y, z])
    Q = rotation_matrix(t, p)
    np.testing.assert_allclose(Q.T @ (Q @ v), v, atol=1e-12 * max(1, np.abs(v).max()))


def test_translated_coords_at_origin():
    pose = Pose([3.0, -2.0, 7.0], (0.4, 1.1))
    np.testing.assert_allclose(translated_coords([3.0, -2.0, 7.0], pose), 0.0)


def test_translated_coords_identity_orientation():
    pose = Pose([1.0, 2.0, 3.0])
    np.testing.assert_allclose(translated_coords([4.0, 4.0, 4.0], pose), [3.0, 2.0, 1.0])


def test_translated_coords_rotated_ris():
    ris = Pose([10.0, 0.0, 35.0], np.radians((45.0, 35.0)))
    got = translated_coords([0.0, 0.0, 40.0], ris)
    np.testing.assert_allclose(got, [-8.191520442889917, 0.5202639707936524, 7.591331782659125],
                               rtol=1e-13)


@pytest.mark.parametrize("v, expected", [
    ((0.0, 0.0, 1.0), (0.0, 0.0)),
    ((1.0, 0.0, 0.0), (np.pi / 2, 0.0)),
    ((1.0, 1.0, np.sqrt(2.0)), (np.pi / 4, np.pi / 4)),
    ((-1.0, 0.0, 0.0), (np.pi / 2, np.pi)),
])
def test_elevation_azimuth(v, expected):
    np.testing.assert_allclose(elevation_azimuth(np.array(v)), expected, atol=1e-15)


@given(coords, coords, coords)
def test_angles_reembed_direction(x, y, z):
    v = np.array([x, y, z])
    if np.linalg.norm(v) < 1e-6:
        return
    t, p = elevation_azimuth(v)
    u = np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])
    # on the pole axis the azimuth is pinned to 0, which moves u by at most the threshold
    atol = 2e-9 if azimuth_degenerate(v) else 1e-12
    np.testing.assert_allclose(u, v / np.linalg.norm(v), atol=atol)


def test_elevation_rejects_zero_vector():
    with pytest.raises(GeometryError):
        elevation_azimuth(np.zeros(3))


def test_wrap_angle_range():
    assert wrap_angle(-np.pi) == np.pi
    assert wrap_angle(3 * np.pi / 2) == pytest.approx(-np.pi / 2)


def test_ue_above_ris_gives_zero_departure_elevation():
    vec = path_vectors(Pose([0.0, 0.0, 40.0]), Pose([5.0, 0.0, 20.0]), Pose([5.0, 0.0, 0.0]))
    assert elevation_azimuth(vec["tl"])[0] == pytest.approx(0.0, abs=1e-12)


def test_los_arrival_along_local_x():
    # the arrival vector is p_BS - p_UE in the UE frame
    sc = build(ue=(-20.0, 0.0, 40.0))
    p = derive_path_params(sc, 0)
    assert p.theta_ru == pytest.approx(np.pi / 2)
    assert p.phi_ru == pytest.approx(0.0, abs=1e-15)


def test_collinear_delay():
    bs, ris, ue = Pose([0.0, 0.0, 40.0]), Pose([0.0, 0.0, 35.0]), Pose([0.0, 0.0, 5.0])
    assert path_delay(bs, ue, ris) == pytest.approx((5.0 + 30.0) / SPEED_OF_LIGHT, rel=1e-15)


def test_ris_delay_exceeds_los(desk):
    paths = desk.path_params()
    assert all(p.tau >= paths[0].tau for p in paths[1:])


def test_coincident_nodes_rejected():
    with pytest.raises(GeometryError):
        derive_path_params(build(ue=(0.0, 0.0, 40.0)), 0)
