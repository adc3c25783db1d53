import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from conftest import small_waveform
from risbound.arrays import square_ura
from risbound.geometry import SPEED_OF_LIGHT, Pose
from risbound.labels import LabeledMatrix, ParamLabel
from risbound.localization import (UE_LABELS, LocationLabel, bounds, jacobian, location_bayesian_efim,
                                   location_labels, speb_soeb)
from risbound.scenario import Node, Scenario, desk_scenario
from risbound.validation import jacobian_report
from risbound.waveform import beam_targets

THETA0, PHI0, PX, PY, PZ = UE_LABELS


class TestBoundsFromEfim:
    def test_identity(self):
        rep = speb_soeb(LabeledMatrix(UE_LABELS, np.eye(5)))
        assert (rep.speb, rep.soeb) == (pytest.approx(3.0), pytest.approx(2.0))
        assert rep.peb == pytest.approx(np.sqrt(3.0))
        assert not rep.flags

    def test_scaling(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((5, 5))
        E = A @ A.T + np.eye(5)
        a = speb_soeb(LabeledMatrix(UE_LABELS, E))
        b = speb_soeb(LabeledMatrix(UE_LABELS, 4 * E))
        assert b.speb == pytest.approx(a.speb / 4)
        assert b.soeb == pytest.approx(a.soeb / 4)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_matches_explicit_inverse(self, seed):
        rng = np.random.default_rng(seed)
        # very different scales per row, as in real EFIMs
        s = 10.0 ** rng.uniform(-3, 6, size=5)
        A = rng.standard_normal((5, 5))
        E = np.outer(s, s) * (A @ A.T + 0.5 * np.eye(5))
        inv = np.linalg.inv(E)
        rep = speb_soeb(LabeledMatrix(UE_LABELS, E))
        assert rep.speb == pytest.approx(np.trace(inv[2:, 2:]), rel=1e-8)
        assert rep.soeb == pytest.approx(np.trace(inv[:2, :2]), rel=1e-8)

    def test_singular_reports_infinity_and_null_space(self):
        E = np.diag([1.0, 1.0, 1.0, 0.0, 1.0])
        rep = speb_soeb(LabeledMatrix(UE_LABELS, E))
        assert rep.singular and np.isinf(rep.speb) and np.isinf(rep.soeb)
        assert_allclose(np.abs(rep.null_space[:, 0]), [0, 0, 0, 1, 0], atol=1e-12)


class TestJacobian:
    def los_only(self, ue=(0.0, 0.0, 5.0), bs=(3.0, 4.0, 40.0)):
        lam = small_waveform().wavelength
        return Scenario(Node(Pose(bs), square_ura(4, lam / 2)), Node(Pose(ue), square_ura(4, lam / 2)),
                        (), small_waveform(), include_los=True)

    def test_hand_values(self):
        sc = self.los_only()
        jac = jacobian(sc)
        # arrival vector (3, 4, 35): tilting the UE about x turns it at rate -y/|xy|
        assert jac.block([THETA0], [ParamLabel("theta_ru", 0)])[0, 0] == pytest.approx(-0.8)
        d = np.array([3.0, 4.0, 35.0])
        grad = jac.block([PX, PY, PZ], [ParamLabel("tau", 0)])[:, 0]
        assert_allclose(grad, -d / (np.linalg.norm(d) * SPEED_OF_LIGHT), rtol=1e-12)
        # the BS-side angles move with the UE position only
        assert jac.block([THETA0, PHI0], [ParamLabel("theta_tu", 0)]).tolist() == [[0.0], [0.0]]

    def test_labels_include_perturbed_ris_only(self, desk_perturbed):
        labs = location_labels(desk_perturbed)
        assert len(labs) == 10
        assert LocationLabel("ris_px", 1) in labs and LocationLabel("ris_px", 2) not in labs

    @pytest.mark.parametrize("seed", range(8))
    def test_against_finite_differences(self, seed):
        sc = desk_scenario(seed=seed, n_perturbed=2)
        assert jacobian_report(sc, include_aoi=True).passed

    def test_on_axis_azimuth_is_rejected(self):
        from risbound.geometry import GeometryError
        with pytest.raises(GeometryError):
            jacobian(self.los_only(ue=(3.0, 4.0, 5.0)))


class TestRoutes:
    def test_per_path_equals_monolithic(self, desk_perturbed):
        a = location_bayesian_efim(desk_perturbed, route="per_path").efim.values
        b = location_bayesian_efim(desk_perturbed, route="monolithic").efim.values
        assert np.abs(a - b).max() <= 1e-8 * np.abs(b).max()

    def test_unknown_route(self, desk):
        with pytest.raises(ValueError):
            location_bayesian_efim(desk, route="sideways")

    def test_incidence_angles_irrelevant_for_known_ris(self):
        sc = desk_scenario(seed=6, beta_prior="known")
        a = location_bayesian_efim(sc, include_aoi=False).efim.values
        b = location_bayesian_efim(sc, include_aoi=True, route="monolithic").efim.values
        assert_allclose(a, b, rtol=1e-9, atol=1e-9 * np.abs(b).max())

    def test_incidence_angles_nearly_irrelevant_with_perturbed_ris(self):
        sc = desk_scenario(seed=6, beta_prior="known", n_perturbed=1)
        a = speb_soeb(location_bayesian_efim(sc, include_aoi=False).efim)
        b = speb_soeb(location_bayesian_efim(sc, include_aoi=True, route="monolithic").efim)
        assert a.speb == pytest.approx(b.speb, rel=1e-6)
        assert a.soeb == pytest.approx(b.soeb, rel=1e-6)


class TestMonotonicity:
    @pytest.mark.parametrize("seed", range(4))
    def test_bayesian_never_worse(self, seed):
        sc = desk_scenario(seed=seed, beta_prior="known", n_perturbed=1)
        b, nb = bounds(sc), bounds(sc, nonbayesian=True)
        assert b.speb <= nb.speb * (1 + 1e-9)
        assert b.soeb <= nb.soeb * (1 + 1e-9)

    @pytest.mark.parametrize("seed", range(4))
    def test_los_never_hurts(self, seed):
        sc = desk_scenario(seed=seed, beta_prior="known")
        with_los, without = bounds(sc), bounds(sc.replace(include_los=False))
        assert with_los.speb <= without.speb * (1 + 1e-9)

    @pytest.mark.parametrize("seed", range(4))
    def test_extra_ris_never_hurts(self, seed):
        sc = desk_scenario(m1=3, seed=seed, beta_prior="known")
        # default beams follow the RISs; hold the transmitter fixed
        beams = tuple(beam_targets(sc)) + (beam_targets(sc)[0],)
        sc = sc.replace(waveform=dataclasses.replace(sc.waveform, beam_angles=beams))
        fewer = sc.replace(ris=sc.ris[:2])
        assert bounds(sc).speb <= bounds(fewer).speb * (1 + 1e-9)

    def test_unobservable_ris_pose_without_prior(self):
        sc = desk_scenario(m1=1, n_perturbed=1, include_los=False, seed=2, beta_prior="known")
        assert bounds(sc, nonbayesian=True).singular
        assert not bounds(sc).singular
