import numpy as np
import pytest

from conftest import SCENARIOS
from risbound.scenario import ScenarioError, load_scenario
from risbound.sweep import COLUMNS, SweepSpec, apply_variable, run_sweep, sweep_from_dict, trial_bounds


@pytest.fixture
def template():
    return load_scenario(SCENARIOS / "one_perturbed.toml")


class TestApplyVariable:
    def test_rx_elements(self, template):
        assert apply_variable(template, "n_rx_elements", 64).ue.array.count == 64

    def test_ris_elements_resets_profile(self, template):
        sc = apply_variable(template, "n_ris_elements", 16)
        assert all(r.array.count == 16 and r.gamma.shape == (16,) for r in sc.ris)

    def test_n_ris_repeats_last(self, template):
        sc = apply_variable(template, "n_ris", 4)
        assert sc.m1 == 4
        assert sc.ris[3] is template.ris[-1]
        assert apply_variable(template, "n_ris", 1).ris == template.ris[:1]

    def test_sigma_m_only_touches_perturbed(self, template):
        sc = apply_variable(template, "sigma_m", 0.5)
        assert [r.sigma2 for r in sc.ris] == [0.5, template.ris[1].sigma2]

    def test_tx_power(self, template):
        assert apply_variable(template, "tx_power", 20).waveform.tx_power_dbm == 20.0


@pytest.mark.parametrize("data", [{"variable": "colour", "values": [1]},
                                  {"variable": "n_ris", "values": []},
                                  {"variable": "n_ris", "values": [1], "trials": 0},
                                  {"variable": "n_ris", "values": [1], "extra": 1},
                                  {"values": [1]}])
def test_sweep_spec_validation(data):
    with pytest.raises(ScenarioError):
        sweep_from_dict(data)


def test_trial_reports_every_column(template):
    vals, _ = trial_bounds(template)
    assert set(vals) == set(COLUMNS)
    assert vals["b_peb_m"] == pytest.approx(np.sqrt(vals["b_speb_m2"]))


def test_common_random_numbers(template):
    res = run_sweep(template, SweepSpec("tx_power", (0.0, 10.0), trials=3), seed=1)
    a, b = res.table("nb_los_speb_m2")
    # same placements, 10 dB more power: without the pose prior every bound drops tenfold
    np.testing.assert_allclose(b, a / 10, rtol=1e-8)
    assert res.failures(0.0) == 0
