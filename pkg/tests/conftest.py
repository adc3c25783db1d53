from pathlib import Path

import numpy as np
import pytest

from risbound.arrays import square_ura, ura
from risbound.geometry import Pose
from risbound.scenario import Node, RisNode, Scenario, desk_scenario
from risbound.waveform import WaveformConfig

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
DATA = Path(__file__).resolve().parent / "data"


def small_waveform(**kw) -> WaveformConfig:
    return WaveformConfig(**{"n_subcarriers": 16, "n_symbols": 4, **kw})


def build(ue=(10.0, 10.0, 5.0), ue_orient=(0.0, 0.0), ris=(), n_t=4, n_r=4, **kw) -> Scenario:
    """Hand-placed scenario; ``ris`` items are (position, orientation, n_elements)."""
    cfg = kw.pop("waveform", small_waveform())
    lam = cfg.wavelength
    nodes = tuple(RisNode(Pose(p, o), square_ura(n, lam / 2)) for p, o, n in ris)
    return Scenario(Node(Pose([0.0, 0.0, 40.0]), square_ura(n_t, lam / 2)),
                    Node(Pose(ue, ue_orient), square_ura(n_r, lam / 2)), nodes, cfg, **kw)


@pytest.fixture
def desk():
    return desk_scenario(seed=0)


@pytest.fixture
def desk_perturbed():
    return desk_scenario(seed=1, n_perturbed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)





_ACCEPTANCE = []


def record(number, name, ok, detail):
    _ACCEPTANCE.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {name}  [{detail}]")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
