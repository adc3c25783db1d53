"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import time

import numpy as np
import pytest

from conftest import SCENARIOS, record
from risbound.efim_analysis import (beta_structure_report, corollary_report, ris_angle_efim_residual,
                                    special_loss_blocks, verify_loss_factorization)
from risbound.fim_core import build_context, data_fim
from risbound.scenario import SequenceSpec, desk_scenario, load_scenario
from risbound.sweep import SweepSpec, run_sweep
from risbound.validation import (composition_report, jacobian_report, los_decoupling_report,
                                 oracle_report, rank_report)


def check(number, name, ok, detail):
    record(number, name, ok, detail)
    assert ok, detail


def test_01_oracle_equivalence():
    t0 = time.perf_counter()
    sc = desk_scenario()  # M1 = 2, N_T = N_R = 4, N_L = 16, N = 16, T = 4 Hadamard
    rep = oracle_report(sc)
    elapsed = time.perf_counter() - t0
    n = len(data_fim(build_context(sc)))
    check(1, "oracle equivalence", n == 29 and rep.worst <= 1e-6 and elapsed <= 60,
          f"{n} labels, rel. Frobenius {rep.worst:.2e} (tol 1e-6), {elapsed:.1f} s (limit 60 s)")


def test_02a_gain_blocks_diagonal():
    worst = 0.0
    for seed in range(5):
        J = data_fim(build_context(desk_scenario(seed=seed)))
        rep = beta_structure_report(J)
        worst = max(worst, rep.residuals["rr_offdiag"], rep.residuals["ii_offdiag"])
    check("2a", "gain blocks diagonal", worst <= 1e-10, f"off-diagonal mass {worst:.2e} (tol 1e-10)")


@pytest.mark.xfail(strict=True, reason="the real/imaginary gain cross block is identically zero, "
                                       "so it cannot equal the positive imaginary block")
def test_02b_gain_cross_block_equals_imaginary_block():
    J = data_fim(build_context(desk_scenario()))
    r = beta_structure_report(J, literal=True).residuals
    check("2b", "J_{bR bI} == J_{bI bI} (expected failure)", r["ri_vs_ii"] <= 1e-10,
          f"relative residual {r['ri_vs_ii']:.2e} (tol 1e-10); max |J_{{bR bI}}| / scale {r['ri_zero']:.2e}")


def test_03_zero_ris_angle_efim_without_gain_prior():
    worst = max(ris_angle_efim_residual(desk_scenario(seed=s, beta_prior=None)) for s in range(10))
    check(3, "zero RIS-angle EFIM", worst <= 1e-8, f"max |entry| / max |J| = {worst:.2e} (tol 1e-8)")


def test_04_rank():
    rng = np.random.default_rng(404)
    worst_raw = worst_scaled = 0
    excess = []
    for seed in range(20):
        m1 = int(rng.integers(1, 4))
        sc = desk_scenario(m1=m1, n_l=int(rng.choice([4, 9, 16, 25])), n_r=int(rng.choice([1, 4, 9])),
                           seed=seed)
        rep = rank_report(sc)
        excess.append(rep.worst)
        raw, scaled = (int(x.split("=")[1]) for x in rep.notes[0].split()[1:3])
        worst_raw, worst_scaled = max(worst_raw, raw / (9 * m1)), max(worst_scaled, scaled / (9 * m1))
    check(4, "rank <= 9 M1", max(excess) == 0,
          f"20 scenarios; max rank/9M1 raw {worst_raw:.2f}, Jacobi-scaled {worst_scaled:.2f}")


def test_05_corollaries():
    worst = max(corollary_report(desk_scenario(seed=s, n_l=int(n)))
                .worst for s, n in zip(range(10), [16, 9, 25, 4] * 3))
    check(5, "AoI/AoR alpha relations", worst <= 1e-8, f"max relative residual {worst:.2e} (tol 1e-8)")


def test_06_loss_factorization():
    worst = 0.0
    for seed in range(10):
        sc = desk_scenario(seed=seed, beta_prior=float(10.0 ** (seed % 3 - 1)))
        if seed % 2:
            sc = sc.replace(sequence=SequenceSpec("dft"))
        worst = max(worst, verify_loss_factorization(sc).worst, special_loss_blocks(sc).worst)
    check(6, "factorized information loss", worst <= 1e-8, f"max relative residual {worst:.2e} (tol 1e-8)")


def test_07_jacobian():
    worst = 0.0
    for seed in range(50):
        sc = desk_scenario(seed=seed, n_perturbed=2, beta_prior="known")
        worst = max(worst, jacobian_report(sc, include_aoi=True).worst)
    check(7, "Jacobian vs central differences", worst <= 1e-6,
          f"50 geometries, worst normalized residual {worst:.2e} (tol 1e-6)")


def test_08_per_path_composition():
    worst = 0.0
    for seed in range(10):
        sc = desk_scenario(seed=seed, n_perturbed=1 + seed % 2, beta_prior=[1.0, "known"][seed % 2],
                           include_los=bool(seed % 3))
        worst = max(worst, composition_report(sc).worst)
    check(8, "per-path EFIM composition", worst <= 1e-8, f"max relative difference {worst:.2e} (tol 1e-8)")


def test_09_receive_array_trend():
    t0 = time.perf_counter()
    res = run_sweep(load_scenario(SCENARIOS / "three_known.toml"),
                    SweepSpec("n_rx_elements", (4, 16, 64, 256), trials=200), seed=2024)
    elapsed = time.perf_counter() - t0
    m = np.nanmean(res.table("b_los_peb_m"), axis=1)
    ratio = (m[2] - m[3]) / (m[0] - m[1])
    fails = sum(res.failures(v) for v in res.spec.values)
    ok = bool(np.all(np.diff(m) <= 0)) and ratio < 1 and elapsed <= 600 and fails == 0
    check(9, "diminishing returns in N_R", ok,
          f"mean PEB {np.array2string(m, precision=4)} m, ratio {ratio:.3f} (< 1), {elapsed:.0f} s")


def test_10_bayesian_gap_and_los():
    res = run_sweep(load_scenario(SCENARIOS / "one_perturbed.toml"),
                    SweepSpec("n_ris", (2, 4), trials=200), seed=11)
    gap = np.nanmean(res.table("nb_peb_m"), axis=1) / np.nanmean(res.table("b_peb_m"), axis=1)
    los_ok = all(np.all(res.table(f"{v}_los_peb_m") <= res.table(f"{v}_peb_m")) for v in ("nb", "b"))
    fails = sum(res.failures(v) for v in res.spec.values)
    check(10, "Bayesian gap shrinks with M1; LOS helps", gap[0] > gap[1] and los_ok and fails == 0,
          f"non-Bayesian/Bayesian mean PEB {gap[0]:.2f} (M1=2) vs {gap[1]:.2f} (M1=4); "
          f"LOS lowers both bounds in every trial: {los_ok}")


def test_11_los_decoupling():
    worst = 0.0
    for seed in range(10):
        sc = desk_scenario(m1=1 + seed % 3, seed=seed, t_symbols=4 * (1 + seed % 2))
        worst = max(worst, los_decoupling_report(sc).worst)
    check(11, "LOS/RIS decoupling", worst <= 1e-14, f"max normalized cross entry {worst:.2e} (tol 1e-14)")
