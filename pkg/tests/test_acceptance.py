"""Acceptance criteria 1-8.

Each test prints one ``PASS``/``FAIL`` line with the measured values; the
lines are repeated at the end of the pytest run. Tolerances are fixed here
and never relaxed to make a criterion pass.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from mixfdf.catalog import reference_certificate
from mixfdf.hji import HjiParams, QuadraticStorage, eval_xvf_hjis
from mixfdf.linalg import block_diag
from mixfdf.model import FilterRealization, NonlinearPlant, QuasiLinearModel, augment
from mixfdf.simulate import (SignalSpec, SimConfig, calibrate_threshold, default_disturbance_family,
                             default_fault_family, estimate_hinf_gain, estimate_hminus, run_experiments)
from mixfdf.synthesis import (AriCheckInput, SynthesisSpec, ari_matrices, build_synthesis_lmis, check_analysis,
                              recover_filter, synthesize, synthesis_margins)

import conftest
from _sde import second_moment_check, weak_order_check

ARTIFACTS = Path(os.environ.get("MIXFDF_ARTIFACTS", Path(__file__).resolve().parent.parent / "acceptance_artifacts"))

# detection protocol
T_WINDOW = 5.0
DT = 1e-3
HORIZON = 30.0
PATHS = 100
REPS = 50
SEED = 1
X0 = [1.0, -1.0]
V = SignalSpec("exp_decay", 1, base=0.9)
F04 = SignalSpec("pulse", 1, level=0.4, t1=10.0, t2=20.0)
F01 = SignalSpec("pulse", 1, level=0.1, t1=10.0, t2=20.0)


def report(num, ok, text):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {text}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def _detection(aug, faults):
    cfg = SimConfig(dt=DT, horizon=HORIZON, paths=PATHS, seed=SEED, record_stride=10, store_paths=False)
    cal = calibrate_threshold(aug, [V], T_WINDOW, cfg, x0=np.array(X0))
    rates = {}
    for name, f in faults.items():
        reps = run_experiments(aug, V, f, X0, cfg, cal.J_th, T_WINDOW, REPS)
        rates[name] = float(np.mean([r.alarm for r in reps]))
    return cal.J_th, rates


@pytest.fixture(scope="module")
def detection_design1(plant, design1):
    t0 = time.perf_counter()
    J_th, rates = _detection(augment(plant, design1.filter), {"f0.4": F04, "f0.1": F01})
    return J_th, rates, time.perf_counter() - t0


def test_criterion1_example_feasibility(plant):
    t0 = time.perf_counter()
    res = synthesize(SynthesisSpec(plant, 1.0, 0.5))
    dt = time.perf_counter() - t0
    m = min(res.margins[k] for k in ("P_bounds", "gamma_lmi", "delta_lmi"))
    c, f = res.certificate, res.filter
    eS = np.linalg.norm(f.S_hat.T @ f.S_hat - c["S_check"])
    eA = np.linalg.norm(c["P2"] @ f.A_hat - c["A_check"])
    ok = m >= 1e-6 and eS <= 1e-8 and eA <= 1e-8 and dt < 30
    assert report(1, ok, f"min LMI margin {m:.3e} (>= 1e-6), |S'S-S_check| {eS:.1e}, "
                         f"|P2 A-A_check| {eA:.1e} (<= 1e-8), {dt:.1f}s (< 30s)")


def test_criterion2_reported_certificate(plant):
    cert = reference_certificate()
    lmis, space = build_synthesis_lmis(SynthesisSpec(plant, 1.0, 0.5))
    t5 = synthesis_margins(lmis, space, cert)
    filt = recover_filter(cert)
    P = block_diag(cert["P1"], cert["P2"])
    l3 = check_analysis(augment(plant, filt), P, cert["beta"], plant.alpha, 1.0, 0.5)
    table = {"tolerance": 1e-2, "lmi_margins": t5, "analysis_margins": l3,
             "within_tolerance": {k: bool(v > -1e-2) for k, v in {**t5, **l3}.items()}}
    ARTIFACTS.mkdir(parents=True, exist_ok=True)
    path = ARTIFACTS / "reported_certificate_margins.json"
    path.write_text(json.dumps(table, indent=2) + "\n")
    ok = all(np.isfinite(v) for v in {**t5, **l3}.values()) and path.exists()
    cells = ", ".join(f"{k} {v:+.3f}" for k, v in t5.items())
    assert report(2, ok, f"margins emitted and archived to {path.name}: {cells} "
                         "(reporting criterion; values within tol 1e-2: "
                         f"{sum(table['within_tolerance'].values())}/{len(table['within_tolerance'])})")


@pytest.mark.slow
def test_criterion3_detection_reproduction(detection_design1):
    J_th, rates, secs = detection_design1
    in_band = 0.2 <= J_th <= 0.6
    ok = in_band and rates["f0.4"] >= 0.9 and rates["f0.1"] <= 0.1 and secs < 300
    assert report(3, ok, f"J_th {J_th:.4f} (band [0.2, 0.6]), alarm rate f0.4 {rates['f0.4']:.2f} (>= 0.90), "
                         f"f0.1 {rates['f0.1']:.2f} (<= 0.10), {secs:.0f}s (< 300s)")


@pytest.mark.slow
def test_criterion4_second_design(plant, design2, detection_design1):
    J1 = detection_design1[0]
    feasible = min(design2.margins[k] for k in ("P_bounds", "gamma_lmi", "delta_lmi")) >= 1e-6
    J2, rates = _detection(augment(plant, design2.filter), {"f0.1": F01})
    ok = feasible and rates["f0.1"] >= 0.9 and J2 < J1
    assert report(4, ok, f"feasible {feasible}, alarm rate f0.1 {rates['f0.1']:.2f} (>= 0.90), "
                         f"J_th {J2:.4f} vs first design {J1:.4f} (must be lower)")


@pytest.mark.slow
def test_criterion5_gain_consistency(plant, design1):
    aug = augment(plant, design1.filter)
    cfg = SimConfig(dt=DT, horizon=HORIZON, paths=PATHS, seed=0, store_paths=False)
    hinf = estimate_hinf_gain(aug, default_disturbance_family(HORIZON, DT, 1), cfg)
    hm = estimate_hminus(aug, default_fault_family(1), cfg)
    k = int(np.argmax(hinf.ratios))
    ok_inf = hinf.value <= 1.0 + 2 * hinf.se[k]
    ok_m = all(r >= 0.5 - 2 * s for r, s in zip(hm.ratios, hm.se))
    assert report(5, ok_inf and ok_m, f"H-inf ratio {hinf.value:.4f} (<= 1 + 2SE), "
                                      f"min H- ratio {hm.value:.4f} (every ratio >= 0.5 - 2SE)")


def _random_linear(rng, n):
    R = rng.standard_normal
    plant = QuasiLinearModel(A0=R((n, n)), A1=0.5 * R((n, n)), A2=R((1, n)), B0=R((n, 1)), B1=0.5 * R((n, 1)),
                             B2=R((1, 1)), C0=R((n, 1)), C1=0.5 * R((n, 1)), C2=R((1, 1)))
    return plant, FilterRealization(R((n, n)), R((n, 1)), R((1, 1)))


def test_criterion6_hji_ari_oracle():
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 4))
        plant, filt = _random_linear(rng, n)
        aug = augment(plant, filt)
        G1, G2 = rng.standard_normal((2 * n, 2 * n)), rng.standard_normal((2 * n, 2 * n))
        P1, P2 = G1 @ G1.T + np.eye(2 * n), G2 @ G2.T + np.eye(2 * n)
        gamma, delta = 10.0, 0.1
        R1, R2, _, _ = ari_matrices(AriCheckInput(aug, P1, P2, eps1=1.0, eps2=2.0, c=0.1, gamma=gamma, delta=delta))
        params = HjiParams(gamma=gamma, delta=delta, eps1=1.0, eps2=2.0, c3=0.1)
        nl = NonlinearPlant.from_linear(plant, filt)
        V1, V2 = QuadraticStorage(P1), QuadraticStorage(P2)
        for eta in rng.standard_normal((1000, 2 * n)):
            hinf, hminus = eval_xvf_hjis(nl, V1, V2, params, eta)
            worst = max(worst, abs(hinf.lhs_value - eta @ R1 @ eta), abs(hminus.lhs_value - eta @ R2 @ eta))
    secs = time.perf_counter() - t0
    assert report(6, worst <= 1e-8 and secs < 60, f"max |HJI - quadratic form| {worst:.2e} (<= 1e-8) "
                                                  f"over 20 plants x 1000 points, {secs:.1f}s (< 60s)")


def test_criterion7_sde_correctness():
    t0 = time.perf_counter()
    sm = second_moment_check()
    wo = weak_order_check()
    secs = time.perf_counter() - t0
    ok_sm = abs(sm["z"]) <= 3.0
    ok_wo = abs(wo["ratio"] - 2.0) <= max(3 * wo["se"], 0.1)
    assert report(7, ok_sm and ok_wo and secs < 120,
                  f"E x^2 {sm['mean']:.5f} vs {sm['exact']:.5f} ({sm['z']:+.2f} SE, within 3), "
                  f"bias decrement ratio {wo['ratio']:.3f} +- {wo['se']:.3f} (order 1 gives 2), {secs:.1f}s (< 120s)")


def test_criterion8_property_suites(plant, design1):
    import test_hji
    import test_linalg
    import test_sdp
    import test_simulate

    rng = np.random.default_rng(8)
    checks = {
        "square completion": lambda: test_linalg.test_square_completion_identity(rng),
        "sym_sqrt round trip": lambda: test_linalg.test_sym_sqrt_round_trip(rng),
        "Lyapunov oracle": test_sdp.test_lyapunov_oracle_agreement,
        "fault-noise degeneration": lambda: test_hji.test_fault_noise_form_degenerates(rng),
        "special-case equivalence": lambda: test_hji.test_special_case_matches_general(rng),
        "bitwise ensembles": lambda: test_simulate.test_bitwise_reproducible_across_blocks_and_threads(plant, design1),
    }
    failed = []
    for name, fn in checks.items():
        try:
            fn()
        except AssertionError:
            failed.append(name)
    again = synthesize(SynthesisSpec(plant, 1.0, 0.5))
    if not all(np.array_equal(np.asarray(again.certificate[k]), np.asarray(design1.certificate[k]))
               for k in design1.certificate):
        failed.append("bitwise certificate")
    assert report(8, not failed, f"{len(checks) + 1 - len(failed)}/{len(checks) + 1} property suites green"
                                 + (f"; failing: {', '.join(failed)}" if failed else ""))
