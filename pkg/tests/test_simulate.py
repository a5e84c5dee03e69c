import numpy as np
import pytest

from mixfdf.errors import EmptyEnsemble, EmptyFamily, NumericalBlowup
from mixfdf.model import AugmentedModel, FilterRealization, augment
from mixfdf.simulate import (SignalSpec, SimConfig, ThresholdDetector, calibrate_threshold, detect,
                             estimate_hinf_gain, estimate_hminus, jr_from_residuals, residual_evaluation,
                             simulate, stability_probe, time_grid)

from _sde import second_moment_check, weak_order_check

ZERO = SignalSpec("zero", 1)


def test_zero_paths_rejected():
    with pytest.raises(ValueError):
        SimConfig(paths=0)
    with pytest.raises(EmptyEnsemble):
        jr_from_residuals(np.linspace(0, 1, 5), np.zeros((0, 5, 1)))


def test_output_map_consistency(plant, design1):
    aug = augment(plant, design1.filter)
    v = SignalSpec("exp_decay", 1, base=0.9)
    f = SignalSpec("pulse", 1, level=0.4, t1=0.5, t2=1.5)
    ens = simulate(aug, v, f, [1.0, -1.0], SimConfig(dt=1e-3, horizon=2.0, paths=5, seed=3, record_stride=7))
    rebuilt = ens.eta @ aug.At2.T + ens.v @ aug.Bt2.T + ens.f @ aug.Ct2.T
    assert np.abs(rebuilt - ens.r).max() <= 1e-12


def test_second_moment_matches_closed_form():
    res = second_moment_check()
    assert abs(res["z"]) <= 3.0, res


def test_weak_order_one():
    res = weak_order_check()
    assert res["exact_ratio"] == pytest.approx(2.0, abs=0.05)
    assert abs(res["ratio"] - 2.0) <= max(3 * res["se"], 0.1), res


def test_jr_constant_residual():
    t = time_grid(3.0, 1e-3)
    J = jr_from_residuals(t, np.full(t.shape, 0.7)).J
    assert np.allclose(J[1:], 0.7, atol=1e-12)


def test_jr_unit_pulse():
    t = time_grid(4.0, 1e-3)
    r = (t <= 1.0).astype(float)
    J = jr_from_residuals(t, r).J
    expected = np.minimum(1.0, 1.0 / np.sqrt(np.where(t > 0, t, 1.0)))
    assert np.abs(J[1:] - expected[1:]).max() <= 1e-3


def test_jr_homogeneous(rng):
    t = time_grid(1.0, 1e-2)
    r = rng.standard_normal((3, t.size, 2))
    assert np.allclose(jr_from_residuals(t, 2.5 * r).J, 2.5 * jr_from_residuals(t, r).J, atol=1e-14)


def _static(Bt2=0.0, Ct2=0.0):
    return AugmentedModel.from_matrices(-np.eye(1), At2=[[0.0]], Bt2=[[Bt2]], Ct2=[[Ct2]], n=1)


def test_static_gains():
    cfg = SimConfig(dt=1e-3, horizon=5.0, paths=2, seed=0)
    fam = [SignalSpec("exp_decay", 1, base=0.9), SignalSpec("sinusoid", 1, amp=1.0, freq=0.5, t2=4.0)]
    assert estimate_hinf_gain(_static(Bt2=2.0), fam, cfg).value == pytest.approx(2.0, abs=1e-6)
    assert estimate_hminus(_static(Ct2=3.0), fam, cfg).value == pytest.approx(3.0, abs=1e-6)


def test_zero_residual_weight_gives_zero_gain(plant):
    n, ny = plant.n, plant.n_y
    aug = augment(plant, FilterRealization(np.zeros((n, n)), np.zeros((n, ny)), np.zeros((ny, ny))))
    cfg = SimConfig(dt=1e-3, horizon=3.0, paths=4, seed=0)
    assert estimate_hinf_gain(aug, [SignalSpec("exp_decay", 1, base=0.9)], cfg).value == 0.0


def test_stability_rates():
    cfg = SimConfig(dt=1e-3, horizon=3.0, paths=4, seed=0, record_stride=10)
    stable = stability_probe(AugmentedModel.from_matrices(-np.eye(2)), [1.0, 1.0], cfg)
    assert stable.decay_rate == pytest.approx(2.0, rel=0.1) and stable.stable
    unstable = stability_probe(AugmentedModel.from_matrices(np.eye(2)), [1.0, 1.0], cfg)
    assert unstable.decay_rate < 0 and not unstable.stable


def test_stability_of_synthesized_loop(plant, design1):
    aug = augment(plant, design1.filter)
    rep = stability_probe(aug, [1.0, -1.0], SimConfig(dt=1e-3, horizon=10.0, paths=50, seed=2, record_stride=10))
    assert rep.decay_rate > 0 and not rep.blowup


def test_blowup_reported():
    aug = AugmentedModel.from_matrices(50 * np.eye(1))
    with pytest.raises(NumericalBlowup):
        simulate(aug, ZERO, ZERO, [1.0], SimConfig(dt=1e-3, horizon=1.0, paths=2, overflow=1e6))
    rep = stability_probe(aug, [1.0], SimConfig(dt=1e-3, horizon=1.0, paths=2, overflow=1e6))
    assert rep.blowup and not rep.stable


def test_bitwise_reproducible_across_blocks_and_threads(plant, design1):
    aug = augment(plant, design1.filter)
    v = SignalSpec("exp_decay", 1, base=0.9)
    base = SimConfig(dt=1e-3, horizon=1.0, paths=9, seed=4)
    a = simulate(aug, v, ZERO, [1.0, -1.0], base)
    b = simulate(aug, v, ZERO, [1.0, -1.0], SimConfig(dt=1e-3, horizon=1.0, paths=9, seed=4, block_size=2, n_jobs=3))
    assert np.array_equal(a.eta, b.eta) and np.array_equal(a.energy, b.energy)
    c = simulate(aug, v, ZERO, [1.0, -1.0], base, keys=[(4, 5)])
    assert np.array_equal(c.eta[0], a.eta[5])


def test_calibration_zero_family_is_zero(plant, design1):
    aug = augment(plant, design1.filter)
    rep = calibrate_threshold(aug, [ZERO], 1.0, SimConfig(dt=1e-3, horizon=2.0, paths=3))
    assert rep.J_th == 0.0
    with pytest.raises(EmptyFamily):
        calibrate_threshold(aug, [], 1.0, SimConfig(dt=1e-3, horizon=2.0, paths=3))


def test_detect_only_after_window():
    t = time_grid(10.0, 0.5)
    J = np.where(t < 5.0, 10.0, 0.1)
    assert not detect(jr_from_residuals(t, np.zeros_like(t)), 0.0, 5.0).alarm
    from mixfdf.simulate import JrSeries
    rep = detect(JrSeries(t, J, np.zeros_like(t), 1), 1.0, 5.0)
    assert not rep.alarm and rep.first_alarm_time is None
    rep = detect(JrSeries(t, J + (t >= 7) * 5.0, np.zeros_like(t), 1), 1.0, 5.0)
    assert rep.alarm and rep.first_alarm_time == 7.0


def test_threshold_detector():
    t = time_grid(10.0, 0.5)
    quiet = np.vstack([np.full(t.shape, 0.2), np.full(t.shape, 0.3)])
    det = ThresholdDetector(window=5.0).fit(quiet, t)
    assert det.threshold_ == 0.3
    loud = np.full((1, t.size), 0.3) + (t >= 8) * 0.5
    assert list(det.predict(np.vstack([quiet, loud]), t)) == [False, False, True]
    with pytest.raises(ValueError):
        det.predict(np.zeros((1, 3)), t)


def test_signal_energy_scaling():
    t = time_grid(10.0, 1e-3)
    s = SignalSpec("sinusoid", 1, amp=1.0, freq=0.2, t2=10.0).with_energy(2.0, t)
    assert s.energy(t) == pytest.approx(2.0, rel=1e-12)
    assert SignalSpec.from_dict(s.to_dict()).energy(t) == pytest.approx(2.0, rel=1e-12)
