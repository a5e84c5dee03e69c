"""Monte Carlo simulation of the augmented Ito system and residual evaluation.

Euler-Maruyama on the augmented state::

    eta_{k+1} = eta_k + (At0 eta_k + F0~(eta_k) + Bt0 v_k + Ct0 f_k) dt
                      + (At1 eta_k + F1~(eta_k) + Bt1 v_k + Ct1 f_k) dW_k

Every path owns a Philox stream keyed by ``(seed, path_index)``, so results
do not depend on how paths are grouped into blocks or workers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid
from sklearn.base import BaseEstimator

from .errors import EmptyEnsemble, EmptyFamily, NumericalBlowup, ZeroEnergyInput
from .model import AugmentedModel

log = logging.getLogger(__name__)

# --------------------------------------------------------------------------
# input signals

SIGNAL_KINDS = ("zero", "pulse", "exp_decay", "sinusoid", "filtered_noise")


@dataclass(frozen=True)
class SignalSpec:
    """Square-integrable test input.

    kinds and parameters:

    * ``zero``
    * ``pulse``: ``level`` on ``[t1, t2]``
    * ``exp_decay``: ``amp * base**t``
    * ``sinusoid``: ``amp * sin(2 pi freq t + phase)`` on ``[t1, t2]``
    * ``filtered_noise``: first-order low-pass filtered white noise with
      corner ``bandwidth`` (rad/s), scaled to RMS ``amp`` on ``[t1, t2]``;
      the realization is fixed by ``seed``
    """

    kind: str = "zero"
    dim: int = 1
    level: float = 0.0
    base: float = 0.9
    amp: float = 1.0
    freq: float = 1.0
    phase: float = 0.0
    bandwidth: float = 1.0
    t1: float = 0.0
    t2: float = np.inf
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("signal dimension must be >= 1")
        if self.kind == "exp_decay" and not (0 < self.base < 1):
            raise ValueError("exp_decay base must lie in (0, 1)")
        if self.kind in ("sinusoid", "filtered_noise") and not np.isfinite(self.t2):
            raise ValueError(f"{self.kind} needs a finite window end t2")

    @property
    def deterministic(self):
        return self.kind != "filtered_noise"

    def __call__(self, t) -> np.ndarray:
        """Values on the grid ``t``, shape ``(len(t), dim)``."""
        t = np.asarray(t, dtype=float)
        window = (t >= self.t1) & (t <= self.t2)
        if self.kind == "zero":
            s = np.zeros_like(t)
        elif self.kind == "pulse":
            s = np.where(window, self.level, 0.0)
        elif self.kind == "exp_decay":
            s = self.amp * self.base**t
        elif self.kind == "sinusoid":
            s = np.where(window, self.amp * np.sin(2 * np.pi * self.freq * t + self.phase), 0.0)
        else:
            s = self._noise(t) * window
        return np.repeat(s[:, None], self.dim, axis=1)

    def _noise(self, t):
        rng = np.random.Generator(np.random.Philox(self.seed))
        w = rng.standard_normal(len(t))
        out = np.zeros(len(t))
        if len(t) > 1:
            dt = float(t[1] - t[0])
            a = np.exp(-self.bandwidth * dt)
            gain = np.sqrt(1 - a * a)
            for k in range(1, len(t)):
                out[k] = a * out[k - 1] + gain * w[k]
        active = (t >= self.t1) & (t <= self.t2)
        rms = np.sqrt(np.mean(out[active] ** 2)) if np.any(active) else 0.0
        return self.amp * out / rms if rms > 0 else out

    def energy(self, t) -> float:
        """Trapezoidal ``int |s|^2 dt`` on the grid ``t``."""
        s = self(t)
        return float(trapezoid(np.sum(s * s, axis=1), t))

    def with_energy(self, target, t) -> "SignalSpec":
        """Copy rescaled so that its energy on ``t`` equals ``target``."""
        e = self.energy(t)
        if e <= 0:
            raise ZeroEnergyInput(f"{self.kind} signal has zero energy on the grid")
        k = np.sqrt(target / e)
        if self.kind == "pulse":
            return replace(self, level=self.level * k)
        return replace(self, amp=self.amp * k)

    def to_dict(self):
        d = {"kind": self.kind, "dim": self.dim}
        keys = {
            "pulse": ("level", "t1", "t2"),
            "exp_decay": ("base", "amp"),
            "sinusoid": ("amp", "freq", "phase", "t1", "t2"),
            "filtered_noise": ("bandwidth", "amp", "t1", "t2", "seed"),
        }.get(self.kind, ())
        for k in keys:
            v = getattr(self, k)
            d[k] = None if (isinstance(v, float) and np.isinf(v)) else v
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("t2", 0) is None:
            d["t2"] = np.inf
        return cls(**d)


def default_disturbance_family(horizon=30.0, dt=1e-3, dim=1) -> List[SignalSpec]:
    """Decaying exponential plus a windowed sinusoid and band-limited noise of equal energy."""
    t = time_grid(horizon, dt)
    base = SignalSpec("exp_decay", dim, base=0.9)
    target = base.energy(t)
    return [
        base,
        SignalSpec("sinusoid", dim, amp=1.0, freq=0.2, t1=0.0, t2=10.0).with_energy(target, t),
        SignalSpec("sinusoid", dim, amp=1.0, freq=2.0, t1=0.0, t2=10.0).with_energy(target, t),
        SignalSpec("filtered_noise", dim, amp=1.0, bandwidth=2.0, t1=0.0, t2=10.0, seed=7).with_energy(target, t),
    ]


def default_fault_family(dim=1) -> List[SignalSpec]:
    return [
        SignalSpec("pulse", dim, level=0.4, t1=10.0, t2=20.0),
        SignalSpec("pulse", dim, level=0.1, t1=10.0, t2=20.0),
        SignalSpec("pulse", dim, level=1.0, t1=0.0, t2=5.0),
        SignalSpec("sinusoid", dim, amp=0.4, freq=0.1, t1=10.0, t2=20.0),
        SignalSpec("sinusoid", dim, amp=0.4, freq=1.0, t1=10.0, t2=20.0),
    ]


# --------------------------------------------------------------------------
# configuration and ensembles


@dataclass(frozen=True)
class SimConfig:
    """Euler-Maruyama settings.

    ``noise_dt`` (default ``dt``) is the resolution at which Wiener increments
    are drawn; a coarser ``dt`` sums consecutive fine increments so that runs
    at several step sizes share one Brownian path. ``record_stride`` keeps
    every k-th grid point in the returned ensemble.
    """

    dt: float = 1e-3
    horizon: float = 30.0
    paths: int = 100
    seed: int = 0
    noise_dt: Optional[float] = None
    record_stride: int = 1
    store_paths: bool = True
    overflow: float = 1e8
    block_size: int = 512
    n_jobs: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and self.dt <= self.horizon):
            raise ValueError("need 0 < dt <= horizon")
        if self.paths < 1:
            raise ValueError("paths must be >= 1")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.noise_dt is not None:
            ratio = self.dt / self.noise_dt
            if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-9:
                raise ValueError("dt must be an integer multiple of noise_dt")

    @property
    def steps(self):
        return int(round(self.horizon / self.dt))

    @property
    def substeps(self):
        return 1 if self.noise_dt is None else int(round(self.dt / self.noise_dt))


def time_grid(horizon, dt):
    n = int(round(horizon / dt))
    return np.arange(n + 1) * dt


@dataclass(eq=False)
class PathEnsemble:
    """Simulated paths on the recorded grid ``t``.

    ``energy[p, k]`` is the trapezoidal ``int_0^t_k r'r ds`` of path ``p``,
    accumulated at full step resolution. ``eta`` and ``r`` are only kept
    when ``store_paths`` was set.
    """

    t: np.ndarray
    energy: np.ndarray
    eta_sq_mean: np.ndarray
    eta_final: np.ndarray
    keys: List[Tuple[int, int]]
    eta: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    f: Optional[np.ndarray] = None

    @property
    def paths(self):
        return self.energy.shape[0]


def _stream(seed, index):
    ss = np.random.SeedSequence(entropy=[int(seed) & (2**64 - 1), int(index)])
    return np.random.Generator(np.random.Philox(ss))


def _lift(aug, nl, eta):
    return 0.0 if nl.is_zero else aug.lift(nl, eta)


def _rows(X, MT):
    # plain einsum loop: per-row results do not depend on the block size
    return np.einsum("pi,ij->pj", X, MT)


def _run_block(aug, cfg, x0, keys, drift_in, diff_in, r_in, rec_idx):
    P = len(keys)
    ne = aug.n_eta
    K = cfg.steps
    dt = cfg.dt
    sub = cfg.substeps
    sq_noise = np.sqrt(dt / sub)
    gens = [_stream(s, i) for s, i in keys]
    chunk = 1024
    At0T, At1T, At2T = aug.At0.T, aug.At1.T, aug.At2.T
    eta = np.repeat(np.asarray(x0, dtype=float)[None, :], P, axis=0)
    nrec = len(rec_idx)
    energy = np.zeros((P, nrec))
    eta_sq_sum = np.zeros(nrec)
    eta_rec = np.zeros((P, nrec, ne)) if cfg.store_paths else None
    r_rec = np.zeros((P, nrec, aug.n_r)) if cfg.store_paths else None
    rec_pos = {k: j for j, k in enumerate(rec_idx)}

    r = _rows(eta, At2T) + r_in[0]
    rr = np.einsum("ij,ij->i", r, r)
    acc = np.zeros(P)

    def record(k):
        j = rec_pos.get(k)
        if j is None:
            return
        energy[:, j] = acc
        eta_sq_sum[j] = np.einsum("ij,ij->", eta, eta)
        if eta_rec is not None:
            eta_rec[:, j] = eta
            r_rec[:, j] = r

    record(0)
    dW = None
    for k in range(K):
        off = k % chunk
        if off == 0:
            m = min(chunk, K - k)
            z = np.stack([g.standard_normal(m * sub) for g in gens])
            dW = z.reshape(P, m, sub).sum(axis=2) * sq_noise
        drift = _rows(eta, At0T) + _lift(aug, aug.F0, eta) + drift_in[k]
        diff = _rows(eta, At1T) + _lift(aug, aug.F1, eta) + diff_in[k]
        eta = eta + drift * dt + diff * dW[:, off: off + 1]
        r = _rows(eta, At2T) + r_in[k + 1]
        rr_new = np.einsum("ij,ij->i", r, r)
        acc = acc + 0.5 * dt * (rr + rr_new)
        rr = rr_new
        nrm = np.max(np.abs(eta), axis=1)
        bad = ~(nrm <= cfg.overflow)
        if np.any(bad):
            p = int(np.argmax(bad))
            err = NumericalBlowup(f"state norm exceeded {cfg.overflow:.1e} on path {keys[p]} at step {k + 1}",
                                  path=keys[p], step=k + 1)
            done = [j for j, idx in enumerate(rec_idx) if idx <= k]
            err.partial = (np.asarray(done, dtype=int), eta_sq_sum[: len(done)] / P)
            raise err
        record(k + 1)
    return energy, eta_sq_sum, eta, eta_rec, r_rec


def simulate(aug: AugmentedModel, v: SignalSpec, f: SignalSpec, x0, cfg: SimConfig,
             keys: Optional[Sequence[Tuple[int, int]]] = None) -> PathEnsemble:
    """Simulate ``cfg.paths`` independent paths (or the explicit ``keys``).

    ``x0`` is either the plant state (length ``n``; the filter starts at 0) or
    the full augmented state.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size == aug.n and aug.n != aug.n_eta:
        x0 = np.concatenate([x0, np.zeros(aug.n_eta - aug.n)])
    if x0.size != aug.n_eta:
        raise ValueError(f"x0 has length {x0.size}; expected {aug.n} or {aug.n_eta}")
    if v.dim != aug.n_v or f.dim != aug.n_f:
        raise ValueError(f"signal dimensions (v={v.dim}, f={f.dim}) != model (n_v={aug.n_v}, n_f={aug.n_f})")
    if keys is None:
        keys = [(cfg.seed, i) for i in range(cfg.paths)]
    keys = [(int(s), int(i)) for s, i in keys]
    t_full = time_grid(cfg.horizon, cfg.dt)
    vv, ff = v(t_full), f(t_full)
    drift_in = vv @ aug.Bt0.T + ff @ aug.Ct0.T
    diff_in = vv @ aug.Bt1.T + ff @ aug.Ct1.T
    r_in = vv @ aug.Bt2.T + ff @ aug.Ct2.T
    rec_idx = list(range(0, cfg.steps + 1, cfg.record_stride))
    if rec_idx[-1] != cfg.steps:
        rec_idx.append(cfg.steps)

    blocks = [keys[i: i + cfg.block_size] for i in range(0, len(keys), cfg.block_size)]
    args = (aug, cfg, x0)
    if cfg.n_jobs != 1 and len(blocks) > 1:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=cfg.n_jobs, prefer="threads")(
            delayed(_run_block)(*args, b, drift_in, diff_in, r_in, rec_idx) for b in blocks)
    else:
        results = [_run_block(*args, b, drift_in, diff_in, r_in, rec_idx) for b in blocks]

    energy = np.concatenate([res[0] for res in results], axis=0)
    eta_sq_mean = sum(res[1] for res in results) / len(keys)
    eta_final = np.concatenate([res[2] for res in results], axis=0)
    eta = r = None
    if cfg.store_paths:
        eta = np.concatenate([res[3] for res in results], axis=0)
        r = np.concatenate([res[4] for res in results], axis=0)
    idx = np.asarray(rec_idx)
    return PathEnsemble(t_full[idx], energy, eta_sq_mean, eta_final, keys, eta, r, vv[idx], ff[idx])


# --------------------------------------------------------------------------
# residual evaluation


@dataclass
class JrSeries:
    t: np.ndarray
    J: np.ndarray
    se: np.ndarray
    paths: int

    def at(self, T) -> Tuple[float, float]:
        k = int(np.argmin(np.abs(self.t - T)))
        return float(self.J[k]), float(self.se[k])


def _jr_from_energy(t, energy):
    """``J_r(t) = sqrt(mean_p E_p(t) / t)`` with a delta-method standard error."""
    energy = np.atleast_2d(energy)
    P = energy.shape[0]
    if P == 0:
        raise EmptyEnsemble("no paths")
    mean = energy.mean(axis=0)
    sd = energy.std(axis=0, ddof=1) if P > 1 else np.zeros_like(mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        J = np.where(t > 0, np.sqrt(np.maximum(mean, 0.0) / np.where(t > 0, t, 1.0)), 0.0)
        se = np.where((t > 0) & (J > 0), sd / np.sqrt(P) / np.where(t > 0, t, 1.0) / (2 * np.where(J > 0, J, 1.0)), 0.0)
    return JrSeries(np.asarray(t), J, se, P)


def residual_evaluation(ensemble: PathEnsemble, paths: Optional[Sequence[int]] = None) -> JrSeries:
    """Residual evaluation function on the ensemble's grid.

    ``paths`` restricts the expectation to a subset of path rows.
    """
    if ensemble is None or ensemble.paths == 0:
        raise EmptyEnsemble("empty ensemble")
    E = ensemble.energy if paths is None else ensemble.energy[np.asarray(paths)]
    if E.shape[0] == 0:
        raise EmptyEnsemble("empty path selection")
    return _jr_from_energy(ensemble.t, E)


def jr_from_residuals(t, r) -> JrSeries:
    """Residual evaluation of explicit residual samples.

    ``r`` has shape ``(n_t,)``, ``(n_t, n_r)`` or ``(paths, n_t, n_r)``; the
    time integral is the trapezoid rule on ``t``.
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if r.ndim == 1:
        r = r[None, :, None]
    elif r.ndim == 2:
        r = r[None]
    if r.shape[0] == 0:
        raise EmptyEnsemble("no residual samples")
    rr = np.sum(r * r, axis=2)
    energy = np.concatenate(
        [np.zeros((rr.shape[0], 1)), np.cumsum(0.5 * np.diff(t) * (rr[:, 1:] + rr[:, :-1]), axis=1)], axis=1)
    return _jr_from_energy(t, energy)


@dataclass
class CalibrationReport:
    J_th: float
    window: float
    per_member: List[Dict[str, float]]
    family: List[dict]
    batches: int
    paths: int
    seed: int


def calibrate_threshold(aug: AugmentedModel, family: Sequence[SignalSpec], T: float, cfg: SimConfig,
                        x0=None, batches: int = 1) -> CalibrationReport:
    """Fault-free threshold: the largest Monte Carlo ``J_r(T)`` over the family and batches.

    Each batch uses ``cfg.paths`` paths with its own seed ``cfg.seed + b``.
    """
    if not family:
        raise EmptyFamily("disturbance family is empty")
    x0 = np.zeros(aug.n) if x0 is None else x0
    run_cfg = replace(cfg, horizon=T, store_paths=False)
    zero_f = SignalSpec("zero", aug.n_f)
    rows = []
    for i, v in enumerate(family):
        for b in range(batches):
            ens = simulate(aug, v, zero_f, x0, replace(run_cfg, seed=cfg.seed + 7919 * i + b))
            J, se = residual_evaluation(ens).at(T)
            rows.append({"member": i, "batch": b, "J_r_T": J, "se": se})
    J_th = max(r["J_r_T"] for r in rows)
    return CalibrationReport(J_th, T, rows, [v.to_dict() for v in family], batches, cfg.paths, cfg.seed)


@dataclass
class ResidualReport:
    t: np.ndarray
    J: np.ndarray
    J_th: float
    window: float
    alarm: bool
    first_alarm_time: Optional[float]

    def summary(self):
        return {"J_th": self.J_th, "window": self.window, "alarm": self.alarm,
                "first_alarm_time": self.first_alarm_time, "max_J_after_window": float(self._max_after())}

    def _max_after(self):
        m = self.t >= self.window - 1e-12
        return self.J[m].max() if np.any(m) else float("nan")


def detect(series: JrSeries, J_th: float, T: float) -> ResidualReport:
    """Alarm iff ``J_r(t) > J_th`` for some grid time ``t >= T``."""
    t, J = np.asarray(series.t), np.asarray(series.J)
    after = t >= T - 1e-12
    hits = np.nonzero(after & (J > J_th))[0]
    first = float(t[hits[0]]) if len(hits) else None
    return ResidualReport(t, J, float(J_th), float(T), bool(len(hits)), first)


# --------------------------------------------------------------------------
# empirical gains and stability


@dataclass
class GainEstimate:
    """Empirical L2 gain over a sampled input family.

    ``bound``: ``"lower"`` for the H-infinity estimate (a max over samples
    cannot exceed the supremum), ``"upper"`` for the H- estimate.
    """

    value: float
    ratios: List[float]
    se: List[float]
    bound: str


def _gain_ratios(aug, family, cfg, which):
    if not family:
        raise EmptyFamily("input family is empty")
    run_cfg = replace(cfg, store_paths=False)
    t = time_grid(cfg.horizon, cfg.dt)
    ratios, ses = [], []
    for i, s in enumerate(family):
        e_in = s.energy(t)
        if e_in <= 0:
            raise ZeroEnergyInput(f"family member {i} ({s.kind}) has zero energy")
        if which == "v":
            v, f = s, SignalSpec("zero", aug.n_f)
        else:
            v, f = SignalSpec("zero", aug.n_v), s
        ens = simulate(aug, v, f, np.zeros(aug.n_eta), replace(run_cfg, seed=cfg.seed + 104729 * i))
        E = ens.energy[:, -1]
        mean = E.mean()
        sd = E.std(ddof=1) if len(E) > 1 else 0.0
        ratio = np.sqrt(mean / e_in)
        ratios.append(float(ratio))
        ses.append(float(sd / np.sqrt(len(E)) / e_in / (2 * ratio)) if ratio > 0 else 0.0)
    return ratios, ses


def estimate_hinf_gain(aug: AugmentedModel, family: Sequence[SignalSpec], cfg: SimConfig) -> GainEstimate:
    """Max over the family of ``sqrt(E int|r|^2 / int|v|^2)`` with ``f = 0``, ``eta(0) = 0``.

    A finite-horizon lower estimate of the H-infinity index.
    """
    ratios, ses = _gain_ratios(aug, family, cfg, "v")
    k = int(np.argmax(ratios))
    return GainEstimate(ratios[k], ratios, ses, "lower")


def estimate_hminus(aug: AugmentedModel, family: Sequence[SignalSpec], cfg: SimConfig) -> GainEstimate:
    """Min over the family of ``sqrt(E int|r|^2 / int|f|^2)`` with ``v = 0``, ``eta(0) = 0``.

    An upper estimate of the H- index (sampling cannot reach the infimum).
    """
    ratios, ses = _gain_ratios(aug, family, cfg, "f")
    k = int(np.argmin(ratios))
    return GainEstimate(ratios[k], ratios, ses, "upper")


@dataclass
class StabilityReport:
    decay_rate: float
    prefactor: float
    fit_residual: float
    stable: bool
    blowup: bool = False


def stability_probe(aug: AugmentedModel, x0, cfg: SimConfig, t_burn: float = 0.0) -> StabilityReport:
    """Fit ``log E|eta(t)|^2 ~ log(b) - a t`` on ``[t_burn, horizon]``.

    ``a > 0`` is read as mean-square exponential stability. A numerical
    blow-up is fitted on the pre-blow-up prefix and flagged.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    if not np.any(x0):
        raise ValueError("stability probe needs a nonzero initial state")
    zv, zf = SignalSpec("zero", aug.n_v), SignalSpec("zero", aug.n_f)
    run_cfg = replace(cfg, store_paths=False)
    blowup = False
    try:
        ens = simulate(aug, zv, zf, x0, run_cfg)
        t, m = ens.t, ens.eta_sq_mean
    except NumericalBlowup as exc:
        blowup = True
        rec_idx = list(range(0, run_cfg.steps + 1, run_cfg.record_stride))
        idx, m = exc.partial
        t = np.asarray(rec_idx)[idx] * cfg.dt
    x0_full = x0 if x0.size == aug.n_eta else np.concatenate([x0, np.zeros(aug.n_eta - x0.size)])
    sel = (t >= t_burn) & (m > 1e-280)
    if sel.sum() < 2:
        return StabilityReport(float("nan"), float("nan"), float("nan"), False, blowup)
    y = np.log(m[sel] / np.dot(x0_full, x0_full))
    A = np.column_stack([np.ones(sel.sum()), -t[sel]])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    rate = float(coef[1])
    return StabilityReport(rate, float(np.exp(coef[0])), float(np.sqrt(np.mean(resid**2))), rate > 0 and not blowup, blowup)


# --------------------------------------------------------------------------
# experiments


def run_experiments(aug: AugmentedModel, v: SignalSpec, f: SignalSpec, x0, cfg: SimConfig,
                    J_th: float, T: float, repetitions: int) -> List[ResidualReport]:
    """Independent repetitions of a detection experiment.

    Repetition ``j`` averages ``cfg.paths`` paths keyed ``(cfg.seed + j, i)``.
    All repetitions are simulated as one ensemble.
    """
    keys = [(cfg.seed + j, i) for j in range(repetitions) for i in range(cfg.paths)]
    ens = simulate(aug, v, f, x0, replace(cfg, store_paths=False), keys=keys)
    out = []
    for j in range(repetitions):
        rows = np.arange(j * cfg.paths, (j + 1) * cfg.paths)
        out.append(detect(residual_evaluation(ens, rows), J_th, T))
    return out


class ThresholdDetector(BaseEstimator):
    """Estimator-style residual evaluator.

    ``fit`` takes fault-free ``J_r`` series (rows) on the grid ``t`` and sets
    ``threshold_`` to their largest value at the evaluation window; ``predict``
    returns one alarm flag per series.
    """

    def __init__(self, window=5.0):
        self.window = window

    def _validate(self, J, t):
        from sklearn.utils.validation import check_array

        J = check_array(J, ensure_2d=False, dtype=float)
        J = np.atleast_2d(J)
        t = np.asarray(t, dtype=float)
        if J.shape[1] != t.shape[0]:
            raise ValueError(f"series length {J.shape[1]} != grid length {t.shape[0]}")
        if t[-1] < self.window:
            raise ValueError("series must extend to the evaluation window")
        return J, t

    def fit(self, J, t):
        J, t = self._validate(J, t)
        k = int(np.argmin(np.abs(t - self.window)))
        self.threshold_ = float(J[:, k].max())
        return self

    def decision_function(self, J, t):
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self, "threshold_")
        J, t = self._validate(J, t)
        after = t >= self.window - 1e-12
        return J[:, after].max(axis=1) - self.threshold_

    def predict(self, J, t):
        return self.decision_function(J, t) > 0
