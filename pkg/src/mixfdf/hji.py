"""Pointwise evaluation of the coupled Hamilton-Jacobi inequalities.

Storage functions are quadratic, ``V(eta) = eta' P eta``, so the gradient is
``2 P eta`` and the Hessian ``2 P``; no user function is ever differentiated.

H-infinity side (must be <= 0, inner matrix negative definite)::

    (1+e1)|s (l(x)-l(xh))|^2 + c3|eta|^2 + V_eta' f1~ + 1/2 f2~' V_ee f2~
        - K' Inner^{-1} K
    K     = 1/2 g2~' V_ee f2~ + 1/2 g1~' V_eta
    Inner = 1/2 g2~' V_ee g2~ + (1+1/e1)|s m|^2 I - gamma^2 I

H- side (must be >= 0, inner matrix positive definite)::

    (1-e2)|s (l(xh)-l(x))|^2 - V_eta' f1~ - 1/2 f2~' V_ee f2~ - K' Inner^{-1} K
    K     = 1/2 h2~' V_ee f2~ + 1/2 h1~' V_eta
    Inner = -1/2 h2~' V_ee h2~ + (1-1/e2)|s n|^2 I - delta^2 I

Without fault noise (``h2 = 0``) the Schur term is
``1/4 V_eta' h1~ Inner^{-1} h1~' V_eta``; see ``eval_hminus_hji``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import EmptyProbe
from .linalg import as_sym, spectral_norm
from .model import NonlinearPlant, ball_samples

__all__ = [
    "QuadraticStorage",
    "HjiParams",
    "HjiPointResult",
    "ScanProbe",
    "ScanReport",
    "eval_hinf_hji",
    "eval_hminus_hji",
    "eval_xvf_hjis",
    "eval_special_hinf",
    "scan",
]


@dataclass(frozen=True, eq=False)
class QuadraticStorage:
    """``V(eta) = eta' P eta`` with its sandwich constants ``c1 = lambda_min(P)``, ``c2 = lambda_max(P)``."""

    P: np.ndarray

    def __post_init__(self):
        P = as_sym(self.P, "P")
        object.__setattr__(self, "P", P)
        w = np.linalg.eigvalsh(P)
        if w[0] <= 0:
            raise ValueError(f"storage matrix must be positive definite (lambda_min={w[0]:.3e})")
        object.__setattr__(self, "c1", float(w[0]))
        object.__setattr__(self, "c2", float(w[-1]))

    def __call__(self, eta):
        eta = np.asarray(eta, dtype=float)
        return float(eta @ self.P @ eta)

    def gradient(self, eta):
        return 2.0 * self.P @ np.asarray(eta, dtype=float)

    def hessian(self, eta=None):
        return 2.0 * self.P

    def scaled(self, s):
        return QuadraticStorage(s * self.P)


@dataclass(frozen=True)
class HjiParams:
    """Constants of the inequalities.

    ``hminus_schur`` is the coefficient of ``V_eta' h1~ Inner^{-1} h1~' V_eta``
    on the noise-free-fault H- side; 0.25 follows from completing the square
    and agrees with the fault-noise form at ``h2 = 0``. ``special_inner`` picks
    ``"n"`` (default) or ``"m"`` as the output map in the special-case
    H- inner matrix.
    """

    gamma: float = 1.0
    delta: float = 0.5
    eps1: float = 1.0
    eps2: float = 2.0
    c3: float = 0.0
    hminus_schur: float = 0.25
    special_inner: str = "n"

    def __post_init__(self):
        if self.gamma <= 0 or self.delta <= 0 or self.eps1 <= 0 or self.eps2 <= 0:
            raise ValueError("gamma, delta, eps1, eps2 must be positive")
        if self.c3 < 0:
            raise ValueError("c3 must be non-negative")
        if self.special_inner not in ("n", "m"):
            raise ValueError("special_inner must be 'n' or 'm'")


@dataclass
class HjiPointResult:
    """Value of one coupled inequality at one point.

    ``inner_matrix_margin`` is sense-adjusted (positive means the inner matrix
    has the required sign). ``lhs_value`` is NaN when the inner matrix is
    singular.
    """

    lhs_value: float
    inner_matrix_margin: float
    satisfied: bool
    side: str
    terms: Dict[str, float] = field(default_factory=dict)


def _schur(K, inner):
    try:
        return float(K @ np.linalg.solve(inner, K))
    except np.linalg.LinAlgError:
        return float("nan")


def _result(side, terms, schur, margin, tol):
    lhs = sum(terms.values()) - schur
    terms = dict(terms, schur=-schur)
    if not np.isfinite(lhs):
        return HjiPointResult(float("nan"), margin, False, side, terms)
    ok_lhs = lhs <= tol if side.startswith("hinf") else lhs >= -tol
    return HjiPointResult(float(lhs), margin, bool(ok_lhs and margin > 0), side, terms)


def eval_hinf_hji(plant: NonlinearPlant, V: QuadraticStorage, params: HjiParams, eta, tol=0.0) -> HjiPointResult:
    """H-infinity inequality and its inner-matrix condition at ``eta``."""
    eta = np.asarray(eta, dtype=float)
    mp = plant.maps(eta)
    Vx, Vxx = V.gradient(eta), V.hessian()
    f1, f2, g1, g2 = mp["f1"], mp["f2"], mp["g1"], mp["g2"]
    nv = g1.shape[1]
    inner = 0.5 * g2.T @ Vxx @ g2 + ((1 + 1 / params.eps1) * spectral_norm(mp["s_m"]) ** 2 - params.gamma**2) * np.eye(nv)
    inner = 0.5 * (inner + inner.T)
    margin = float(-np.linalg.eigvalsh(inner)[-1])
    K = 0.5 * g2.T @ Vxx @ f2 + 0.5 * g1.T @ Vx
    terms = {
        "output": (1 + params.eps1) * float(mp["s_dl"] @ mp["s_dl"]),
        "c3": params.c3 * float(eta @ eta),
        "drift": float(Vx @ f1),
        "diffusion": 0.5 * float(f2 @ Vxx @ f2),
    }
    return _result("hinf", terms, _schur(K, inner), margin, tol)


def eval_special_hinf(plant: NonlinearPlant, V: QuadraticStorage, params: HjiParams, eta, tol=0.0) -> HjiPointResult:
    """H-infinity inequality for plants with ``m = 0`` and ``g2 = 0``.

    The Schur term collapses to ``+1/4 gamma^-2 |g1~' V_eta|^2`` and the inner
    condition holds trivially (margin ``gamma^2``).
    """
    eta = np.asarray(eta, dtype=float)
    mp = plant.maps(eta)
    Vx, Vxx = V.gradient(eta), V.hessian()
    u = mp["g1"].T @ Vx
    terms = {
        "output": (1 + params.eps1) * float(mp["s_dl"] @ mp["s_dl"]),
        "c3": params.c3 * float(eta @ eta),
        "drift": float(Vx @ mp["f1"]),
        "diffusion": 0.5 * float(mp["f2"] @ Vxx @ mp["f2"]),
        "disturbance": 0.25 / params.gamma**2 * float(u @ u),
    }
    return _result("hinf_special", terms, 0.0, params.gamma**2, tol)


def _hminus(plant, V, params, eta, with_h2, out_map, tol):
    eta = np.asarray(eta, dtype=float)
    mp = plant.maps(eta)
    Vx, Vxx = V.gradient(eta), V.hessian()
    f1, f2, h1, h2 = mp["f1"], mp["f2"], mp["h1"], mp["h2"]
    nf = h1.shape[1]
    gain = spectral_norm(mp["s_n"] if out_map == "n" else mp["s_m"]) ** 2
    inner = ((1 - 1 / params.eps2) * gain - params.delta**2) * np.eye(nf)
    if with_h2:
        inner = inner - 0.5 * h2.T @ Vxx @ h2
        K = 0.5 * h2.T @ Vxx @ f2 + 0.5 * h1.T @ Vx
        schur_scale = 1.0
    else:
        K = h1.T @ Vx
        schur_scale = params.hminus_schur
    inner = 0.5 * (inner + inner.T)
    margin = float(np.linalg.eigvalsh(inner)[0])
    terms = {
        "output": (1 - params.eps2) * float(mp["s_dl"] @ mp["s_dl"]),
        "drift": -float(Vx @ f1),
        "diffusion": -0.5 * float(f2 @ Vxx @ f2),
    }
    return _result("hminus", terms, schur_scale * _schur(K, inner), margin, tol)


def eval_hminus_hji(plant: NonlinearPlant, V: QuadraticStorage, params: HjiParams, eta, tol=0.0,
                    out_map: str = "n") -> HjiPointResult:
    """H- inequality for plants without fault-dependent noise.

    Any ``h2`` attached to the plant is ignored here; use ``eval_xvf_hjis``
    for the fault-noise form. ``out_map="m"`` evaluates the inner matrix with
    ``|s m|`` in place of ``|s n|``.
    """
    return _hminus(plant, V, params, eta, False, out_map, tol)


def eval_xvf_hjis(plant: NonlinearPlant, V1: QuadraticStorage, V2: QuadraticStorage, params: HjiParams,
                  eta, tol=0.0):
    """Both inequalities for the state/disturbance/fault-dependent-noise plant.

    Returns ``(hinf_result, hminus_result)``; the H- side includes the
    ``h2`` fault-noise channel in both the cross term and the inner matrix.
    """
    return eval_hinf_hji(plant, V1, params, eta, tol), _hminus(plant, V2, params, eta, True, "n", tol)


# --------------------------------------------------------------------------
# scanning


@dataclass(frozen=True)
class ScanProbe:
    """Scrambled-Sobol samples in the ball of ``radius`` plus points on each axis."""

    radius: float = 3.0
    ball_samples: int = 2000
    axis_points: int = 13
    seed: int = 0

    def points(self, n) -> np.ndarray:
        pts = []
        if self.ball_samples > 0:
            pts.append(ball_samples(n, self.ball_samples, self.radius, self.seed))
        if self.axis_points > 0:
            vals = np.linspace(-self.radius, self.radius, self.axis_points)
            vals = vals[vals != 0]
            for i in range(n):
                A = np.zeros((len(vals), n))
                A[:, i] = vals
                pts.append(A)
        if not pts:
            raise EmptyProbe("scan probe has no points")
        return np.vstack(pts)

    def to_dict(self):
        return {"radius": self.radius, "ball_samples": self.ball_samples,
                "axis_points": self.axis_points, "seed": self.seed}


@dataclass
class ScanReport:
    """Outcome of a scan: "no violation found on the probe set", never a proof."""

    side: str
    worst_point: np.ndarray
    worst_lhs: float
    worst_inner_point: np.ndarray
    worst_inner_margin: float
    fraction_satisfied: float
    sample_count: int
    sampling: dict

    @property
    def no_violation_found(self):
        return self.fraction_satisfied == 1.0

    def to_dict(self):
        return {
            "side": self.side,
            "worst_point": self.worst_point.tolist(),
            "worst_lhs": self.worst_lhs,
            "worst_inner_point": self.worst_inner_point.tolist(),
            "worst_inner_margin": self.worst_inner_margin,
            "fraction_satisfied": self.fraction_satisfied,
            "sample_count": self.sample_count,
            "sampling": self.sampling,
        }


SIDES = ("hinf", "hminus", "hminus_xvf", "hinf_special")


def scan(plant: NonlinearPlant, storages, params: HjiParams, probe: Optional[ScanProbe] = None,
         side: str = "hinf", points: Optional[np.ndarray] = None) -> ScanReport:
    """Evaluate one inequality over a probe set.

    ``storages`` is a single storage or a pair ``(V1, V2)``: the H-infinity
    sides use ``V1``, the H- sides ``V2``. Worst values are the largest LHS
    (H-infinity) or smallest LHS (H-) and the smallest inner margin; ties go
    to the lowest sample index. NaN LHS values (singular inner matrix) count
    as violations and are ranked worst.
    """
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    if isinstance(storages, QuadraticStorage):
        V1 = V2 = storages
    else:
        V1, V2 = storages
    probe = probe or ScanProbe()
    n_eta = V1.P.shape[0]
    X = probe.points(n_eta) if points is None else np.atleast_2d(np.asarray(points, dtype=float))
    if X.shape[0] == 0:
        raise EmptyProbe("no scan points")

    def one(eta):
        if side == "hinf":
            return eval_hinf_hji(plant, V1, params, eta)
        if side == "hinf_special":
            return eval_special_hinf(plant, V1, params, eta)
        if side == "hminus":
            return eval_hminus_hji(plant, V2, params, eta, out_map=params.special_inner)
        return eval_xvf_hjis(plant, V1, V2, params, eta)[1]

    res = [one(eta) for eta in X]
    lhs = np.array([r.lhs_value for r in res])
    margins = np.array([r.inner_matrix_margin for r in res])
    ok = np.array([r.satisfied for r in res])
    sign = 1.0 if side.startswith("hinf") else -1.0
    score = np.where(np.isnan(lhs), np.inf, sign * lhs)
    k = int(np.argmax(score))
    j = int(np.argmin(margins))
    return ScanReport(side, X[k].copy(), float(lhs[k]), X[j].copy(), float(margins[j]),
                      float(ok.mean()), int(len(X)), probe.to_dict() if points is None else {"explicit": len(X)})
