"""LMI synthesis of mixed H-/H-infinity fault detection filters.

Decision variables (with ``P = diag(P1, P2)``)::

    P1, P2 (symmetric n x n), beta (scalar), A_check (n x n),
    B_check (n x n_y), S_check (symmetric n_y x n_y)

The filter is recovered as ``S_hat = S_check^(1/2)``,
``A_hat = P2^-1 A_check`` and ``B_hat = P2^-1 B_check``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from sklearn.base import BaseEstimator

from . import sdp
from .errors import DimensionMismatch, Infeasible, InvalidMatrix, NotPsd, SectorBoundUnverified
from .linalg import as_sym, block_diag, solve_linear, spectral_norm, sym_sqrt
from .model import AugmentedModel, FilterRealization, ProbeSpec, QuasiLinearModel, augment, verify_sector_bound

log = logging.getLogger(__name__)

LMI_NAMES = ("P_bounds", "gamma_lmi", "delta_lmi")


@dataclass(frozen=True, eq=False)
class SynthesisSpec:
    plant: QuasiLinearModel
    gamma: float
    delta: float

    def __post_init__(self):
        if not (self.gamma > 0 and self.delta > 0):
            raise ValueError("gamma and delta must be positive")


# --------------------------------------------------------------------------
# block assembly


def _pencil(plant, gamma, delta, alpha, P, beta, PAt0, PBt0, PCt0, PAt1, PBt1, PCt1, At2tAt2, Bt2tBt2, Ct2tCt2):
    """The two 5x5-block matrices shared by the synthesis and analysis forms.

    Arguments are the already-multiplied blocks (``P At0`` etc.), so the same
    code serves the change-of-variables LMIs and the direct check.
    """
    ne = P.shape[0]
    nv = PBt0.shape[1]
    nf = PCt0.shape[1]
    common = PAt0.T + PAt0 + P + 4.0 * alpha**2 * beta * np.eye(ne)
    Zev, Zef, Zee = np.zeros((ne, nv)), np.zeros((ne, nf)), np.zeros((ne, ne))
    gam = np.block([
        [At2tAt2 + common, PBt0, PAt1.T, PAt1.T, Zee],
        [PBt0.T, -gamma**2 * np.eye(nv) + Bt2tBt2, Zev.T, PBt1.T, PBt1.T],
        [PAt1, Zev, -P, Zee, Zee],
        [PAt1, PBt1, Zee, -P, Zee],
        [Zee, PBt1, Zee, Zee, -P],
    ])
    dlt = np.block([
        [-At2tAt2 + common, PCt0, PAt1.T, PAt1.T, Zee],
        [PCt0.T, delta**2 * np.eye(nf) - Ct2tCt2, Zef.T, PCt1.T, PCt1.T],
        [PAt1, Zef, -P, Zee, Zee],
        [PAt1, PCt1, Zee, -P, Zee],
        [Zee, PCt1, Zee, Zee, -P],
    ])
    return gam, dlt


def variable_space(plant: QuasiLinearModel) -> sdp.VariableSpace:
    n, ny = plant.n, plant.n_y
    return sdp.VariableSpace([
        sdp.symmetric("P1", n),
        sdp.symmetric("P2", n),
        sdp.scalar("beta"),
        sdp.rectangular("A_check", n, n),
        sdp.rectangular("B_check", n, ny),
        sdp.symmetric("S_check", ny),
    ])


def synthesis_blocks(plant: QuasiLinearModel, values) -> Dict[str, np.ndarray]:
    """Change-of-variables blocks ``P At0, P Bt0, ..., At2'At2`` from raw variables."""
    n = plant.n
    P1, P2 = values["P1"], values["P2"]
    Ac, Bc, Sc = values["A_check"], values["B_check"], values["S_check"]
    A2 = plant.A2
    Z = np.zeros((n, n))
    W = A2.T @ Sc @ A2
    return {
        "P": block_diag(P1, P2),
        "A0": np.block([[P1 @ plant.A0, Z], [Bc @ A2, Ac - Bc @ A2]]),
        "B0": np.vstack([P1 @ plant.B0, Bc @ plant.B2]),
        "C0": np.vstack([P1 @ plant.C0, Bc @ plant.C2]),
        "A1": np.block([[P1 @ plant.A1, Z], [Z, Z]]),
        "B1": np.vstack([P1 @ plant.B1, np.zeros((n, plant.n_v))]),
        "C1": np.vstack([P1 @ plant.C1, np.zeros((n, plant.n_f))]),
        "A2": np.block([[W, -W], [-W, W]]),
        "B2": plant.B2.T @ Sc @ plant.B2,
        "C2": plant.C2.T @ Sc @ plant.C2,
    }


def synthesis_matrices(spec: SynthesisSpec, values):
    """Evaluate the three synthesis constraints at a variable assignment.

    Returns ``(P - beta I, gamma-matrix, delta-matrix)``.
    """
    plant = spec.plant
    b = synthesis_blocks(plant, values)
    beta = float(values["beta"])
    gam, dlt = _pencil(plant, spec.gamma, spec.delta, plant.alpha, b["P"], beta,
                       b["A0"], b["B0"], b["C0"], b["A1"], b["B1"], b["C1"], b["A2"], b["B2"], b["C2"])
    return b["P"], gam, dlt


def _balance(M, n_lead, n_mid, level):
    """Congruence ``T M T`` with ``T = diag(I, I/level, I)`` for ``level > 1``.

    Keeps large ``gamma`` or ``delta`` from dominating the conditioning; the
    scaling factor is at most one, so a margin of the balanced matrix bounds
    the margin of the original from below.
    """
    if level <= 1.0:
        return M
    d = np.ones(M.shape[0])
    d[n_lead:n_lead + n_mid] = 1.0 / level
    return M * np.outer(d, d)


def build_synthesis_lmis(spec: SynthesisSpec, probe: Optional[ProbeSpec] = None, verify_sector=True,
                        balanced=False):
    """Assemble the synthesis LMI system.

    Constraints (names in :data:`LMI_NAMES` plus two helpers):

    * ``P_pos``: ``diag(P1, P2) > 0``
    * ``P_bounds``: ``diag(P1, P2) <= beta I``
    * ``gamma_lmi`` / ``delta_lmi``: the two 5x5-block matrices ``< 0``
    * ``S_check_psd``: ``S_check >= 0`` (non-strict, needed for the square root)

    With ``balanced`` the two block LMIs are rescaled by a congruence before
    being handed to the solver; feasibility is unchanged.
    """
    plant = spec.plant
    if verify_sector:
        for label, nl in (("F0", plant.F0), ("F1", plant.F1)):
            rep = verify_sector_bound(nl, plant.alpha, probe)
            if not rep.ok:
                raise SectorBoundUnverified(
                    f"{label}={nl.name}: observed ratio {rep.max_ratio:.4g} exceeds alpha={plant.alpha:.4g} "
                    f"at x={np.array2string(rep.worst_x, precision=3)}"
                )
    space = variable_space(plant)
    ne = 2 * plant.n

    def p_only(v):
        return block_diag(v["P1"], v["P2"])

    def p_minus_beta(v):
        return block_diag(v["P1"], v["P2"]) - v["beta"] * np.eye(ne)

    gs = max(spec.gamma, 1.0) if balanced else 1.0
    ds = max(spec.delta, 1.0) if balanced else 1.0

    def gam_fn(v):
        return _balance(synthesis_matrices(spec, v)[1], ne, plant.n_v, gs)

    def dlt_fn(v):
        return _balance(synthesis_matrices(spec, v)[2], ne, plant.n_f, ds)

    lmis = [
        sdp.LmiConstraint.from_function("P_pos", p_only, space, "pos"),
        sdp.LmiConstraint.from_function("P_bounds", p_minus_beta, space, "le", bound=np.zeros((ne, ne))),
        sdp.LmiConstraint.from_function("gamma_lmi", gam_fn, space, "neg"),
        sdp.LmiConstraint.from_function("delta_lmi", dlt_fn, space, "neg"),
        sdp.LmiConstraint.from_function(
            "S_check_psd", lambda v: v["S_check"], space, "pos", strict=False),
    ]
    return lmis, space


def synthesis_margins(lmis, space, assignment) -> Dict[str, float]:
    """Per-LMI margins with ``P_pos`` and ``P_bounds`` merged into ``P_bounds``."""
    raw = sdp.check_assignment(lmis, space, assignment)
    out = {
        "P_bounds": min(raw["P_pos"], raw["P_bounds"]),
        "gamma_lmi": raw["gamma_lmi"],
        "delta_lmi": raw["delta_lmi"],
    }
    out["S_check_psd"] = raw["S_check_psd"]
    return out


# --------------------------------------------------------------------------
# synthesis


@dataclass
class SynthesisResult:
    filter: FilterRealization
    certificate: Dict[str, object]
    margins: Dict[str, float]
    t_star: float
    gamma: float
    delta: float
    recovery_error: Dict[str, float] = field(default_factory=dict)

    def to_dict(self):
        return {
            "gamma": self.gamma,
            "delta": self.delta,
            "filter": {
                "A_hat": self.filter.A_hat.tolist(),
                "B_hat": self.filter.B_hat.tolist(),
                "S_hat": self.filter.S_hat.tolist(),
            },
            "certificate": {k: np.asarray(v).tolist() for k, v in self.certificate.items()},
            "margins": dict(self.margins),
            "t_star": self.t_star,
            "recovery_error": dict(self.recovery_error),
        }


def recover_filter(certificate) -> FilterRealization:
    """Filter matrices from a synthesis certificate."""
    P2 = as_sym(certificate["P2"], "P2")
    S_hat = sym_sqrt(certificate["S_check"])
    A_hat = solve_linear(P2, certificate["A_check"])
    B_hat = solve_linear(P2, certificate["B_check"])
    return FilterRealization(A_hat, B_hat, S_hat)


def synthesize(spec: SynthesisSpec, opts: Optional[sdp.SolverOptions] = None,
               probe: Optional[ProbeSpec] = None) -> SynthesisResult:
    """Solve the synthesis LMIs and recover the filter.

    Raises :class:`Infeasible` if no assignment reaches ``opts.min_margin``.
    """
    lmis, space = build_synthesis_lmis(spec, probe)
    solve_lmis, _ = build_synthesis_lmis(spec, verify_sector=False, balanced=True)
    cert = sdp.solve_feasibility(solve_lmis, space, opts)
    values = cert.assignment
    try:
        filt = recover_filter(values)
    except NotPsd:
        raise
    P2 = values["P2"]
    S = filt.S_hat
    rec = {
        "S": float(np.linalg.norm(S.T @ S - values["S_check"])),
        "A": float(np.linalg.norm(P2 @ filt.A_hat - values["A_check"])),
        "B": float(np.linalg.norm(P2 @ filt.B_hat - values["B_check"])),
    }
    margins = synthesis_margins(lmis, space, values)
    log.info("synthesis gamma=%g delta=%g margins=%s", spec.gamma, spec.delta, margins)
    return SynthesisResult(filt, values, margins, cert.t_star, spec.gamma, spec.delta, rec)


# --------------------------------------------------------------------------
# analysis checks on a given augmented system


def analysis_matrices(aug: AugmentedModel, P, beta, alpha, gamma, delta):
    P = as_sym(P, "P")
    if P.shape != aug.At0.shape:
        raise DimensionMismatch(f"P must be {aug.At0.shape}, got {P.shape}")
    return _pencil(
        None, gamma, delta, alpha, P, float(beta),
        P @ aug.At0, P @ aug.Bt0, P @ aug.Ct0, P @ aug.At1, P @ aug.Bt1, P @ aug.Ct1,
        aug.At2.T @ aug.At2, aug.Bt2.T @ aug.Bt2, aug.Ct2.T @ aug.Ct2,
    )


def check_analysis(aug: AugmentedModel, P, beta, alpha, gamma, delta) -> Dict[str, float]:
    """Sense-adjusted margins of the three analysis matrix inequalities.

    ``P_bounds`` is ``min(lambda_min(P), lambda_min(beta I - P))``; the other
    two are ``lambda_min(-M)`` of the gamma and delta block matrices.
    """
    P = as_sym(P, "P")
    gam, dlt = analysis_matrices(aug, P, beta, alpha, gamma, delta)
    w = np.linalg.eigvalsh(P)
    return {
        "P_bounds": float(min(w[0], beta - w[-1])),
        "gamma_lmi": float(np.linalg.eigvalsh(-gam)[0]),
        "delta_lmi": float(np.linalg.eigvalsh(-dlt)[0]),
    }


@dataclass
class AriCheckInput:
    augmented: AugmentedModel
    P1: np.ndarray
    P2: np.ndarray
    eps1: float = 1.0
    eps2: float = 2.0
    c: Optional[float] = None
    gamma: float = 1.0
    delta: float = 0.5

    def __post_init__(self):
        self.P1 = as_sym(self.P1, "P1")
        self.P2 = as_sym(self.P2, "P2")
        ne = self.augmented.n_eta
        if self.P1.shape != (ne, ne) or self.P2.shape != (ne, ne):
            raise DimensionMismatch(f"P1, P2 must be {ne}x{ne}")
        if self.eps1 <= 0 or self.eps2 <= 0:
            raise ValueError("eps1, eps2 must be positive")
        if self.eps2 <= 1:
            warnings.warn(
                f"eps2={self.eps2} <= 1: the delta inner matrix (1 - 1/eps2)|S C2|^2 I - delta^2 I "
                "cannot be positive definite", stacklevel=2)


@dataclass
class AriMargins:
    R1: Optional[np.ndarray]
    R2: Optional[np.ndarray]
    inner_gamma: np.ndarray
    inner_delta: np.ndarray
    margins: Dict[str, float]
    inner_violation: Dict[str, bool]

    @property
    def satisfied(self):
        return all(v > 0 for v in self.margins.values() if np.isfinite(v)) and not any(self.inner_violation.values())


def default_c(aug: AugmentedModel):
    return 1e-4 * spectral_norm(aug.At0)


def ari_matrices(inp: AriCheckInput):
    """Riccati-inequality matrices ``R1``, ``R2`` and their inner matrices.

    ``R1``/``R2`` are ``None`` when the inner matrix is singular. The norms
    ``|Bt2|``, ``|Ct2|`` (``Bt2 = S_hat B2`` already carries the residual
    weighting) are spectral norms.
    """
    a = inp.augmented
    P1, P2 = inp.P1, inp.P2
    c = default_c(a) if inp.c is None else inp.c
    W = a.At2.T @ a.At2
    nv, nf = a.n_v, a.n_f
    inner_g = a.Bt1.T @ P1 @ a.Bt1 + ((1 + 1 / inp.eps1) * spectral_norm(a.Bt2) ** 2 - inp.gamma**2) * np.eye(nv)
    inner_d = -a.Ct1.T @ P2 @ a.Ct1 + ((1 - 1 / inp.eps2) * spectral_norm(a.Ct2) ** 2 - inp.delta**2) * np.eye(nf)
    K1 = a.Bt1.T @ P1 @ a.At1 + a.Bt0.T @ P1
    K2 = a.Ct1.T @ P2 @ a.At1 + a.Ct0.T @ P2
    R1 = R2 = None
    try:
        R1 = ((1 + inp.eps1) * W + P1 @ a.At0 + a.At0.T @ P1 - K1.T @ np.linalg.solve(inner_g, K1)
              + a.At1.T @ P1 @ a.At1 + c * np.eye(a.n_eta))
        R1 = 0.5 * (R1 + R1.T)
    except np.linalg.LinAlgError:
        pass
    try:
        R2 = ((1 - inp.eps2) * W - P2 @ a.At0 - a.At0.T @ P2 - K2.T @ np.linalg.solve(inner_d, K2)
              - a.At1.T @ P2 @ a.At1)
        R2 = 0.5 * (R2 + R2.T)
    except np.linalg.LinAlgError:
        pass
    return R1, R2, 0.5 * (inner_g + inner_g.T), 0.5 * (inner_d + inner_d.T)


def check_ari(inp: AriCheckInput) -> AriMargins:
    """Four margins: ``-lambda_max(R1)``, ``-lambda_max(inner_gamma)``,
    ``lambda_min(R2)``, ``lambda_min(inner_delta)``; all must be positive
    (the ``R`` ones non-negative).

    A wrong-signed inner matrix is reported in ``inner_violation`` rather than
    raised; the Schur term is then not meaningful.
    """
    R1, R2, ig, idl = ari_matrices(inp)
    m_ig = float(-np.linalg.eigvalsh(ig)[-1])
    m_id = float(np.linalg.eigvalsh(idl)[0])
    margins = {
        "R1": float(-np.linalg.eigvalsh(R1)[-1]) if R1 is not None else float("nan"),
        "inner_gamma": m_ig,
        "R2": float(np.linalg.eigvalsh(R2)[0]) if R2 is not None else float("nan"),
        "inner_delta": m_id,
    }
    return AriMargins(R1, R2, ig, idl, margins, {"gamma": m_ig <= 0, "delta": m_id <= 0})


# --------------------------------------------------------------------------
# estimator front end


class MixedFdfSynthesizer(BaseEstimator):
    """Estimator-style wrapper: ``fit`` a plant, read the filter off ``filter_``.

    Parameters mirror the synthesis inputs. After ``fit``:
    ``filter_``, ``certificate_``, ``margins_``, ``t_star_``, ``result_``.
    """

    def __init__(self, gamma=1.0, delta=0.5, min_margin=1e-6, var_bound=100.0, tol=1e-8):
        self.gamma = gamma
        self.delta = delta
        self.min_margin = min_margin
        self.var_bound = var_bound
        self.tol = tol

    def fit(self, plant: QuasiLinearModel, y=None):
        if not isinstance(plant, QuasiLinearModel):
            raise InvalidMatrix("fit expects a QuasiLinearModel")
        opts = sdp.SolverOptions(min_margin=self.min_margin, var_bound=self.var_bound, tol=self.tol)
        res = synthesize(SynthesisSpec(plant, self.gamma, self.delta), opts)
        self.plant_ = plant
        self.result_ = res
        self.filter_ = res.filter
        self.certificate_ = res.certificate
        self.margins_ = res.margins
        self.t_star_ = res.t_star
        return self

    def augmented(self) -> AugmentedModel:
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self, "filter_")
        return augment(self.plant_, self.filter_)


__all__ = [
    "AriCheckInput", "AriMargins", "Infeasible", "LMI_NAMES", "MixedFdfSynthesizer", "SynthesisResult",
    "SynthesisSpec", "ari_matrices", "build_synthesis_lmis", "check_ari", "check_analysis", "default_c",
    "analysis_matrices", "recover_filter", "synthesize", "synthesis_blocks", "synthesis_margins", "variable_space",
]
