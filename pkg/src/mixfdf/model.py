"""Plant, filter and augmented-system data model.

The quasi-linear plant is

    dx = (A0 x + F0(x) + B0 v + C0 f) dt + (A1 x + F1(x) + B1 v + C1 f) dw
    y  = A2 x + B2 v + C2 f

observed by the Luenberger-type filter

    dxh = (Ah xh + Bh (y - A2 xh)) dt,     r = Sh (y - A2 xh).

Stacking ``eta = [x; xh]`` gives the augmented system built by :func:`augment`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, EmptyProbe, InvalidMatrix
from .linalg import as_matrix

# --------------------------------------------------------------------------
# nonlinearity registry


@dataclass(frozen=True)
class Nonlinearity:
    """Named sector-bounded map R^n -> R^n with F(0) = 0.

    ``fn`` must accept arrays of shape ``(..., n)`` and act row-wise.
    """

    name: str
    n: int
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    declared_alpha: float = 0.0
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))

    @property
    def is_zero(self):
        return self.name == "zero"

    def to_dict(self):
        return {"name": self.name, **self.params}


def _scale_vector(scale, n):
    s = np.broadcast_to(np.asarray(scale, dtype=float), (n,)).copy()
    if not np.all(np.isfinite(s)):
        raise InvalidMatrix("nonlinearity scale must be finite")
    return s


def _zero(n):
    return Nonlinearity("zero", n, lambda x: np.zeros_like(x), 0.0, {})


def _scaled_sin(n, scale=1.0):
    s = _scale_vector(scale, n)
    return Nonlinearity(
        "scaled_sin", n, lambda x: s * np.sin(x), float(np.max(np.abs(s))),
        {"scale": s.tolist()},
    )


def _saturation(n, scale=1.0, limit=1.0):
    s = _scale_vector(scale, n)
    lim = float(limit)
    if lim <= 0:
        raise InvalidMatrix("saturation limit must be positive")
    return Nonlinearity(
        "saturation", n, lambda x: s * np.clip(x, -lim, lim), float(np.max(np.abs(s))),
        {"scale": s.tolist(), "limit": lim},
    )


def _tanh_scaled(n, scale=1.0):
    s = _scale_vector(scale, n)
    return Nonlinearity(
        "tanh_scaled", n, lambda x: s * np.tanh(x), float(np.max(np.abs(s))),
        {"scale": s.tolist()},
    )


NONLINEARITIES = {
    "zero": _zero,
    "scaled_sin": _scaled_sin,
    "saturation": _saturation,
    "tanh_scaled": _tanh_scaled,
}


def make_nonlinearity(spec, n) -> Nonlinearity:
    """Build a registered nonlinearity from a name or ``{"name": ..., **params}``."""
    if spec is None:
        spec = "zero"
    if isinstance(spec, Nonlinearity):
        if spec.n != n:
            raise DimensionMismatch(f"nonlinearity {spec.name} has n={spec.n}, plant n={n}")
        return spec
    if isinstance(spec, str):
        name, params = spec, {}
    else:
        params = dict(spec)
        name = params.pop("name", None)
    if name not in NONLINEARITIES:
        raise KeyError(f"unknown nonlinearity {name!r}; known: {sorted(NONLINEARITIES)}")
    return NONLINEARITIES[name](n, **params)


# --------------------------------------------------------------------------
# sector-bound probing


@dataclass(frozen=True)
class ProbeSpec:
    """Sample set for sector-bound and HJI scans.

    A uniform axis grid on ``[-extent, extent]^n`` (only when
    ``grid_points ** n`` stays below ``max_grid``) plus ``ball_samples``
    points drawn uniformly in the ball of radius ``radius``.
    """

    extent: float = 10.0
    grid_points: int = 41
    radius: float = 10.0
    ball_samples: int = 2000
    seed: int = 0
    max_grid: int = 200_000

    def points(self, n) -> np.ndarray:
        chunks = []
        if self.grid_points > 0 and self.grid_points ** n <= self.max_grid:
            axis = np.linspace(-self.extent, self.extent, self.grid_points)
            mesh = np.meshgrid(*([axis] * n), indexing="ij")
            chunks.append(np.stack([m.ravel() for m in mesh], axis=1))
        if self.ball_samples > 0:
            chunks.append(ball_samples(n, self.ball_samples, self.radius, self.seed))
        if not chunks:
            raise EmptyProbe("probe defines no sample points")
        return np.concatenate(chunks, axis=0)


def ball_samples(n, count, radius, seed) -> np.ndarray:
    """Quasi-uniform points in the n-ball from a scrambled Sobol sequence."""
    from scipy.stats import qmc

    m = int(np.ceil(np.log2(max(count, 2))))
    u = qmc.Sobol(d=n + 1, scramble=True, seed=seed).random_base2(m)[:count]
    u = np.clip(u, 1e-12, 1 - 1e-12)
    from scipy.special import ndtri

    g = ndtri(u[:, :n])
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return radius * g * u[:, n:] ** (1.0 / n)


@dataclass(frozen=True)
class SectorReport:
    max_ratio: float
    worst_x: np.ndarray
    ok: bool
    sample_count: int


def verify_sector_bound(nl: Nonlinearity, alpha, probe: Optional[ProbeSpec] = None) -> SectorReport:
    """Largest observed ``|F(x)| / |x|`` over the probe set, compared with ``alpha``."""
    probe = probe or ProbeSpec()
    X = probe.points(nl.n)
    norms = np.linalg.norm(X, axis=1)
    X = X[norms > 0]
    if len(X) == 0:
        raise EmptyProbe("probe contains only the origin")
    F = nl(X)
    if not np.allclose(nl(np.zeros(nl.n)), 0.0):
        return SectorReport(np.inf, np.zeros(nl.n), False, len(X))
    ratios = np.linalg.norm(F, axis=1) / np.linalg.norm(X, axis=1)
    k = int(np.argmax(ratios))
    max_ratio = float(ratios[k])
    ok = max_ratio <= float(alpha) * (1 + 1e-12)
    return SectorReport(max_ratio, X[k].copy(), bool(ok), len(X))


# --------------------------------------------------------------------------
# plant / filter / augmented system


def _mat(M, name, shape=None):
    A = as_matrix(M, name)
    if shape is not None and A.shape != shape:
        raise DimensionMismatch(f"{name}: expected shape {shape}, got {A.shape}")
    return A


@dataclass(frozen=True, eq=False)
class QuasiLinearModel:
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    B0: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C0: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    F0: Nonlinearity = None
    F1: Nonlinearity = None
    alpha: float = 0.0

    def __post_init__(self):
        A0 = _mat(self.A0, "A0")
        n = A0.shape[0]
        if A0.shape != (n, n):
            raise DimensionMismatch(f"A0 must be square, got {A0.shape}")
        A2 = _mat(self.A2, "A2")
        ny = A2.shape[0]
        B0 = _mat(self.B0, "B0")
        nv = B0.shape[1]
        C0 = _mat(self.C0, "C0")
        nf = C0.shape[1]
        shapes = {
            "A0": (n, n), "A1": (n, n), "A2": (ny, n),
            "B0": (n, nv), "B1": (n, nv), "B2": (ny, nv),
            "C0": (n, nf), "C1": (n, nf), "C2": (ny, nf),
        }
        for key, shape in shapes.items():
            object.__setattr__(self, key, _mat(getattr(self, key), key, shape))
        object.__setattr__(self, "F0", make_nonlinearity(self.F0, n))
        object.__setattr__(self, "F1", make_nonlinearity(self.F1, n))
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise InvalidMatrix("alpha must be finite and >= 0")
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def n(self):
        return self.A0.shape[0]

    @property
    def n_v(self):
        return self.B0.shape[1]

    @property
    def n_f(self):
        return self.C0.shape[1]

    @property
    def n_y(self):
        return self.A2.shape[0]

    @property
    def is_linear(self):
        return self.F0.is_zero and self.F1.is_zero


@dataclass(frozen=True, eq=False)
class FilterRealization:
    A_hat: np.ndarray
    B_hat: np.ndarray
    S_hat: np.ndarray

    def __post_init__(self):
        Ah = _mat(self.A_hat, "A_hat")
        if Ah.shape[0] != Ah.shape[1]:
            raise DimensionMismatch(f"A_hat must be square, got {Ah.shape}")
        object.__setattr__(self, "A_hat", Ah)
        object.__setattr__(self, "B_hat", _mat(self.B_hat, "B_hat"))
        object.__setattr__(self, "S_hat", _mat(self.S_hat, "S_hat"))
        if self.B_hat.shape[0] != Ah.shape[0]:
            raise DimensionMismatch("B_hat rows must match A_hat")
        if self.S_hat.shape[1] != self.B_hat.shape[1]:
            raise DimensionMismatch("S_hat and B_hat disagree on the output dimension")

    @property
    def n_r(self):
        return self.S_hat.shape[0]

    @classmethod
    def passive(cls, n, n_y, n_r=None):
        """Filter with zero dynamics and identity residual weighting."""
        n_r = n_y if n_r is None else n_r
        return cls(np.zeros((n, n)), np.zeros((n, n_y)), np.eye(n_r, n_y))


@dataclass(frozen=True, eq=False)
class AugmentedModel:
    """Closed plant-filter system in ``eta = [x; xh]``.

    The nonlinearities act on the first ``n`` coordinates only; their lift to
    ``eta`` is zero in the filter block.
    """

    At0: np.ndarray
    At1: np.ndarray
    At2: np.ndarray
    Bt0: np.ndarray
    Bt1: np.ndarray
    Bt2: np.ndarray
    Ct0: np.ndarray
    Ct1: np.ndarray
    Ct2: np.ndarray
    F0: Nonlinearity
    F1: Nonlinearity
    n: int

    @property
    def n_eta(self):
        return self.At0.shape[0]

    @property
    def n_v(self):
        return self.Bt0.shape[1]

    @property
    def n_f(self):
        return self.Ct0.shape[1]

    @property
    def n_r(self):
        return self.At2.shape[0]

    def lift(self, nl: Nonlinearity, eta):
        """``F~(eta) = [F(x); 0]``, row-wise on ``(..., n_eta)`` arrays."""
        eta = np.asarray(eta, dtype=float)
        out = np.zeros_like(eta)
        if not nl.is_zero:
            out[..., : self.n] = nl(eta[..., : self.n])
        return out

    def F0_tilde(self, eta):
        return self.lift(self.F0, eta)

    def F1_tilde(self, eta):
        return self.lift(self.F1, eta)

    def output(self, eta, v, f):
        """Residual ``r = At2 eta + Bt2 v + Ct2 f`` (row-wise)."""
        return eta @ self.At2.T + v @ self.Bt2.T + f @ self.Ct2.T

    def blocks(self):
        return {k: getattr(self, k) for k in ("At0", "At1", "At2", "Bt0", "Bt1", "Bt2", "Ct0", "Ct1", "Ct2")}

    @classmethod
    def from_matrices(cls, At0, At1=None, At2=None, Bt0=None, Bt1=None, Bt2=None,
                      Ct0=None, Ct1=None, Ct2=None, n=None):
        """Direct construction, mostly for synthetic test systems.

        Missing blocks default to zeros of one-dimensional v, f and r.
        """
        At0 = as_matrix(At0, "At0")
        ne = At0.shape[0]

        def get(M, shape):
            return np.zeros(shape) if M is None else as_matrix(M)

        Bt0 = get(Bt0, (ne, 1))
        Ct0 = get(Ct0, (ne, 1))
        At2 = get(At2, (1, ne))
        nv, nf, nr = Bt0.shape[1], Ct0.shape[1], At2.shape[0]
        n = ne if n is None else n
        return cls(
            At0, get(At1, (ne, ne)), At2, Bt0, get(Bt1, (ne, nv)), get(Bt2, (nr, nv)),
            Ct0, get(Ct1, (ne, nf)), get(Ct2, (nr, nf)),
            _zero(n), _zero(n), n,
        )


def augment(plant: QuasiLinearModel, filt: FilterRealization) -> AugmentedModel:
    """Assemble the augmented plant-filter system."""
    n, ny = plant.n, plant.n_y
    Ah, Bh, Sh = filt.A_hat, filt.B_hat, filt.S_hat
    if Ah.shape != (n, n):
        raise DimensionMismatch(f"A_hat must be {n}x{n}, got {Ah.shape}")
    if Bh.shape != (n, ny):
        raise DimensionMismatch(f"B_hat must be {n}x{ny}, got {Bh.shape}")
    if Sh.shape[1] != ny:
        raise DimensionMismatch(f"S_hat must have {ny} columns, got {Sh.shape}")
    Z = np.zeros((n, n))
    A2 = plant.A2
    At0 = np.block([[plant.A0, Z], [Bh @ A2, Ah - Bh @ A2]])
    At1 = np.block([[plant.A1, Z], [Z, Z]])
    At2 = np.hstack([Sh @ A2, -Sh @ A2])
    Bt0 = np.vstack([plant.B0, Bh @ plant.B2])
    Bt1 = np.vstack([plant.B1, np.zeros((n, plant.n_v))])
    Ct0 = np.vstack([plant.C0, Bh @ plant.C2])
    Ct1 = np.vstack([plant.C1, np.zeros((n, plant.n_f))])
    return AugmentedModel(
        At0, At1, At2, Bt0, Bt1, Sh @ plant.B2, Ct0, Ct1, Sh @ plant.C2,
        plant.F0, plant.F1, n,
    )


# --------------------------------------------------------------------------
# general affine nonlinear plant (programmatic API only)


def _const(M):
    M = np.asarray(M, dtype=float)
    return lambda _: M


@dataclass(frozen=True, eq=False)
class NonlinearPlant:
    """Affine nonlinear Ito plant plus nonlinear filter functions.

    Plant: ``dx = (f1 + g1 v + h f) dt + (f2 + g2 v + h2 f) dw``,
    ``y = l + m v + n f``. Filter: ``dxh = (fh + hh (y - l(xh))) dt``,
    ``r = sh (y - l(xh))``. ``h2`` is the fault-to-noise channel of the
    (x, v, f)-dependent-noise variant and defaults to zero.
    All handles take a 1-D state and return arrays of fixed shape.
    """

    f1: Callable
    g1: Callable
    h: Callable
    f2: Callable
    g2: Callable
    l: Callable
    m: Callable
    nf: Callable
    f_hat: Callable
    h_hat: Callable
    s_hat: Callable
    n: int
    h2: Optional[Callable] = None

    def maps(self, eta):
        """Augmented drift/diffusion pieces and residual pieces at ``eta``."""
        eta = np.asarray(eta, dtype=float)
        x, xh = eta[: self.n], eta[self.n:]
        lx, lxh = np.atleast_1d(self.l(x)), np.atleast_1d(self.l(xh))
        hh = np.atleast_2d(self.h_hat(xh))
        sh = np.atleast_2d(self.s_hat(xh))
        mx = np.atleast_2d(self.m(x))
        nx = np.atleast_2d(self.nf(x))
        g1 = np.atleast_2d(self.g1(x))
        hx = np.atleast_2d(self.h(x))
        g2 = np.atleast_2d(self.g2(x))
        zn = np.zeros(self.n)
        h2 = np.zeros_like(hx) if self.h2 is None else np.atleast_2d(self.h2(x))
        return {
            "f1": np.concatenate([np.atleast_1d(self.f1(x)), np.atleast_1d(self.f_hat(xh)) + hh @ (lx - lxh)]),
            "g1": np.vstack([g1, hh @ mx]),
            "h1": np.vstack([hx, hh @ nx]),
            "f2": np.concatenate([np.atleast_1d(self.f2(x)), zn]),
            "g2": np.vstack([g2, np.zeros((self.n, g2.shape[1]))]),
            "h2": np.vstack([h2, np.zeros((self.n, h2.shape[1]))]),
            "s_dl": sh @ (lx - lxh),
            "s_m": sh @ mx,
            "s_n": sh @ nx,
        }

    @classmethod
    def from_linear(cls, plant: QuasiLinearModel, filt: FilterRealization, fault_noise=None):
        """Matrix plant and linear filter as function handles.

        ``fault_noise`` sets ``h2(x) = C1``-style fault noise; by default the
        plant's ``C1`` is used, which is the (x, v, f)-noise form of the linear
        system. Pass ``False`` to drop it.
        """
        if fault_noise is None:
            h2 = _const(plant.C1)
        elif fault_noise is False:
            h2 = None
        else:
            h2 = _const(fault_noise)
        A0, A1, A2 = plant.A0, plant.A1, plant.A2
        Ah = filt.A_hat
        return cls(
            f1=lambda x: A0 @ x + plant.F0(x),
            g1=_const(plant.B0),
            h=_const(plant.C0),
            f2=lambda x: A1 @ x + plant.F1(x),
            g2=_const(plant.B1),
            l=lambda x: A2 @ x,
            m=_const(plant.B2),
            nf=_const(plant.C2),
            f_hat=lambda xh: Ah @ xh,
            h_hat=_const(filt.B_hat),
            s_hat=_const(filt.S_hat),
            n=plant.n,
            h2=h2,
        )
