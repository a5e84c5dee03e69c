"""Generic LMI feasibility engine.

Constraints are symmetric matrices affine in a flat decision vector ``x``::

    F(x) = F0 + sum_i x_i F_i

Feasibility is posed as the epigraph problem

    maximize t  subject to  adj_k(F_k(x)) >= t I  for all k,  |x_i| <= R

where ``adj_k`` maps each constraint to "should be positive definite" form
(``-F`` for ``neg``, ``F`` for ``pos``, ``bound - F`` for ``le``). The box
``R`` keeps homogeneous problems (e.g. Lyapunov LMIs) bounded. The problem is
solved by the CVXOPT primal-dual interior-point SDP solver, which is
deterministic for fixed input.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, Infeasible, IterationLimit
from .linalg import as_sym

log = logging.getLogger(__name__)

SENSES = ("neg", "pos", "le")
NONSTRICT_TOL = 1e-9


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "scalar" | "symmetric" | "rectangular"
    shape: tuple = ()

    @property
    def size(self):
        if self.kind == "scalar":
            return 1
        if self.kind == "symmetric":
            d = self.shape[0]
            return d * (d + 1) // 2
        return self.shape[0] * self.shape[1]


def scalar(name):
    return Variable(name, "scalar", ())


def symmetric(name, d):
    return Variable(name, "symmetric", (int(d), int(d)))


def rectangular(name, rows, cols):
    return Variable(name, "rectangular", (int(rows), int(cols)))


class VariableSpace:
    """Ordered decision variables and their flat parameterization.

    Symmetric variables are parameterized by their upper triangle, row by row.
    """

    def __init__(self, variables: Sequence[Variable]):
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names in {names}")
        self.variables = tuple(variables)
        self._offsets = {}
        k = 0
        for v in self.variables:
            self._offsets[v.name] = k
            k += v.size
        self.size = k
        if self.size < 1:
            raise ValueError("variable space is empty")

    def __iter__(self):
        return iter(self.variables)

    def __getitem__(self, name):
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def slice(self, name):
        o = self._offsets[name]
        return slice(o, o + self[name].size)

    def unpack(self, x) -> Dict[str, np.ndarray]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.size,):
            raise DimensionMismatch(f"expected vector of length {self.size}, got {x.shape}")
        out = {}
        for v in self.variables:
            seg = x[self.slice(v.name)]
            if v.kind == "scalar":
                out[v.name] = float(seg[0])
            elif v.kind == "symmetric":
                d = v.shape[0]
                M = np.zeros((d, d))
                M[np.triu_indices(d)] = seg
                out[v.name] = M + np.triu(M, 1).T
            else:
                out[v.name] = seg.reshape(v.shape).copy()
        return out

    def pack(self, values: Dict[str, object]) -> np.ndarray:
        x = np.zeros(self.size)
        missing = [v.name for v in self.variables if v.name not in values]
        if missing:
            raise DimensionMismatch(f"assignment missing variables {missing}")
        for v in self.variables:
            val = np.asarray(values[v.name], dtype=float)
            if v.kind == "scalar":
                if val.size != 1:
                    raise DimensionMismatch(f"{v.name}: expected scalar")
                x[self.slice(v.name)] = val.ravel()
            elif v.kind == "symmetric":
                val = as_sym(val, v.name)
                if val.shape != v.shape:
                    raise DimensionMismatch(f"{v.name}: expected {v.shape}, got {val.shape}")
                x[self.slice(v.name)] = val[np.triu_indices(v.shape[0])]
            else:
                if val.shape != v.shape:
                    raise DimensionMismatch(f"{v.name}: expected {v.shape}, got {val.shape}")
                x[self.slice(v.name)] = val.ravel()
        return x

    def zero(self):
        return self.unpack(np.zeros(self.size))


@dataclass(frozen=True, eq=False)
class LmiConstraint:
    """``F(x) = F0 + sum_i x_i F_i`` with a definiteness requirement.

    sense ``neg``: F(x) < 0; ``pos``: F(x) > 0; ``le``: F(x) <= bound.
    """

    name: str
    F0: np.ndarray
    Fi: np.ndarray  # (N, m, m)
    sense: str = "neg"
    bound: Optional[np.ndarray] = None
    strict: bool = True

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"unknown sense {self.sense!r}")
        m = self.F0.shape[0]
        if self.Fi.ndim != 3 or self.Fi.shape[1:] != (m, m):
            raise DimensionMismatch(f"{self.name}: coefficient blocks must be (N, {m}, {m})")
        if self.sense == "le":
            if self.bound is None:
                raise ValueError("sense 'le' needs a bound matrix")
            object.__setattr__(self, "bound", as_sym(self.bound, f"{self.name}.bound"))

    @property
    def dim(self):
        return self.F0.shape[0]

    @property
    def n_vars(self):
        return self.Fi.shape[0]

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_vars,):
            raise DimensionMismatch(f"{self.name}: assignment length {x.shape} != {self.n_vars}")
        return self.F0 + np.tensordot(x, self.Fi, axes=1)

    def _adjust(self, M):
        if self.sense == "neg":
            return -M
        if self.sense == "pos":
            return M
        return self.bound - M

    def adjusted(self, x) -> np.ndarray:
        """Sense-adjusted matrix, required to be positive (semi)definite."""
        return self._adjust(self.value(x))

    def margin(self, x) -> float:
        A = self.adjusted(x)
        return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])

    def scaled(self, s):
        """Constraint with the whole affine map multiplied by ``s``."""
        bound = None if self.bound is None else s * self.bound
        return LmiConstraint(self.name, s * self.F0, s * self.Fi, self.sense, bound, self.strict)

    @classmethod
    def from_function(cls, name, fn: Callable[[Dict[str, np.ndarray]], np.ndarray],
                      space: VariableSpace, sense="neg", bound=None, strict=True, check=True,
                      sym_tol=1e-12):
        """Extract the affine coefficients of ``fn`` by probing unit assignments.

        ``fn`` receives a dict of variable values and must return a symmetric
        matrix that is affine in them. With ``check`` the affine property is
        spot-checked on random assignments.
        """
        N = space.size
        F0 = np.asarray(fn(space.unpack(np.zeros(N))), dtype=float)
        _check_symmetric(name, F0, sym_tol)
        Fi = np.empty((N,) + F0.shape)
        for i in range(N):
            e = np.zeros(N)
            e[i] = 1.0
            Mi = np.asarray(fn(space.unpack(e)), dtype=float)
            _check_symmetric(name, Mi, sym_tol)
            Fi[i] = Mi - F0
        con = cls(name, 0.5 * (F0 + F0.T), 0.5 * (Fi + Fi.transpose(0, 2, 1)), sense, bound, strict)
        if check:
            rng = np.random.default_rng(12345)
            a, b = rng.standard_normal(N), rng.standard_normal(N)
            lhs = np.asarray(fn(space.unpack(a + b)), dtype=float) - fn(space.unpack(a)) - fn(space.unpack(b)) + F0
            scale = 1.0 + np.max(np.abs(Fi)) * (np.abs(a).sum() + np.abs(b).sum())
            if np.max(np.abs(lhs)) > 1e-9 * scale:
                raise ValueError(f"{name}: map is not affine in the decision variables")
        return con


def _check_symmetric(name, M, tol):
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name}: block matrix is not square {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > tol * scale:
        raise ValueError(f"{name}: assembled matrix is not symmetric")


@dataclass
class SolverOptions:
    min_margin: float = 1e-6
    max_iter: int = 50_000
    var_bound: float = 100.0
    tol: float = 1e-8
    seed: int = 0


@dataclass
class FeasibilityCertificate:
    assignment: Dict[str, object]
    margins: Dict[str, float]
    t_star: float
    status: str = "optimal"
    iterations: int = 0
    names: List[str] = field(default_factory=list)

    def to_dict(self):
        return {
            "assignment": {k: np.asarray(v).tolist() for k, v in self.assignment.items()},
            "margins": dict(self.margins),
            "t_star": self.t_star,
            "status": self.status,
            "iterations": self.iterations,
        }


def check_assignment(lmis: Sequence[LmiConstraint], space: VariableSpace, assignment, tol=0.0) -> Dict[str, float]:
    """Sense-adjusted minimum eigenvalue of every constraint at ``assignment``.

    ``assignment`` may be a dict of variable values or a flat vector.
    """
    x = space.pack(assignment) if isinstance(assignment, dict) else np.asarray(assignment, dtype=float)
    if x.shape != (space.size,):
        raise DimensionMismatch(f"assignment has length {x.shape}, space has {space.size}")
    out = {}
    for con in lmis:
        if con.n_vars != space.size:
            raise DimensionMismatch(f"{con.name}: built for {con.n_vars} variables, space has {space.size}")
        out[con.name] = con.margin(x)
    return out


def solve_feasibility(lmis: Sequence[LmiConstraint], space: VariableSpace,
                      opts: Optional[SolverOptions] = None) -> FeasibilityCertificate:
    """Maximize the minimal strictness margin over all constraints.

    Raises :class:`Infeasible` when the best margin is below
    ``opts.min_margin`` and :class:`IterationLimit` when the solver stops
    without converging and without a usable certificate.
    """
    import cvxopt
    from cvxopt import matrix, solvers

    opts = opts or SolverOptions()
    N = space.size
    for con in lmis:
        if con.n_vars != N:
            raise DimensionMismatch(f"{con.name}: built for {con.n_vars} variables, space has {N}")

    # z = [x, t]; cvxopt form: h - sum z_j G_j >= 0
    Gs, hs = [], []
    for con in lmis:
        m = con.dim
        if con.sense == "neg":
            S0, Si = -con.F0, -con.Fi
        elif con.sense == "pos":
            S0, Si = con.F0, con.Fi
        else:
            S0, Si = con.bound - con.F0, -con.Fi
        # adj(x) - t I >= 0  ->  h = S0, G_x = -S_i, G_t = I (no t for non-strict)
        cols = [(-Si[i]).ravel(order="F") for i in range(N)]
        cols.append((np.eye(m) if con.strict else np.zeros((m, m))).ravel(order="F"))
        Gs.append(matrix(np.column_stack(cols)))
        hs.append(matrix(np.array(S0)))
    R = float(opts.var_bound)
    Gl = np.zeros((2 * N, N + 1))
    Gl[:N, :N] = np.eye(N)
    Gl[N:, :N] = -np.eye(N)
    hl = np.full(2 * N, R)
    c = np.zeros(N + 1)
    c[-1] = -1.0

    solvers.options.clear()
    solvers.options.update({
        "show_progress": False,
        "maxiters": int(min(opts.max_iter, 500)),
        "abstol": opts.tol,
        "reltol": opts.tol,
        "feastol": opts.tol,
    })
    try:
        sol = solvers.sdp(matrix(c), Gl=matrix(Gl), hl=matrix(hl), Gs=Gs, hs=hs)
    except (ArithmeticError, ValueError) as exc:
        raise IterationLimit(f"interior-point solver failed: {exc}", {"error": str(exc)}) from None
    finally:
        solvers.options.clear()
    status = sol["status"]
    if sol["x"] is None:
        raise IterationLimit(f"solver returned no point (status {status})", {"status": status})
    z = np.array(sol["x"]).ravel()
    x = z[:N]
    margins = check_assignment(lmis, space, x)
    strict = [margins[c.name] for c in lmis if c.strict]
    t_star = min(strict) if strict else float("inf")
    slack = [margins[c.name] for c in lmis if not c.strict]
    if slack and min(slack) < -NONSTRICT_TOL * (1.0 + R):
        t_star = min(t_star, min(slack))
    iters = int(sol.get("iterations", 0))
    log.info("sdp: status=%s iterations=%d t=%.6g gap=%s", status, iters, t_star, sol.get("gap"))
    cert = FeasibilityCertificate(space.unpack(x), margins, t_star, status, iters, [c.name for c in lmis])
    if t_star >= opts.min_margin:
        return cert
    if status != "optimal":
        raise IterationLimit(
            f"no convergence (status {status}) and best margin {t_star:.3e} < {opts.min_margin:.1e}",
            {"status": status, "t_star": t_star, "iterations": iters, "certificate": cert},
        )
    raise Infeasible(f"best margin {t_star:.3e} below required {opts.min_margin:.1e}", t_star, cert)
