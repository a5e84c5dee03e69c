import numpy as np
import pytest
from scipy.linalg import solve_continuous_lyapunov

from mixfdf import sdp
from mixfdf.errors import DimensionMismatch, Infeasible

from conftest import random_sym


def lyapunov_problem(A):
    n = A.shape[0]
    space = sdp.VariableSpace([sdp.symmetric("P", n)])
    lmis = [
        sdp.LmiConstraint.from_function("P_pos", lambda v: v["P"], space, "pos"),
        sdp.LmiConstraint.from_function("lyap", lambda v: A.T @ v["P"] + v["P"] @ A, space, "neg"),
    ]
    return lmis, space


def test_scalar_lmi_margin_equals_slack():
    space = sdp.VariableSpace([sdp.scalar("x")])
    con = sdp.LmiConstraint.from_function("x>1", lambda v: np.array([[v["x"] - 1.0]]), space, "pos")
    cert = sdp.solve_feasibility([con], space, sdp.SolverOptions(var_bound=10.0))
    x = cert.assignment["x"]
    assert x > 1
    assert cert.margins["x>1"] == pytest.approx(x - 1.0, abs=1e-9)


def test_lyapunov_identity():
    lmis, space = lyapunov_problem(-np.eye(2))
    cert = sdp.solve_feasibility(lmis, space)
    margins = sdp.check_assignment(lmis, space, cert.assignment)
    assert all(m >= 1e-6 for m in margins.values())
    P = cert.assignment["P"]
    assert margins["lyap"] == pytest.approx(2 * np.linalg.eigvalsh(P)[0], rel=1e-8)


def test_lyapunov_oracle_agreement():
    A = np.array([[-1.0, 2.0], [0.0, -3.0]])
    P_lyap = solve_continuous_lyapunov(A.T, -np.eye(2))
    lmis, space = lyapunov_problem(A)
    # the oracle's solution is itself feasible for the LMI system
    oracle = sdp.check_assignment(lmis, space, {"P": P_lyap})
    assert all(m > 0 for m in oracle.values())
    cert = sdp.solve_feasibility(lmis, space)
    assert all(m >= 1e-6 for m in cert.margins.values())


def test_lyapunov_unstable_infeasible():
    lmis, space = lyapunov_problem(np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(Infeasible) as ei:
        sdp.solve_feasibility(lmis, space)
    assert ei.value.best_margin < 1e-6


def test_check_assignment_boundary():
    space = sdp.VariableSpace([sdp.symmetric("P", 2)])
    con = sdp.LmiConstraint.from_function("P", lambda v: v["P"], space, "pos")
    assert sdp.check_assignment([con], space, space.zero())["P"] == 0.0
    with pytest.raises(DimensionMismatch):
        sdp.check_assignment([con], space, {"Q": np.eye(2)})


def random_constraints(rng, N=4, m=3, k=3):
    space = sdp.VariableSpace([sdp.rectangular("x", N, 1)])
    lmis = []
    for j in range(k):
        F0 = random_sym(rng, m)
        Fi = np.stack([random_sym(rng, m) for _ in range(N)])
        lmis.append(sdp.LmiConstraint(f"c{j}", F0, Fi, rng.choice(["neg", "pos"])))
    return lmis, space


def test_scaling_property(rng):
    for _ in range(20):
        lmis, space = random_constraints(rng)
        x = rng.standard_normal(space.size)
        s = rng.uniform(0.1, 10)
        base = sdp.check_assignment(lmis, space, x)
        scaled = sdp.check_assignment([c.scaled(s) for c in lmis], space, x)
        for k in base:
            assert scaled[k] == pytest.approx(s * base[k], rel=1e-12, abs=1e-12)


def test_affinity_spot_check_rejects_nonlinear():
    space = sdp.VariableSpace([sdp.scalar("x")])
    with pytest.raises(ValueError):
        sdp.LmiConstraint.from_function("sq", lambda v: np.array([[v["x"] ** 2]]), space, "pos")


def test_soundness_and_determinism(rng):
    A = np.array([[-2.0, 1.0, 0.0], [0.0, -1.0, 3.0], [0.0, 0.0, -0.5]])
    lmis, space = lyapunov_problem(A)
    c1 = sdp.solve_feasibility(lmis, space)
    c2 = sdp.solve_feasibility(lmis, space)
    recheck = sdp.check_assignment(lmis, space, c1.assignment)
    assert all(m >= 1e-6 - 1e-9 for m in recheck.values())
    for k in recheck:
        assert abs(recheck[k] - c1.margins[k]) <= 1e-8
    assert np.array_equal(c1.assignment["P"], c2.assignment["P"])
    assert c1.t_star == c2.t_star


def test_pack_unpack_round_trip(rng):
    space = sdp.VariableSpace([sdp.scalar("b"), sdp.symmetric("P", 3), sdp.rectangular("K", 2, 3)])
    x = rng.standard_normal(space.size)
    assert np.array_equal(space.pack(space.unpack(x)), x)
    with pytest.raises(ValueError):
        sdp.VariableSpace([sdp.scalar("a"), sdp.scalar("a")])
