import numpy as np
import pytest

from mixfdf.catalog import benchmark_plant, reference_certificate
from mixfdf.errors import DimensionMismatch, EmptyProbe
from mixfdf.model import (FilterRealization, Nonlinearity, ProbeSpec, QuasiLinearModel, augment,
                          make_nonlinearity, verify_sector_bound)


def random_plant(rng, n=3, nv=2, nf=1, ny=2, F0="zero"):
    R = rng.standard_normal
    return QuasiLinearModel(A0=R((n, n)), A1=R((n, n)), A2=R((ny, n)), B0=R((n, nv)), B1=R((n, nv)),
                            B2=R((ny, nv)), C0=R((n, nf)), C1=R((n, nf)), C2=R((ny, nf)), F0=F0)


def random_filter(rng, n=3, ny=2, nr=2):
    R = rng.standard_normal
    return FilterRealization(R((n, n)), R((n, ny)), R((nr, ny)))


def published_filter():
    c = reference_certificate()
    from mixfdf.synthesis import recover_filter

    return recover_filter(c)


def test_augment_published_blocks():
    p = benchmark_plant()
    aug = augment(p, published_filter())
    assert np.array_equal(aug.At0[:2, :2], p.A0)
    assert np.array_equal(aug.At1, np.block([[p.A1, np.zeros((2, 2))], [np.zeros((2, 2)), np.zeros((2, 2))]]))
    assert np.array_equal(aug.Bt1, np.zeros((4, 1)))


def test_augment_passive_filter(rng):
    p = random_plant(rng)
    aug = augment(p, FilterRealization.passive(p.n, p.n_y))
    Z = np.zeros((p.n, p.n))
    assert np.array_equal(aug.At0, np.block([[p.A0, Z], [Z, Z]]))
    assert np.array_equal(aug.At2, np.hstack([p.A2, -p.A2]))


def test_augment_structure_and_determinism(rng):
    p, f = random_plant(rng), random_filter(rng)
    a, b = augment(p, f), augment(p, f)
    for k, M in a.blocks().items():
        assert np.array_equal(M, b.blocks()[k])
    n = p.n
    assert np.allclose(a.At0[n:, :n], f.B_hat @ p.A2)
    assert np.allclose(a.At0[n:, n:], f.A_hat - f.B_hat @ p.A2)
    assert np.allclose(a.Bt0[n:], f.B_hat @ p.B2)
    assert np.allclose(a.Ct0[n:], f.B_hat @ p.C2)
    assert np.allclose(a.Bt2, f.S_hat @ p.B2)
    assert np.allclose(a.Ct2, f.S_hat @ p.C2)
    assert np.array_equal(a.Ct1[n:], np.zeros((n, p.n_f)))


def test_augment_dimension_mismatch(rng):
    p = random_plant(rng)
    with pytest.raises(DimensionMismatch):
        augment(p, random_filter(rng, n=2))


def test_decoupled_spectrum(rng):
    for _ in range(20):
        p = random_plant(rng)
        f = FilterRealization(rng.standard_normal((3, 3)), np.zeros((3, 2)), np.eye(2))
        aug = augment(p, f)
        got = np.sort_complex(np.linalg.eigvals(aug.At0))
        want = np.sort_complex(np.concatenate([np.linalg.eigvals(p.A0), np.linalg.eigvals(f.A_hat)]))
        assert np.abs(got - want).max() < 1e-8


def test_lift_acts_on_plant_block(rng):
    p = random_plant(rng, F0={"name": "scaled_sin", "scale": 0.5})
    aug = augment(p, random_filter(rng))
    eta = rng.standard_normal((50, 6))
    F = aug.F0_tilde(eta)
    assert np.array_equal(F[:, 3:], np.zeros((50, 3)))
    assert np.allclose(np.linalg.norm(F, axis=1), np.linalg.norm(p.F0(eta[:, :3]), axis=1))


def test_sector_bound_examples():
    nl = make_nonlinearity({"name": "scaled_sin", "scale": 0.5}, 2)
    rep = verify_sector_bound(nl, 0.5, ProbeSpec(extent=10, grid_points=41))
    assert rep.ok and rep.max_ratio <= 0.5
    rep = verify_sector_bound(make_nonlinearity("zero", 2), 0.0)
    assert rep.ok and rep.max_ratio == 0.0
    double = Nonlinearity("double", 2, lambda x: 2 * x, 2.0)
    rep = verify_sector_bound(double, 1.0)
    assert not rep.ok and rep.max_ratio == pytest.approx(2.0)


def test_sector_probe_empty():
    nl = make_nonlinearity("zero", 1)
    with pytest.raises(EmptyProbe):
        verify_sector_bound(nl, 0.0, ProbeSpec(grid_points=0, ball_samples=0))


def test_registered_nonlinearities_vanish_at_zero():
    for spec in ("zero", "scaled_sin", {"name": "saturation", "limit": 0.3}, "tanh_scaled"):
        nl = make_nonlinearity(spec, 3)
        assert np.array_equal(nl(np.zeros(3)), np.zeros(3))
        assert verify_sector_bound(nl, nl.declared_alpha).ok


def test_plant_validation():
    with pytest.raises(DimensionMismatch):
        QuasiLinearModel(A0=np.eye(2), A1=np.eye(2), A2=np.ones((1, 3)), B0=np.ones(2), B1=np.ones(2),
                         B2=[[1.0]], C0=np.ones(2), C1=np.ones(2), C2=[[1.0]])
    p = benchmark_plant()
    assert (p.n, p.n_v, p.n_f, p.n_y) == (2, 1, 1, 2)
