import math

import numpy as np
import pytest

from pnpch.errors import AmplitudeTooLarge, LineOffGrid, NotSymmetric
from pnpch.grid_ops import PeriodicGrid, mean
from pnpch.model import (GaussianPair, LinePair, PhysicalInputs, RandomInit, SampledCharge, SpeciesSet, UniformInit,
                         ZeroCharge, check_neutrality, make_fixed_charge, make_initial_condition,
                         nondimensionalize, split_steric)

BINARY = SpeciesSet((1, -1), (0.304, 0.304), (0.01, 0.01))


def test_nondimensionalize_reference_values():
    nd = nondimensionalize(PhysicalInputs())
    assert nd.debye_length == pytest.approx(0.304, abs=5e-4)
    assert nd.kappa == pytest.approx(0.185, abs=5e-4)
    assert nd.epsilon[0] == pytest.approx(0.304, abs=5e-4)
    assert nd.epsilon[0] == nd.epsilon[1]
    assert nd.kappa == pytest.approx(2 * nd.debye_length**2, rel=1e-14)


def test_nondimensionalize_length_scaling():
    a = nondimensionalize(PhysicalInputs(L=1.0))
    b = nondimensionalize(PhysicalInputs(L=2.0))
    assert b.kappa == pytest.approx(a.kappa / 4, rel=1e-14)
    assert b.epsilon[0] == pytest.approx(a.epsilon[0] / 2, rel=1e-14)


def test_species_validation():
    with pytest.raises(ValueError):
        SpeciesSet((1,), (0.0,), (0.0,))
    with pytest.raises(ValueError):
        SpeciesSet((1,), (1.0,), (-0.1,))
    with pytest.raises(ValueError):
        SpeciesSet((1, -1), (1.0,), (0.0, 0.0))


def rayleigh_min(A, rng, samples=4000):
    v = rng.standard_normal((samples, A.shape[0]))
    return float(np.min(np.einsum("ij,jk,ik->i", v, A, v) / np.einsum("ij,ij->i", v, v)))


def test_split_psd_matrix(rng):
    s = split_steric([[2, 1], [1, 2]])
    assert s.lam == 0.0
    np.testing.assert_array_equal(s.Gc, [[2, 1], [1, 2]])
    np.testing.assert_array_equal(s.Ge, 0.0)


def test_split_nonconvex_matrix(rng):
    s = split_steric([[3.6, 2.6], [2.6, 0.2]])
    assert s.lam == pytest.approx(math.sqrt(9.65) - 1.9, abs=1e-12)
    np.testing.assert_allclose(s.Gc - s.Ge, s.G, rtol=0, atol=4 * np.finfo(float).eps * 3.6)
    assert rayleigh_min(s.Gc, rng) >= -1e-12
    assert np.linalg.eigvalsh(s.Gc).min() >= -1e-12 * np.abs(s.G).max()


def test_split_zero_and_general(rng):
    s = split_steric(np.zeros((2, 2)))
    assert s.lam == 0.0 and not s.Gc.any() and not s.Ge.any()
    B = rng.standard_normal((5, 5))
    G = B + B.T
    s = split_steric(G)
    assert s.lam == pytest.approx(-np.linalg.eigvalsh(G).min(), rel=1e-12)
    assert rayleigh_min(s.Gc, rng) >= -1e-12 * np.abs(G).max()
    np.testing.assert_allclose(s.Gc - s.Ge, G, rtol=0, atol=8 * np.finfo(float).eps * np.abs(G).max())


def test_split_rejects_asymmetric():
    with pytest.raises(NotSymmetric):
        split_steric([[1.0, 2.0], [2.1, 1.0]])


def test_neutrality():
    g = PeriodicGrid(1, 100, -1.0, 1.0)
    ones = [g.full(1.0), g.full(1.0)]
    assert check_neutrality(BINARY, ones, g.zeros(), g) == (True, 0.0)
    rho = make_fixed_charge(GaussianPair(), g)
    ok, r = check_neutrality(BINARY, ones, rho, g)
    assert ok and abs(r) < 1e-14
    ok, r = check_neutrality(BINARY, [g.full(1.1), g.full(1.0)], g.zeros(), g)
    assert not ok and r == pytest.approx(0.1, rel=1e-12)


def test_neutrality_is_linear(rng):
    g = PeriodicGrid(2, 6, 0.0, 1.0)
    c = [rng.uniform(0.5, 1.5, g.shape) for _ in range(2)]
    rho = rng.standard_normal(g.shape)
    r1 = check_neutrality(BINARY, c, rho, g).residual
    r2 = check_neutrality(BINARY, [2 * x for x in c], 2 * rho, g).residual
    assert r2 == pytest.approx(2 * r1, rel=1e-12, abs=1e-14)


def test_gaussian_pair_matches_formula():
    g = PeriodicGrid(1, 100, -1.0, 1.0)
    x = g.centers
    ref = 5 * (np.exp(-5 * (x - 0.5) ** 2) - np.exp(-5 * (x + 0.5) ** 2))
    rho = make_fixed_charge(GaussianPair(), g)
    np.testing.assert_allclose(rho, ref, atol=1e-15)
    assert abs(mean(rho, g)) <= 1e-13 * np.abs(rho).max()


def test_line_pair_deposit():
    g = PeriodicGrid(1, 60, -3.0, 3.0)
    rho = make_fixed_charge(LinePair(0.5, -1.5, 1.5), g)
    i_neg, i_pos = np.flatnonzero(rho < 0), np.flatnonzero(rho > 0)
    assert len(i_neg) == 1 and len(i_pos) == 1
    assert rho[i_neg[0]] == pytest.approx(-5.0) and rho[i_pos[0]] == pytest.approx(5.0)
    assert g.centers[i_neg[0]] == pytest.approx(-1.55) or g.centers[i_neg[0]] == pytest.approx(-1.45)
    assert mean(rho, g) == 0.0
    # discrete integral across x equals the surface density
    assert g.h * rho[i_pos[0]] == pytest.approx(0.5)


def test_line_pair_tie_takes_smaller_coordinate():
    g = PeriodicGrid(2, 64, -3.0, 3.0)
    rho = make_fixed_charge(LinePair(0.5, -1.5, 1.5), g)
    neg_cols = np.flatnonzero(rho[:, 0] < 0)
    pos_cols = np.flatnonzero(rho[:, 0] > 0)
    assert g.centers[neg_cols[0]] < -1.5 and g.centers[pos_cols[0]] < 1.5
    assert np.all(rho[neg_cols[0], :] == rho[neg_cols[0], 0])
    assert mean(rho, g) == 0.0


def test_line_pair_collision():
    g = PeriodicGrid(1, 4, -3.0, 3.0)
    with pytest.raises(LineOffGrid):
        make_fixed_charge(LinePair(0.5, -0.8, -0.7), g)


def test_zero_and_sampled_charge():
    g = PeriodicGrid(2, 4, 0.0, 1.0)
    assert not make_fixed_charge(ZeroCharge(), g).any()
    vals = np.arange(16.0)
    np.testing.assert_array_equal(make_fixed_charge(SampledCharge(vals), g), vals.reshape(4, 4))


def test_initial_conditions():
    g = PeriodicGrid(2, 16, 0.0, 1.0)
    u = make_initial_condition(UniformInit((1.0, 1.0)), g, BINARY)
    assert all(np.all(f == 1.0) for f in u)
    spec = RandomInit((1.0, 1.0), 0.1, seed=3)
    a = make_initial_condition(spec, g, BINARY)
    b = make_initial_condition(spec, g, BINARY)
    for fa, fb in zip(a, b):
        np.testing.assert_array_equal(fa, fb)
        assert mean(fa, g) == pytest.approx(1.0, abs=1e-14)
        assert fa.min() > 0.9 - 1e-14
        assert fa.max() < 1.1 + 1e-14
    assert not np.array_equal(a[0], a[1])
    with pytest.raises(AmplitudeTooLarge):
        make_initial_condition(RandomInit((1.0, 1.0), 1.0), g, BINARY)
