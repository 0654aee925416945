import math

import numpy as np
import pytest

from diractail.swsh import (ModeIndex, AngularGrid, AngularFunction,
                            AliasingError, eigenvalue_Lambda,
                            edth_coefficients, wigner_d, wigner_d_dtheta,
                            eval_harmonic, eval_harmonic_dtheta, edth,
                            edth_prime, edth_pointwise, edth_prime_pointwise,
                            teukolsky_angular, sphere_inner)

SPINS = (0.5, -0.5, 1.5, -1.5)


@pytest.fixture(scope="module")
def grid():
    return AngularGrid.build(ell_max=8)


def rand_band_limited(rng, s, m, grid, ell_lo=None):
    ells = grid.ells(s, m)
    if ell_lo is not None:
        ells = [l for l in ells if l >= ell_lo]
    c = rng.normal(size=len(ells)) + 1j * rng.normal(size=len(ells))
    samp = sum(ci * eval_harmonic(s, m, l, grid).samples for ci, l in zip(c, ells))
    return AngularFunction(s, m, samp, grid), dict(zip(ells, c))


def test_eigenvalue_lambda():
    assert eigenvalue_Lambda(0.5, 1) == 1.0
    assert eigenvalue_Lambda(-0.5, 1) == pytest.approx(0.0)
    assert eigenvalue_Lambda(0.5, 2) == 4.0


def test_edth_coefficients_spec_values():
    _, lower = edth_coefficients(0.5, 1)
    assert lower == pytest.approx(1.0)
    raise_, _ = edth_coefficients(-0.5, 1)
    assert raise_ == pytest.approx(-1.0)
    raise_, _ = edth_coefficients(-0.5, 3)
    assert raise_ == pytest.approx(-3.0)


def test_wigner_d_against_symbolic_table():
    # frozen reference values (symbolic rotation-matrix evaluation, beta=3/7)
    refs = [
        ((0.5, 0.5, 0.5), 0.97712853598545741019),
        ((0.5, -0.5, 0.5), 0.21264953365318406685),
        ((1.5, 0.5, -0.5), -0.39645114374599849485),
        ((2.5, -1.5, 0.5), 0.17333509461977944674),
        ((3.5, 0.5, 0.5), 0.40109539167006155145),
    ]
    for (j, a, b), ref in refs:
        assert float(wigner_d(j, a, b, 3.0 / 7.0)) == pytest.approx(ref, abs=1e-14)


def test_wigner_d_dtheta_is_exact_derivative():
    th = np.array([0.3, 1.1, 2.4])
    eps = 1e-6
    for (j, a, b) in [(0.5, -0.5, 0.5), (2.5, -0.5, 1.5), (3.5, 1.5, 0.5)]:
        num = (wigner_d(j, a, b, th + eps) - wigner_d(j, a, b, th - eps)) / (2 * eps)
        assert np.allclose(wigner_d_dtheta(j, a, b, th), num, atol=1e-9)


def test_harmonic_orthonormality(grid):
    f1 = eval_harmonic(0.5, 0.5, 1, grid)
    assert abs(sphere_inner(f1, f1) - 1.0) < 1e-12
    f2 = eval_harmonic(0.5, 0.5, 2, grid)
    assert abs(sphere_inner(f1, f2)) < 1e-12
    f3 = eval_harmonic(-1.5, 1.5, 4, grid)
    assert abs(sphere_inner(f3, f3) - 1.0) < 1e-12


@pytest.mark.parametrize("s,m,ell", [(0.5, 0.5, 1), (0.5, -0.5, 2), (-0.5, 0.5, 3),
                                     (1.5, 0.5, 2), (-1.5, -1.5, 4)])
def test_edth_pointwise_vs_coefficient_rule(grid, s, m, ell):
    f = eval_harmonic(s, m, ell, grid)
    df = eval_harmonic_dtheta(s, m, ell, grid)
    rc, lc = edth_coefficients(s, ell)
    if abs(s + 1) <= ell - 0.5:
        pw = edth_pointwise(f.samples, df, s, m, grid)
        ref = rc * eval_harmonic(s + 1, m, ell, grid).samples
        assert np.max(np.abs(pw - ref)) < 1e-10
    if abs(s - 1) <= ell - 0.5:
        pw = edth_prime_pointwise(f.samples, df, s, m, grid)
        ref = lc * eval_harmonic(s - 1, m, ell, grid).samples
        assert np.max(np.abs(pw - ref)) < 1e-10


def test_commutator_on_random_inputs(grid):
    rng = np.random.default_rng(7)
    for s in (0.5, -0.5):
        f, _ = rand_band_limited(rng, s, 0.5, grid)
        # band-limit below ell_max so the shifted-spin images stay exact
        f = AngularFunction(s, 0.5, f.samples, grid)
        comm = edth_prime(edth(f)).samples - edth(edth_prime(f)).samples
        assert np.max(np.abs(comm - 2.0 * s * f.samples)) < 1e-9


def test_edth_compositions_on_ell1(grid):
    f = eval_harmonic(0.5, 0.5, 1, grid)
    up_then_down = edth_prime(edth(f)).samples
    assert np.max(np.abs(up_then_down)) < 1e-12            # (s+1/2)^2 - 1 = 0
    down_then_up = edth(edth_prime(f)).samples
    assert np.max(np.abs(down_then_up + f.samples)) < 1e-12  # (s-1/2)^2 - 1 = -1


def test_teukolsky_angular_eigenvalues(grid):
    for ell, fac in ((1, -1.0), (2, -4.0)):
        f = eval_harmonic(0.5, 0.5, ell, grid)
        out = teukolsky_angular(f).samples
        assert np.max(np.abs(out - fac * f.samples)) < 1e-11
    zero = AngularFunction(0.5, 0.5, np.zeros(grid.x.size), grid)
    assert np.max(np.abs(teukolsky_angular(zero).samples)) == 0.0


def test_teukolsky_angular_operator_identities(grid):
    rng = np.random.default_rng(3)
    for s in (0.5, -0.5, 1.5):
        f, _ = rand_band_limited(rng, s, 0.5, grid)
        t = teukolsky_angular(f).samples
        via_down_up = edth(edth_prime(f)).samples - (abs(s) - s) * f.samples
        via_up_down = edth_prime(edth(f)).samples - (abs(s) + s) * f.samples
        assert np.max(np.abs(t - via_down_up)) < 1e-9
        assert np.max(np.abs(t - via_up_down)) < 1e-9


def test_integration_by_parts(grid):
    rng = np.random.default_rng(11)
    s, m = -0.5, 0.5
    h, _ = rand_band_limited(rng, s, m, grid)
    f, _ = rand_band_limited(rng, s + 1, m, grid)
    lhs = sphere_inner(f, edth(h)).real
    rhs = -sphere_inner(edth_prime(f), h).real
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_elliptic_lower_bound(grid):
    rng = np.random.default_rng(5)
    for s in (0.5, -0.5):
        for ell_lo in (2, 3):
            f, _ = rand_band_limited(rng, s, 0.5, grid, ell_lo=ell_lo)
            df = edth_prime(f)
            lhs = sphere_inner(df, df).real
            rhs = (ell_lo**2 - (s - 0.5) ** 2) * sphere_inner(f, f).real
            assert lhs >= rhs - 1e-9 * abs(rhs)


def test_raise_lower_reproduces_eigenvalue(grid):
    # edth' edth on a single harmonic equals ((s+1/2)^2 - ell^2) times it
    for (s, ell) in [(0.5, 2), (-0.5, 3)]:
        f = eval_harmonic(s, 0.5, ell, grid)
        out = edth_prime(edth(f)).samples
        lam = (s + 0.5) ** 2 - ell**2
        assert np.max(np.abs(out - lam * f.samples)) < 1e-10


def test_aliasing_detected():
    small = AngularGrid.build(ell_max=4)
    above = eval_harmonic(0.5, 0.5, 7, AngularGrid.build(ell_max=4, nodes=12))
    f = AngularFunction(0.5, 0.5, above.samples, small)
    with pytest.raises(AliasingError):
        edth(f)


def test_mode_index_validation():
    with pytest.raises(ValueError):
        ModeIndex(ell=0, m=0.5)
    with pytest.raises(ValueError):
        ModeIndex(ell=1, m=1.5)
    with pytest.raises(ValueError):
        ModeIndex(ell=2, m=0.0)   # ell - |s| - |m| not an integer
    ModeIndex(ell=2, m=1.5)
    ModeIndex(ell=1, m=-0.5)


def test_angular_function_rejects_nonfinite(grid):
    bad = np.full(grid.x.size, np.nan, dtype=complex)
    with pytest.raises(ValueError):
        AngularFunction(0.5, 0.5, bad, grid)
