import numpy as np
import pytest

from diractail.background import BlackHoleParams, SlicingProfile, build_chart, smooth_step
from diractail.swsh import ModeIndex
from diractail import evolve as ev
from diractail.evolve import (ModeState, EvolutionConfig, InitialDataSpec,
                              EvolutionError, rhs, step, make_initial_data,
                              integrate, derived_scalar, dsigma,
                              char_speed_A, char_speed_B, max_char_speed,
                              tau_derivatives)

MODE = ModeIndex(ell=1, m=0.5)


@pytest.fixture(scope="module")
def chart():
    return build_chart(BlackHoleParams(1.0), SlicingProfile.default(1.0), 256)


def bump_state(chart, center=8.0, width=1.0):
    spec = InitialDataSpec("gaussian_bump", center=center, width=width)
    return make_initial_data(spec, chart, MODE)


def test_dsigma_exact_on_quartics(chart):
    s = chart.sigma
    f = 1.0 + 2 * s - 3 * s**2 + 0.5 * s**3 + s**4
    df = 2.0 - 6 * s + 1.5 * s**2 + 4 * s**3
    assert np.max(np.abs(dsigma(f, chart.dsigma) - df)) < 1e-9


def test_rhs_zero_state(chart):
    z = ModeState(MODE, 0.0, np.zeros(257), np.zeros(257))
    dA, dB = rhs(z, chart)
    assert np.max(np.abs(dA)) == 0.0 and np.max(np.abs(dB)) == 0.0


def test_rhs_horizon_coefficients(chart):
    st = ModeState(MODE, 0.0, np.full(257, 0.3 + 0.1j), np.full(257, 0.1 - 0.2j))
    dA, dB = rhs(st, chart)
    assert dB[-1] == pytest.approx((st.A[-1] - st.B[-1]) / 8.0, rel=1e-14)


def test_rhs_manufactured_middle_region(chart):
    # A = rho^-2, B = rho^-1 with a smooth cut near the horizon; both are
    # low-degree polynomials in sigma, so the interior stencils are exact
    # and the closed-form right-hand side must match to roundoff.
    s = chart.sigma
    w = 1.0 - smooth_step((s - 0.55) / 0.2)
    st = ModeState(MODE, 0.0, ((s / 2.0) ** 2 * w).astype(complex),
                   ((s / 2.0) * w).astype(complex))
    dA, dB = rhs(st, chart)
    with np.errstate(divide="ignore"):
        rho = np.where(s > 0, 2.0 / s, np.inf)
    exp_dA = chart.mu * (-2.0 * rho**-3 - 1.0 * rho**-1)
    exp_dB = (rho**-2 - rho**-1) / rho**2
    mask = (s > 0.12) & (s < 0.48)
    assert np.max(np.abs(dA[mask] - exp_dA[mask])) < 1e-14
    assert np.max(np.abs(dB[mask] - exp_dB[mask])) < 1e-14


def test_characteristic_speeds(chart):
    # A transports toward the horizon; coded coefficient at sigma = 1
    assert char_speed_A(chart)[-1] == pytest.approx(1.0 / (2.0 * chart.drh[-1]))
    assert char_speed_A(chart)[0] == 0.0
    # B transports toward null infinity with the Delta H limit there
    assert char_speed_B(chart)[0] == pytest.approx(-2.0 / chart.slicing.c0)
    assert char_speed_B(chart)[-1] == 0.0
    assert np.all(char_speed_A(chart) >= 0) and np.all(char_speed_B(chart) <= 0)
    assert 0 < max_char_speed(chart) <= 0.5 + 1e-12


def test_step_zero_and_linearity(chart):
    dt = 0.25 * chart.dsigma / max_char_speed(chart)
    z = ModeState(MODE, 0.0, np.zeros(257), np.zeros(257))
    out = step(z, chart, dt, ko_eps=0.1)
    assert np.max(np.abs(out.A)) == 0.0 and np.max(np.abs(out.B)) == 0.0

    x = bump_state(chart)
    rng = np.random.default_rng(0)
    y = ModeState(MODE, 0.0, rng.normal(size=257) * chart.sigma,
                  rng.normal(size=257) * chart.sigma)
    a, b = 0.7 - 0.2j, 1.3 + 0.4j
    lin = ModeState(MODE, 0.0, a * x.A + b * y.A, a * x.B + b * y.B)
    s_lin = step(lin, chart, dt, ko_eps=0.1)
    sx, sy = step(x, chart, dt, ko_eps=0.1), step(y, chart, dt, ko_eps=0.1)
    ref_A = a * sx.A + b * sy.A
    scale = np.max(np.abs(ref_A))
    assert np.max(np.abs(s_lin.A - ref_A)) < 1e-13 * scale


def test_kernel_matches_numpy_step(chart):
    from diractail.evolve import _advance, _coeffs, _scri_flux
    st0 = bump_state(chart)
    dt = 0.25 * chart.dsigma / max_char_speed(chart)
    ref = st0.copy()
    for _ in range(4):
        ref = step(ref, chart, dt, ko_eps=0.1)
    cA, inv_drh, rmM, cB, inv_dh, ell = _coeffs(chart, 1)
    A, B = st0.A.copy(), st0.B.copy()
    inv12h = 1.0 / (12.0 * chart.dsigma)
    kow = ev.dissipation_weights(chart, 0.1)
    _advance(A, B, 4, dt, cA, inv_drh, rmM, cB, inv_dh, ell, inv12h,
             kow, True, 2.0, float(abs(A[-1]) ** 2), 0.0)
    scale = max(np.max(np.abs(ref.A)), np.max(np.abs(ref.B)))
    assert np.max(np.abs(A - ref.A)) < 1e-12 * scale
    assert np.max(np.abs(B - ref.B)) < 1e-12 * scale


def test_integrate_reports_nonfinite_node(chart, monkeypatch):
    def poisoned(A, B, *args):
        A[3] = np.nan
        return 0.0, 0.0, 0.0, 0.0

    monkeypatch.setattr(ev, "_advance", poisoned)
    st0 = bump_state(chart)
    cfg = EvolutionConfig(n=256, cfl=0.25, ko_eps=0.0, tau_end=2.0, output_every=1.0)
    with pytest.raises(EvolutionError, match="node 3"):
        integrate(st0, cfg, chart, ())


def test_initial_data_families(chart):
    g = bump_state(chart)
    assert np.max(np.abs(g.A)) == 0.0
    assert g.B[0] == 0.0 and g.B[1] == 0.0
    assert np.max(np.abs(g.B)) == pytest.approx(1.0, abs=1e-6)

    with pytest.raises(ValueError):
        make_initial_data(InitialDataSpec("gaussian_bump", center=500.0, width=30.0),
                          chart, MODE)

    z = make_initial_data(InitialDataSpec("np_tail", n_target=0.0), chart, MODE)
    assert np.max(np.abs(z.A)) == 0.0 and np.max(np.abs(z.B)) == 0.0

    t = make_initial_data(InitialDataSpec("np_tail", n_target=2.0 - 1.0j), chart, MODE)
    assert np.max(np.abs(t.B)) == 0.0
    assert np.all(np.isfinite(t.A))

    with pytest.raises(ValueError):
        InitialDataSpec("bogus_family")


def test_integrate_identity_and_determinism(chart):
    st0 = bump_state(chart)
    cfg = EvolutionConfig(n=256, cfl=0.25, ko_eps=0.1, tau_end=0.0, output_every=1.0)
    out = integrate(st0, cfg, chart, ())
    assert np.array_equal(out.A, st0.A) and np.array_equal(out.B, st0.B)

    cfg = EvolutionConfig(n=256, cfl=0.25, ko_eps=0.1, tau_end=10.0, output_every=1.0)
    a = integrate(st0, cfg, chart, ())
    b = integrate(st0, cfg, chart, ())
    assert np.array_equal(a.A, b.A) and np.array_equal(a.B, b.B)


def test_integrate_phase_invariance(chart):
    st0 = bump_state(chart)
    cfg = EvolutionConfig(n=256, cfl=0.25, ko_eps=0.1, tau_end=5.0, output_every=1.0)
    base = integrate(st0, cfg, chart, ())
    alpha = np.exp(0.83j)
    rot = ModeState(MODE, 0.0, alpha * st0.A, alpha * st0.B)
    out = integrate(rot, cfg, chart, ())
    assert np.max(np.abs(out.A - alpha * base.A)) < 1e-14
    assert np.max(np.abs(out.B - alpha * base.B)) < 1e-14


def test_self_convergence_small():
    finals = {}
    for n in (128, 256, 512):
        chart = build_chart(BlackHoleParams(1.0), SlicingProfile.default(1.0), n)
        st0 = make_initial_data(
            InitialDataSpec("gaussian_bump", center=6.0, width=2.0), chart, MODE)
        cfg = EvolutionConfig(n=n, cfl=0.25, ko_eps=0.0, tau_end=10.0, output_every=5.0)
        finals[n] = integrate(st0, cfg, chart, ())
    d1 = np.max(np.abs(finals[128].B - finals[256].B[::2]))
    d2 = np.max(np.abs(finals[256].B[::2] - finals[512].B[::4]))
    order = np.log2(d1 / d2)
    assert 3.0 < order < 5.5


def test_config_validation():
    with pytest.raises(EvolutionError):
        EvolutionConfig(n=32)
    with pytest.raises(EvolutionError):
        EvolutionConfig(n=128, cfl=0.9)
    with pytest.raises(EvolutionError):
        EvolutionConfig(n=128, ko_eps=0.9)
    with pytest.raises(EvolutionError):
        EvolutionConfig(n=128, output_every=-1.0)


def test_derived_scalars(chart):
    rng = np.random.default_rng(1)
    A = (rng.normal(size=257) + 1j * rng.normal(size=257)) * chart.sigma
    B = (rng.normal(size=257) + 1j * rng.normal(size=257)) * chart.sigma
    st = ModeState(MODE, 0.0, A, B)
    phim = derived_scalar(st, chart, "Phi_minus")
    assert phim[-1] == 0.0                      # Delta vanishes at the horizon
    phi1 = derived_scalar(st, chart, "Phi1")
    psip = derived_scalar(st, chart, "Psi_plus")
    inner = slice(1, -1)
    ratio = phi1[inner] / psip[inner]
    assert np.allclose(ratio, 1.0 / np.sqrt(chart.mu[inner]), rtol=1e-12)
    varphi = derived_scalar(st, chart, "varphi")
    assert varphi[0] == 0.0
    assert np.allclose(varphi[inner], A[inner] / chart.r_minus_m[inner], rtol=1e-14)
    with pytest.raises(ValueError):
        derived_scalar(st, chart, "nonsense")


def test_tau_derivatives_consistency(chart):
    st0 = bump_state(chart)
    derivs = tau_derivatives(st0, chart, 2)
    dA, dB = rhs(st0, chart)
    assert np.array_equal(derivs[1][0], dA)
    # finite-difference cross-check of the first tau derivative
    dt = 1e-5
    fwd = step(st0, chart, dt)
    bwd_state = ModeState(MODE, 0.0, st0.A, st0.B)
    bwd = step(bwd_state, chart, -dt)
    num = (fwd.A - bwd.A) / (2 * dt)
    scale = np.max(np.abs(dA)) + 1e-30
    assert np.max(np.abs(num - dA)) < 1e-7 * scale + 1e-12


def test_custom_table_roundtrip(tmp_path, chart):
    st0 = bump_state(chart)
    path = tmp_path / "ckpt.csv"
    with open(path, "w") as fh:
        fh.write("sigma,reA,imA,reB,imB\n")
        for i in range(chart.n + 1):
            fh.write(",".join("%.17g" % v for v in (
                chart.sigma[i], st0.A[i].real, st0.A[i].imag,
                st0.B[i].real, st0.B[i].imag)) + "\n")
    st1 = make_initial_data(InitialDataSpec("custom_table", path=str(path)),
                            chart, MODE)
    assert np.array_equal(st1.A, st0.A) and np.array_equal(st1.B, st0.B)
