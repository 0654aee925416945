"""Asymptotic apparatus: late-time profile coefficients, the rescaled
scalar ladder, the time integral of an ell = 1 mode and its conserved
constant, and predicted-versus-measured profile comparison.

Coefficient conventions for the leading profiles, with x = tau/v:

    c_plus(j, x)  = 4 (-1)^j j! sum_{n=0..j} sum_{i=0..n} x^{j-i}
    c_minus(j, x) = 4 (-1)^j j! [ (j+2) sum_{n=0..j} x^{j-n}
                                  - sum_{n=0..j} sum_{i=0..n} x^{j-i}
                                  + (j+1) (x^j - x^{j+2}) ]

so that, for a mode with nonvanishing first outgoing constant K,
(r-M)^{-1} psi_+  ~ c_plus(j, x) v^{-2} tau^{-1-j} K and
psi_-             ~ c_minus(j, x) v^{-1} tau^{-2-j} K; with K vanishing the
same formulas hold with j -> j+1 and the time-integral constant instead.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .background import BackgroundChart
from .evolve import ModeState, rhs, dsigma, derived_scalar, radiation_field_scri
from .diagnostics import np_constant

__all__ = [
    "LadderCoefficients",
    "ladder_coeffs",
    "c_coeff",
    "phi_ladder",
    "ladder_pairs",
    "ladder_residual",
    "tilde_ladder",
    "tilde_ladder_residual_i2",
    "np_constant_ladder",
    "tilde_H",
    "TimeIntegralResult",
    "time_integral",
    "ProfilePrediction",
    "predicted_profile",
    "predicted_radiation_scri",
]


# ---------------------------------------------------------------------------
# combinatorial coefficients
# ---------------------------------------------------------------------------

def _f1(i: int) -> int:
    return i * i


def _f2(i: int) -> int:
    return -2 * i - 1


def _g(i: int) -> int:
    return i * (i - 1) * (2 * i - 1)


@dataclass(frozen=True)
class LadderCoefficients:
    """f_{i,1} = i^2, f_{i,2} = -2i-1, g_i = i(i-1)(2i-1) and the lower
    triangular combination matrix x used by the tilde ladder."""

    i_max: int
    f1: tuple
    f2: tuple
    g: tuple
    x: tuple   # x[i][j] (1-based indices stored at [i][j])

    def x_entry(self, i: int, j: int) -> float:
        return self.x[i][j]


def ladder_coeffs(i_max: int) -> LadderCoefficients:
    if not 1 <= i_max <= 6:
        raise ValueError("ladder implemented for 1 <= i_max <= 6")
    f1 = tuple(_f1(i) for i in range(i_max + 1))
    f2 = tuple(_f2(i) for i in range(i_max + 1))
    g = tuple(_g(i) for i in range(i_max + 1))
    x = [[0.0] * (i_max + 1) for _ in range(i_max + 1)]
    for i in range(1, i_max):
        x[i + 1][i] = float(i * (i + 1))       # = g_{i+1} / (f_{i+1,1} - f_{i,1})
        for j in range(1, i):
            x[i + 1][j] = -_g(i + 1) * x[i][j] / (f1[i + 1] - f1[j])
    return LadderCoefficients(i_max=i_max, f1=f1, f2=f2, g=g,
                              x=tuple(tuple(r) for r in x))


def c_coeff(sign: str, j: int, x: float) -> float:
    """Profile coefficient c_{+1/2,j}(x) or c_{-1/2,j}(x), x = tau/v."""
    if j < 0:
        raise ValueError("j must be a nonnegative integer")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x = tau/v must lie in [0, 1]")
    fact = 4.0 * (-1.0) ** j * math.factorial(j)
    double = sum(x ** (j - i) for n in range(j + 1) for i in range(n + 1))
    if sign in ("+", "plus"):
        return fact * double
    if sign in ("-", "minus"):
        single = sum(x ** (j - n) for n in range(j + 1))
        return fact * ((j + 2) * single - double
                       + (j + 1) * (x**j - x ** (j + 2)))
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


# ---------------------------------------------------------------------------
# the Vhat ladder
# ---------------------------------------------------------------------------

def _vhat(field, field_t, chart: BackgroundChart):
    """rho^2 Vhat f = -2M df/dsigma + (rho^2 H) df/dtau.

    The horizon node is nan/inf for the plus ladder (r2h diverges there);
    consumers stay on windows away from sigma = 1.
    """
    with np.errstate(invalid="ignore"):
        out = -2.0 * chart.M * dsigma(field, chart.dsigma) + chart.r2h * field_t
    return out


def _base_pair(state: ModeState, chart: BackgroundChart, sign: str, orders: int):
    """tau-derivative stack of the first ladder scalar.

    plus : Phi^{(1)} = mu^{-1/2} rho A   (horizon node undefined -> nan)
    minus: Phi_-     = Delta^{1/2} B     (we stack the unrescaled minus
           scalar here; one extra Vhat below makes its first ladder entry)
    """
    levels = []
    cur = state
    for _ in range(orders + 1):
        if sign == "plus":
            with np.errstate(divide="ignore", invalid="ignore"):
                f = chart.rho * cur.A / np.sqrt(chart.mu)
            f[0] = radiation_field_scri(cur, chart, "plus")
            f[-1] = np.nan
        else:
            f = derived_scalar(cur, chart, "Phi_minus")
        levels.append(f)
        dA, dB = rhs(cur, chart)
        cur = ModeState(state.mode, state.tau, dA, dB)
    return levels


def ladder_pairs(state: ModeState, chart: BackgroundChart, i: int,
                 sign: str = "plus", extra_tau: int = 1):
    """[(Phi^{(1)}, dtau...), ..., (Phi^{(i)}, ...)] with extra_tau
    tau-derivatives retained at the top level.

    Each Vhat application consumes one stacked tau derivative and one
    numerical sigma derivative; accuracy degrades accordingly (two
    sigma-derivatives for i = 3 want n >= 2048).
    """
    if sign not in ("plus", "minus"):
        raise ValueError("sign must be 'plus' or 'minus'")
    if i < 1:
        raise ValueError("ladder order starts at 1")
    depth = i - 1 + extra_tau
    if sign == "minus":
        depth += 1
    stack = _base_pair(state, chart, sign, depth)
    if sign == "minus":
        # first minus-ladder scalar is Vhat applied to Delta^{1/2} B
        stack = [_vhat(stack[k], stack[k + 1], chart)
                 for k in range(len(stack) - 1)]
    out = [stack]
    for _ in range(i - 1):
        stack = [_vhat(stack[k], stack[k + 1], chart)
                 for k in range(len(stack) - 1)]
        out.append(stack)
    return out


def phi_ladder(state: ModeState, chart: BackgroundChart, i: int,
               sign: str = "plus") -> np.ndarray:
    """Ladder scalar Phi^{(i)} = (rho^2 Vhat)^{i-1} Phi^{(1)} (plus side)
    or the analogous i-fold Vhat of Delta^{1/2} B (minus side).

    The horizon-side nodes within the stencil reach of sigma = 1 are not
    meaningful for the plus side (nan there).
    """
    if i > 3:
        raise ValueError("ladder capped at i = 3")
    if i == 3 and chart.n < 2048:
        warnings.warn("i = 3 ladder applies two numerical sigma derivatives; "
                      "n < 2048 is under-resolved", stacklevel=2)
    return ladder_pairs(state, chart, i, sign, extra_tau=0)[-1][0]


def ladder_residual(state: ModeState, chart: BackgroundChart, i: int,
                    sign: str = "plus") -> np.ndarray:
    """Residual of the i-th ladder wave equation, mode reduced:

        -2 du (Vhat_r2 Phi^{(i)}) + (f_{i,1} - ell^2) Phi^{(i)}
        + f_{i,2} (rho-3M) rho^{-2} Vhat_r2 Phi^{(i)}
        - 6 f_{i,1} M rho^{-1} Phi^{(i)} + g_i M Phi^{(i-1)},

    with -2 du = mu d/drho - mu h' d/dtau; converges to zero at the
    scheme's order on any window away from the horizon.
    """
    ell = state.mode.ell
    pairs = ladder_pairs(state, chart, i, sign, extra_tau=2)
    phi_i, phi_i_t = pairs[-1][0], pairs[-1][1]
    vhat_i = _vhat(phi_i, phi_i_t, chart)
    vhat_i_t = _vhat(phi_i_t, pairs[-1][2], chart)

    M = chart.M
    s = chart.sigma
    mu_ = chart.mu
    du2 = -(mu_ * s**2 / (2.0 * M)) * dsigma(vhat_i, chart.dsigma) \
        - mu_ * chart.drh * vhat_i_t
    with np.errstate(divide="ignore", invalid="ignore"):
        r3 = np.where(s > 0, (2.0 - 3.0 * s) * s / (4.0 * M), 0.0)  # (rho-3M)/rho^2
        rinv = s / (2.0 * M)
    res = du2 + (_f1(i) - ell * ell) * phi_i \
        + _f2(i) * r3 * vhat_i - 6.0 * _f1(i) * M * rinv * phi_i
    if i >= 2:
        res = res + _g(i) * M * pairs[-2][0]
    return res


def tilde_ladder(state: ModeState, chart: BackgroundChart, i: int,
                 sign: str = "plus", extra_tau: int = 1):
    """Combined scalars tilde-Phi^{(k)} for k = 1..i, each with extra_tau
    tau derivatives, built from the x-matrix combination."""
    lc = ladder_coeffs(max(i, 2))
    pairs = ladder_pairs(state, chart, i, sign, extra_tau=extra_tau)
    M = chart.M
    tilde = [list(pairs[0])]
    for k in range(2, i + 1):
        comb = [arr.copy() for arr in pairs[k - 1][: extra_tau + 1]]
        for j in range(1, k):
            wj = lc.x_entry(k, j) * M ** (k - j)
            for d in range(extra_tau + 1):
                comb[d] = comb[d] + wj * tilde[j - 1][d]
        tilde.append(comb)
    return tilde


def tilde_ladder_residual_i2(state: ModeState, chart: BackgroundChart) -> np.ndarray:
    """Residual of the i = 2 combined-ladder equation.

    The extra O(1/r) couplings are h_{2,2} = 4M (rho-3M)/rho^2 and
    h_{2,1} = 36 M^2 / rho, obtained by replaying the elimination that
    removes the order-one lower-ladder term; validated here purely by
    residual convergence.
    """
    ell = state.mode.ell
    tl = tilde_ladder(state, chart, 2, "plus", extra_tau=2)
    t2, t2_t, t2_tt = tl[1][0], tl[1][1], tl[1][2]
    vhat2 = _vhat(t2, t2_t, chart)
    vhat2_t = _vhat(t2_t, t2_tt, chart)
    pairs = ladder_pairs(state, chart, 2, "plus", extra_tau=0)
    phi1 = pairs[0][0]
    phi2 = pairs[1][0]

    M = chart.M
    s = chart.sigma
    mu_ = chart.mu
    du2 = -(mu_ * s**2 / (2.0 * M)) * dsigma(vhat2, chart.dsigma) \
        - mu_ * chart.drh * vhat2_t
    with np.errstate(divide="ignore", invalid="ignore"):
        r3 = np.where(s > 0, (2.0 - 3.0 * s) * s / (4.0 * M), 0.0)
        rinv = s / (2.0 * M)
    res = du2 + (4.0 - ell * ell) * t2 - 5.0 * r3 * vhat2 \
        - 24.0 * M * rinv * t2 \
        + 4.0 * M * r3 * phi2 + 36.0 * M * M * rinv * phi1
    return res


def np_constant_ladder(state: ModeState, chart: BackgroundChart) -> complex:
    """ell0-th outgoing constant lim rho^2 Vhat(tilde-Phi^{(ell0)}) at
    sigma = 0 for a state supported on mode ell0 >= 1."""
    ell = state.mode.ell
    tl = tilde_ladder(state, chart, max(ell, 1), "plus", extra_tau=1)
    top, top_t = tl[-1][0], tl[-1][1]
    q = _vhat(top, top_t, chart)
    return complex(q[0])


# ---------------------------------------------------------------------------
# time integral
# ---------------------------------------------------------------------------

def _hcheck(state: ModeState, chart: BackgroundChart) -> np.ndarray:
    """mu^{1/2} * Htilde, smooth through the horizon:

        Hcheck = (2-s)/2 h' (Delta H) A_tau
                 - 2M (2-s) ((1-s) h' - 1) A_s
                 - M (2-s)(1-s) h'' A + M (2-s)^2 h' A / (2 s),

    with A_s = dA/dsigma, A_tau from the right-hand side and h'' the
    sigma-derivative of the h' table; the last term's node-0 value is its
    finite limit 2 M h'(0) A_s(0).
    """
    M = chart.M
    s = chart.sigma
    dA_t, _ = rhs(state, chart)
    A = state.A
    A_s = dsigma(A, chart.dsigma)
    drh_s = dsigma(chart.drh, chart.dsigma)
    t1 = 0.5 * (2.0 - s) * chart.drh * chart.delta_h * dA_t
    t2 = -2.0 * M * (2.0 - s) * ((1.0 - s) * chart.drh - 1.0) * A_s
    t3 = -M * (2.0 - s) * (1.0 - s) * drh_s * A
    with np.errstate(divide="ignore", invalid="ignore"):
        t4 = M * (2.0 - s) ** 2 * chart.drh * A / (2.0 * s)
    t4[0] = 2.0 * M * chart.drh[0] * A_s[0]
    return t1 + t2 + t3 + t4


def tilde_H(state: ModeState, chart: BackgroundChart) -> np.ndarray:
    """Source density of the time-integral radial equation.

    Behaves like (rho-2M)^{-1/2} at the horizon (the value at the horizon
    node is inf); downstream quadrature absorbs this with the substitution
    w = sqrt(rho - 2M).
    """
    if state.mode.ell != 1:
        raise ValueError("time-integral machinery applies to ell = 1")
    hc = _hcheck(state, chart)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = hc / np.sqrt(chart.mu)
    return out


@dataclass
class TimeIntegralResult:
    g_plus: np.ndarray        # time integral of A on the grid
    g_minus: np.ndarray       # its partner via the first-order pair
    I_of_sigma: np.ndarray    # cumulative integral of Htilde from horizon
    I_total: complex          # full integral (rho -> infinity)
    D1_tilde: complex
    N1_prime: complex         # M I_total - (2/3) D1_tilde
    N1_prime_direct: complex  # endpoint limit evaluated on g_plus
    integrability_residual: float
    N1_of_data: complex


def _cumulative_I(state: ModeState, chart: BackgroundChart):
    """I(sigma_k) = int_{2M}^{rho_k} Htilde drho at every node, by
    per-cell Gauss-Legendre on a spline of the smooth part; the horizon
    half uses w = sqrt(rho-2M)."""
    M = chart.M
    s = chart.sigma
    hc = _hcheck(state, chart)
    sp_re = CubicSpline(s, hc.real)
    sp_im = CubicSpline(s, hc.imag)

    def hcheck_at(sig):
        return sp_re(sig) + 1j * sp_im(sig)

    xg, wg = np.polynomial.legendre.leggauss(8)

    n = chart.n
    I = np.zeros(n + 1, dtype=complex)
    # horizon side: sigma in [1/2, 1], parameter w = sqrt(2M(1-s)/s)
    def w_of(sig):
        return math.sqrt(2.0 * M * (1.0 - sig) / sig)

    def sig_of_w(w):
        return 2.0 * M / (2.0 * M + w * w)

    acc = 0.0 + 0.0j
    half = n // 2
    for k in range(n, half, -1):
        wa, wb = w_of(s[k]), w_of(s[k - 1])
        mid, rad = 0.5 * (wa + wb), 0.5 * (wb - wa)
        ws = mid + rad * xg
        sigs = np.array([sig_of_w(w) for w in ws])
        rhos = 2.0 * M + ws**2
        vals = 2.0 * np.sqrt(rhos) * hcheck_at(sigs)
        acc = acc + rad * np.sum(wg * vals)
        I[k - 1] = acc
    # outer side: sigma in (0, 1/2], integrate Htilde * 2M/s^2 dsigma
    for k in range(half, 0, -1):
        sa, sb = s[k], s[k - 1]
        mid, rad = 0.5 * (sa + sb), 0.5 * (sb - sa)
        ss = mid + rad * xg
        vals = hcheck_at(ss) / np.sqrt(1.0 - ss) * (2.0 * M / ss**2)
        acc = acc - rad * np.sum(wg * vals)   # dsigma < 0 along increasing rho
        I[k - 1] = acc
    return I, hc


def time_integral(state: ModeState, chart: BackgroundChart,
                  n1_tol: float = 1e-6) -> TimeIntegralResult:
    """Construct the time integral g of an ell = 1 mode on its slice.

    Solves d/drho((rho-M)^{-1} g) = (rho-M)^{-2} rho^{-1} mu^{-1/2} I(rho)
    inward from sigma = 0 with g -> 0 there, where I is the cumulative
    integral of tilde_H from the horizon; the partner field follows from
    the first-order pair, g_minus = dg/drho - h' A.
    """
    if state.mode.ell != 1:
        raise ValueError("time integral defined for ell = 1 modes")
    npest = np_constant(state, chart)
    scale = max(np.max(np.abs(state.A)), np.max(np.abs(state.B)), 1e-300)
    if abs(npest.N1) > n1_tol * scale:
        warnings.warn(
            f"state has |N1| = {abs(npest.N1):.3e}; the time integral "
            "presumes a vanishing first outgoing constant", stacklevel=2)

    M = chart.M
    s = chart.sigma
    n = chart.n
    I, hc = _cumulative_I(state, chart)
    I_total = complex(I[0])

    # dG/dsigma with G = (rho-M)^{-1} g; finite everywhere, horizon limit
    # uses mu^{-1/2} I -> 4 M Hcheck(horizon).
    mu_half_I = np.empty(n + 1, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu_half_I[:-1] = I[:-1] / np.sqrt(chart.mu[:-1])
    mu_half_I[-1] = 4.0 * M * hc[-1]
    dG = -s * mu_half_I / (M * M * (2.0 - s) ** 2)

    # cumulative from sigma = 0: fourth-order first cell (Adams-Moulton
    # weights), then chained Simpson pairs for both parities
    G = np.zeros(n + 1, dtype=complex)
    h = chart.dsigma
    G[1] = (h / 24.0) * (9.0 * dG[0] + 19.0 * dG[1] - 5.0 * dG[2] + dG[3])
    for k in range(2, n + 1):
        G[k] = G[k - 2] + (h / 3.0) * (dG[k - 2] + 4.0 * dG[k - 1] + dG[k])

    with np.errstate(invalid="ignore"):
        g = chart.r_minus_m * G
    g[0] = 0.0

    g_minus = -(s**2 / (2.0 * M)) * dsigma(g, chart.dsigma) - chart.drh * state.A

    # direct endpoint limit of the outgoing constant of g
    with np.errstate(divide="ignore", invalid="ignore"):
        g1 = chart.rho * g / np.sqrt(chart.mu)
    g1[0] = 2.0 * M * dsigma(g, chart.dsigma)[0]
    g1[-1] = np.nan
    phi1_0 = radiation_field_scri(state, chart, "plus")
    n1p_direct = complex(-2.0 * M * dsigma(g1[:6], chart.dsigma)[0]
                         + chart.r2h[0] * phi1_0)

    d1 = npest.D1_tilde
    n1_prime = M * I_total - (2.0 / 3.0) * d1

    # round-trip integrability check: the (rho-M)^2 Delta^{1/2}-weighted
    # slope of G, recomputed from the constructed g, must extrapolate to
    # the total integral at sigma -> 0.
    dG_num = dsigma(G, chart.dsigma)
    with np.errstate(divide="ignore", invalid="ignore"):
        L = -M * M * (2.0 - s) ** 2 * np.sqrt(chart.mu) * dG_num / s
    # linear extrapolation from the two outermost interior nodes
    L0 = 2.0 * L[1] - L[2]
    resid = abs(L0 - I_total) / max(abs(I_total), 1e-300)

    return TimeIntegralResult(
        g_plus=g, g_minus=g_minus, I_of_sigma=I, I_total=I_total,
        D1_tilde=d1, N1_prime=n1_prime, N1_prime_direct=n1p_direct,
        integrability_residual=float(resid), N1_of_data=npest.N1,
    )


# ---------------------------------------------------------------------------
# predicted profiles
# ---------------------------------------------------------------------------

def predicted_profile(field: str, j: int, constant: complex,
                      tau: float, v: float, vanishing: bool = False) -> complex:
    """Leading modal profile of d^j/dtau^j of the field at (tau, v).

    field 'varphi': (r-M)^{-1} psi_+ ; field 'psi_minus': psi_- .
    vanishing=True uses the time-integral constant and the shifted
    coefficient index.
    """
    if v <= 0.0 or tau <= 0.0:
        raise ValueError("late-time profile wants tau, v > 0")
    x = min(tau / v, 1.0)
    jj = j + (1 if vanishing else 0)
    if field == "varphi":
        return c_coeff("+", jj, x) * v**-2.0 * tau ** (-1.0 - jj) * constant
    if field == "psi_minus":
        return c_coeff("-", jj, x) * v**-1.0 * tau ** (-2.0 - jj) * constant
    raise ValueError(f"unknown field {field!r}")


def predicted_radiation_scri(j: int, constant: complex, tau: float,
                             vanishing: bool = False) -> complex:
    """Limit of rho * psi_- at null infinity: the rho/v ratio tends to
    1/2 along the slice, so the profile is c_minus(jj, 0)/2 tau^{-2-jj} K."""
    jj = j + (1 if vanishing else 0)
    return 0.5 * c_coeff("-", jj, 0.0) * tau ** (-2.0 - jj) * constant


@dataclass(frozen=True)
class ProfilePrediction:
    """Callable late-time profile for one mode and derivative count."""

    field: str
    j: int
    constant: complex
    vanishing: bool

    def __call__(self, tau: float, v: float) -> complex:
        return predicted_profile(self.field, self.j, self.constant,
                                 tau, v, self.vanishing)
