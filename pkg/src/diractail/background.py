"""Schwarzschild geometry on a compactified hyperboloidal radial chart.

The exterior r >= 2M is covered by the compactified coordinate
sigma = 2M/rho, so that sigma = 0 is future null infinity and sigma = 1
the horizon.  In this variable the basic functions are exact rational
expressions:

    mu    = 1 - sigma
    Delta = 4 M^2 (1 - sigma) / sigma^2
    rho^2 d/drho = -2M d/dsigma

The time function tau = v - h(r) is built from a height function h whose
radial derivative interpolates between three regimes:

    dh/dr = 1                      at the horizon (ingoing slices),
    dh/dr = 1/mu                   on a middle window (h = r* there),
    dh/dr = 2/mu - c0/r^2          toward null infinity (asymptotically
                                   null slices, r^2 (2/mu - dh/dr) -> c0).

All geometry is computed internally in units M = 1; the mass enters only
by scaling the inputs and outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

__all__ = [
    "BlackHoleParams",
    "SlicingProfile",
    "BackgroundChart",
    "mu",
    "rstar",
    "smooth_step",
    "height_derivative",
    "build_chart",
    "to_double_null",
    "write_chart_csv",
]


class ChartConfigError(ValueError):
    """Raised when slicing windows or grid parameters are inconsistent."""


@dataclass(frozen=True)
class BlackHoleParams:
    """Black hole mass in geometric units (G = c = 1)."""

    M: float = 1.0

    def __post_init__(self):
        if not self.M > 0.0:
            raise ChartConfigError(f"mass must be positive, got M={self.M}")


@dataclass(frozen=True)
class SlicingProfile:
    """Parameters of the hyperboloidal height function.

    c0          : asymptotic slicing constant, lim r^2 (2/mu - dh/dr).
    blend_inner : (r_a, r_b) window where dh/dr rises from 1 to 1/mu.
    blend_outer : (R_a, R_b) window where dh/dr rises from 1/mu to
                  2/mu - c0/r^2.

    On [r_b, R_a] the height function equals the tortoise coordinate
    exactly.  Lengths are in the same units as the mass they are used
    with.
    """

    c0: float
    blend_inner: tuple
    blend_outer: tuple

    @staticmethod
    def default(M: float = 1.0) -> "SlicingProfile":
        return SlicingProfile(
            c0=4.0 * M * M,
            blend_inner=(2.2 * M, 4.0 * M),
            blend_outer=(20.0 * M, 40.0 * M),
        )

    def validate(self, M: float) -> None:
        r_a, r_b = self.blend_inner
        R_a, R_b = self.blend_outer
        if not (2.0 * M < r_a < r_b <= R_a < R_b < math.inf):
            raise ChartConfigError(
                f"blend windows must satisfy 2M < r_a < r_b <= R_a < R_b, "
                f"got inner={self.blend_inner}, outer={self.blend_outer}, M={M}"
            )
        if not self.c0 > 0.0:
            raise ChartConfigError(f"c0 must be positive, got {self.c0}")


def mu(r, M):
    """Lapse-like factor 1 - 2M/r of the Schwarzschild metric.

    Accepts complex input (for complex-step differentiation checks); the
    domain test applies to the real part.
    """
    r = np.asarray(r)
    if not np.iscomplexobj(r):
        r = r.astype(float)
    if np.any(np.real(r) < 2.0 * M):
        raise ValueError("mu undefined inside the horizon (r < 2M)")
    return 1.0 - 2.0 * M / r


def rstar(r, M):
    """Tortoise coordinate r - 3M + 2M log((r-2M)/M), normalized r*(3M)=0.

    Accepts complex input (for complex-step differentiation checks).
    """
    r = np.asarray(r)
    if not np.iscomplexobj(r):
        r = r.astype(float)
    if np.any(np.real(r) <= 2.0 * M):
        raise ValueError("tortoise coordinate diverges for r <= 2M")
    return r - 3.0 * M + 2.0 * M * np.log((r - 2.0 * M) / M)


def smooth_step(x):
    """C-infinity step: 0 for x<=0, 1 for x>=1, exp(-1/x)-type in between.

    Flat to all orders at both edges, so blended coefficient tables stay
    smooth for high-order finite differencing.
    """
    x = np.asarray(x, dtype=float)
    lo = x <= 0.0
    hi = x >= 1.0
    xm = np.clip(x, 1e-12, 1.0 - 1e-12)
    ea = np.exp(-1.0 / xm)
    eb = np.exp(-1.0 / (1.0 - xm))
    out = ea / (ea + eb)
    out = np.where(lo, 0.0, out)
    out = np.where(hi, 1.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def _chi12(r, slicing: SlicingProfile):
    r_a, r_b = slicing.blend_inner
    R_a, R_b = slicing.blend_outer
    chi1 = smooth_step((np.asarray(r, dtype=float) - r_a) / (r_b - r_a))
    chi2 = smooth_step((np.asarray(r, dtype=float) - R_a) / (R_b - R_a))
    return chi1, chi2


def height_derivative(r, slicing: SlicingProfile, M: float = 1.0):
    """dh/dr of the height function at Schwarzschild radius r.

    Three-regime blend dh/dr = 1 + chi1 (1/mu - 1) + chi2 (1/mu - c0/r^2),
    with chi1 rising on blend_inner and chi2 on blend_outer.
    """
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 2.0 * M):
        raise ValueError("height function defined only for r >= 2M")
    chi1, chi2 = _chi12(r, slicing)
    chi1, chi2 = np.atleast_1d(chi1), np.atleast_1d(chi2)
    with np.errstate(divide="ignore"):
        mu_inv = np.where(r > 2.0 * M, r / (r - 2.0 * M), np.inf)
    # chi1 and chi2 vanish identically near the horizon, where mu_inv
    # diverges; evaluate the blended terms only where they contribute.
    out = np.ones_like(r)
    m1 = chi1 > 0.0
    out[m1] += chi1[m1] * (mu_inv[m1] - 1.0)
    m2 = chi2 > 0.0
    out[m2] += chi2[m2] * (mu_inv[m2] - slicing.c0 / r[m2] ** 2)
    if scalar:
        return float(out[0])
    return out


def _drh_sigma(sigma, slicing: SlicingProfile, M: float):
    """dh/dr evaluated in the compactified variable; exact at sigma=0."""
    sigma = np.asarray(sigma, dtype=float)
    with np.errstate(divide="ignore"):
        r = np.where(sigma > 0.0, 2.0 * M / sigma, np.inf)
    chi1, chi2 = _chi12(r, slicing)
    one_minus = np.where(sigma < 1.0, 1.0 - sigma, 1.0)
    # mu_inv - 1 = sigma/(1-sigma);  mu_inv - c0/r^2 = 1/(1-sigma) - c0 s^2/4M^2
    # chi1 and chi2 vanish identically near the horizon, where mu_inv blows up.
    t1 = np.where(chi1 > 0.0, chi1 * sigma / one_minus, 0.0)
    t2 = np.where(
        chi2 > 0.0,
        chi2 * (1.0 / one_minus - slicing.c0 * sigma**2 / (4.0 * M * M)),
        0.0,
    )
    return 1.0 + t1 + t2


def _delta_h_sigma(sigma, slicing: SlicingProfile, M: float):
    """Delta*H with H = 2/mu - dh/dr, via the cancellation-free form

        Delta*H = (4M^2/s^2) * [ (1-chi2) + (1-chi1) s + chi2 (1-s) c0 s^2/4M^2 ]

    Every bracket term is nonnegative, so positivity is manifest; the
    endpoint values Delta*H(1) = 8M^2 and Delta*H(0) = c0 are exact.
    """
    sigma = np.asarray(sigma, dtype=float)
    with np.errstate(divide="ignore"):
        r = np.where(sigma > 0.0, 2.0 * M / sigma, np.inf)
    chi1, chi2 = _chi12(r, slicing)
    w = (
        (1.0 - chi2)
        + (1.0 - chi1) * sigma
        + chi2 * (1.0 - sigma) * slicing.c0 * sigma**2 / (4.0 * M * M)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 4.0 * M * M * w / sigma**2
    # sigma -> 0: chi1 = chi2 = 1, w = (1-s) c0 s^2/4M^2, limit is c0.
    out = np.where(sigma > 0.0, out, slicing.c0)
    return out


@dataclass(frozen=True)
class BackgroundChart:
    """Precomputed geometry tables on the uniform sigma grid.

    All arrays have N+1 entries; node 0 is null infinity (sigma=0) and
    node N the horizon (sigma=1).  Entries that genuinely diverge at an
    endpoint (rho, Delta, rstar, H at sigma=1, ...) hold inf there.
    Immutable after construction; safe to share across threads.
    """

    params: BlackHoleParams
    slicing: SlicingProfile
    n: int
    sigma: np.ndarray
    rho: np.ndarray           # 2M/sigma
    mu: np.ndarray            # 1 - sigma
    delta: np.ndarray         # rho^2 mu
    rstar: np.ndarray
    drh: np.ndarray           # dh/dr
    bigH: np.ndarray          # 2/mu - dh/dr (inf at horizon)
    delta_h: np.ndarray       # Delta * bigH, finite and positive throughout
    r_minus_m: np.ndarray     # rho - M
    dsig_weight: np.ndarray   # -sigma^2/(2M): rho^2 d/drho = that * d/dsigma
    r2h: np.ndarray           # rho^2 * bigH = delta_h / mu (inf at horizon)
    _h_cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def M(self) -> float:
        return self.params.M

    @property
    def dsigma(self) -> float:
        return 1.0 / self.n

    def h(self, rho: float) -> float:
        """Height function at radius rho, anchored by h = r* on the middle
        window [r_b, R_a]; elsewhere by adaptive quadrature of dh/dr."""
        key = float(rho)
        if key in self._h_cache:
            return self._h_cache[key]
        M = self.M
        if not rho > 2.0 * M:
            raise ValueError("height function evaluated at rho <= 2M")
        r_b = self.slicing.blend_inner[1]
        R_a = self.slicing.blend_outer[0]
        if r_b <= rho <= R_a:
            val = float(rstar(rho, M))
        elif rho > R_a:
            integ, _ = quad(
                lambda rr: height_derivative(rr, self.slicing, M),
                R_a, rho, epsabs=1e-13, epsrel=1e-12, limit=200,
            )
            val = float(rstar(R_a, M)) + integ
        else:
            integ, _ = quad(
                lambda rr: height_derivative(rr, self.slicing, M),
                rho, r_b, epsabs=1e-13, epsrel=1e-12, limit=200,
            )
            val = float(rstar(r_b, M)) - integ
        self._h_cache[key] = val
        return val

    def node_of_rho(self, rho: float) -> int:
        """Grid node closest to the radius rho."""
        sig = 2.0 * self.M / rho
        return int(round(sig * self.n))


def build_chart(params: BlackHoleParams, slicing: SlicingProfile, n: int,
                validate: bool = True) -> BackgroundChart:
    """Fill all geometry tables on the N+1 node sigma grid."""
    if n < 16:
        raise ChartConfigError(f"need at least 16 cells, got n={n}")
    M = params.M
    slicing.validate(M)

    # internally in M=1 units, scaled back at the end
    slic1 = SlicingProfile(
        c0=slicing.c0 / M**2,
        blend_inner=(slicing.blend_inner[0] / M, slicing.blend_inner[1] / M),
        blend_outer=(slicing.blend_outer[0] / M, slicing.blend_outer[1] / M),
    )
    sigma = np.linspace(0.0, 1.0, n + 1)
    with np.errstate(divide="ignore"):
        rho1 = np.where(sigma > 0.0, 2.0 / sigma, np.inf)
    mu_tab = 1.0 - sigma
    with np.errstate(divide="ignore", invalid="ignore"):
        delta1 = np.where(sigma > 0.0, 4.0 * (1.0 - sigma) / sigma**2, np.inf)
        rstar1 = np.where(
            (sigma > 0.0) & (sigma < 1.0),
            rho1 - 3.0 + 2.0 * np.log(np.maximum(rho1 - 2.0, 1e-300)),
            np.where(sigma == 0.0, np.inf, -np.inf),
        )
    drh = _drh_sigma(sigma, slic1, 1.0)
    delta_h1 = _delta_h_sigma(sigma, slic1, 1.0)
    with np.errstate(divide="ignore"):
        bigH = np.where(mu_tab > 0.0, 2.0 / np.where(mu_tab > 0.0, mu_tab, 1.0) - drh, np.inf)
        r2h1 = np.where(mu_tab > 0.0, delta_h1 / np.where(mu_tab > 0.0, mu_tab, 1.0), np.inf)
    r_minus_m1 = np.where(sigma > 0.0, (2.0 - sigma) / np.where(sigma > 0.0, sigma, 1.0), np.inf)

    chart = BackgroundChart(
        params=params,
        slicing=slicing,
        n=n,
        sigma=sigma,
        rho=rho1 * M,
        mu=mu_tab,
        delta=delta1 * M**2,
        rstar=rstar1 * M,
        drh=drh,
        bigH=bigH,
        delta_h=delta_h1 * M**2,
        r_minus_m=r_minus_m1 * M,
        dsig_weight=-(sigma**2) / (2.0 * M),
        r2h=r2h1 * M**2,
    )
    if validate:
        _check_chart(chart)
    return chart


def _check_chart(chart: BackgroundChart) -> None:
    M = chart.M
    s = chart.sigma
    inner = s > 0.0
    if not np.allclose(chart.rho[inner] * s[inner], 2.0 * M, rtol=1e-14):
        raise ChartConfigError("rho*sigma != 2M on the grid")
    if not chart.delta[-1] == 0.0:
        raise ChartConfigError("Delta must vanish at the horizon node")
    if np.any(chart.delta[1:-1] <= 0.0):
        raise ChartConfigError("Delta must be positive off the horizon")
    if np.any(~np.isfinite(chart.delta_h)) or np.any(chart.delta_h <= 0.0):
        raise ChartConfigError("Delta*H must be finite and positive on [0,1]")
    if not math.isclose(chart.delta_h[-1], 8.0 * M * M, rel_tol=1e-14):
        raise ChartConfigError("Delta*H != 8M^2 at the horizon")
    if not math.isclose(chart.delta_h[0], chart.slicing.c0, rel_tol=1e-14):
        raise ChartConfigError("Delta*H != c0 at null infinity")
    if np.any(chart.drh < 0.0):
        raise ChartConfigError("dh/dr must be nonnegative")
    # H > 0 at finite radius; at sigma = 0 it tends to zero like c0/rho^2.
    if np.any(chart.bigH[1:-1] <= 0.0) or chart.bigH[0] < 0.0:
        raise ChartConfigError("H must be positive off the horizon")


def to_double_null(tau: float, rho: float, chart: BackgroundChart):
    """Map a hyperboloidal event (tau, rho) to double-null (u, v).

    v = tau + h(rho), u = v - 2 r*(rho); u diverges at the horizon.
    """
    M = chart.M
    if not rho > 2.0 * M:
        raise ValueError("double-null map undefined at/inside the horizon")
    h_val = chart.h(rho)
    v = tau + h_val
    u = v - 2.0 * float(rstar(rho, M))
    return u, v


def write_chart_csv(chart: BackgroundChart, path) -> None:
    """Dump the chart tables for inspection (one row per sigma node)."""
    cols = [
        ("sigma", chart.sigma),
        ("rho", chart.rho),
        ("mu", chart.mu),
        ("delta", chart.delta),
        ("rstar", chart.rstar),
        ("drh", chart.drh),
        ("H", chart.bigH),
        ("deltaH", chart.delta_h),
    ]
    with open(path, "w") as fh:
        fh.write(",".join(name for name, _ in cols) + "\n")
        for i in range(chart.n + 1):
            fh.write(",".join("%.17g" % col[i] for _, col in cols) + "\n")
