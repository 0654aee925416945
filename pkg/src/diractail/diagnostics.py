"""Conserved charge, boundary fluxes, Newman-Penrose estimates, weighted
energies, local power indices and tail fits.

Everything here is a pure function of an immutable snapshot (plus the
chart), safe to evaluate concurrently across snapshots.  The sink classes
at the bottom adapt these functions to the evolution driver's output
cadence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .background import BackgroundChart
from .evolve import ModeState, rhs, dsigma, derived_scalar, radiation_field_scri
from .swsh import eigenvalue_Lambda

__all__ = [
    "ChargeRecord",
    "NPEstimate",
    "TailFit",
    "charge",
    "boundary_flux",
    "np_constant",
    "local_power_index",
    "weighted_energy",
    "tail_fit",
    "ObserverSink",
    "ChargeSink",
    "NPSink",
    "MovingObserverSink",
]


@dataclass(frozen=True)
class ChargeRecord:
    tau: float
    Q: float
    flux_horizon_cum: float
    flux_scri_cum: float

    @property
    def balance(self) -> float:
        return self.Q + self.flux_horizon_cum + self.flux_scri_cum


@dataclass(frozen=True)
class NPEstimate:
    tau: float
    N1: complex
    D1_tilde: complex
    d1_reliable: bool


@dataclass(frozen=True)
class TailFit:
    tau_a: float
    tau_b: float
    exponent: float
    amplitude: float
    residual: float


def _simpson(vals: np.ndarray, h: float) -> float:
    """Composite Simpson on a uniform grid; a 3/8 block absorbs an odd
    interval count."""
    n = vals.shape[0] - 1
    if n < 3:
        return float(np.trapz(vals, dx=h))
    if n % 2 == 0:
        s = vals[0] + vals[-1] + 4.0 * np.sum(vals[1:-1:2]) + 2.0 * np.sum(vals[2:-2:2])
        return float(s * h / 3.0)
    head = _simpson(vals[: n - 2], h)
    tail = 3.0 * h / 8.0 * (vals[-4] + 3.0 * vals[-3] + 3.0 * vals[-2] + vals[-1])
    return head + tail


def charge(state: ModeState, chart: BackgroundChart,
           flux_horizon_cum: float = 0.0, flux_scri_cum: float = 0.0) -> ChargeRecord:
    """Conserved charge Q = int [h' |A|^2 + (Delta H) |B|^2] (2M/s^2) ds.

    The angular integral is 1 by orthonormality.  At sigma = 0 the density
    has the finite limit 2M (h' |dA/ds|^2 + c0 |dB/ds|^2) because both
    fields vanish linearly there.
    """
    M = chart.M
    s = chart.sigma
    absA2 = np.abs(state.A) ** 2
    absB2 = np.abs(state.B) ** 2
    dens = np.empty_like(absA2)
    with np.errstate(divide="ignore", invalid="ignore"):
        dens[1:] = (chart.drh[1:] * absA2[1:] + chart.delta_h[1:] * absB2[1:]) \
            * (2.0 * M / s[1:] ** 2)
    da0 = dsigma(state.A, chart.dsigma)[0]
    db0 = dsigma(state.B, chart.dsigma)[0]
    dens[0] = 2.0 * M * (chart.drh[0] * abs(da0) ** 2 + chart.delta_h[0] * abs(db0) ** 2)
    q = _simpson(dens, chart.dsigma)
    return ChargeRecord(tau=state.tau, Q=q,
                        flux_horizon_cum=flux_horizon_cum,
                        flux_scri_cum=flux_scri_cum)


def boundary_flux(state: ModeState, chart: BackgroundChart):
    """Instantaneous outflows (f_horizon, f_scri).

    f_horizon = |A|^2 at sigma = 1 (the minus scalar degenerates there);
    f_scri    = lim Delta |B|^2 = |rho B|^2 at sigma = 0.
    """
    f_h = float(abs(state.A[-1]) ** 2)
    f_s = float(abs(radiation_field_scri(state, chart, "minus")) ** 2)
    return f_h, f_s


def _phi1_pair(state: ModeState, chart: BackgroundChart):
    """Once-rescaled plus scalar mu^{-1/2} rho A and its tau derivative,
    with the finite sigma = 0 limits in node 0."""
    phi1 = derived_scalar(state, chart, "Phi1")
    dA, dB = rhs(state, chart)
    dstate = ModeState(state.mode, state.tau, dA, dB)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi1_t = chart.rho * dA / np.sqrt(chart.mu)
    phi1_t[0] = radiation_field_scri(dstate, chart, "plus")
    return phi1, phi1_t


def np_constant(state: ModeState, chart: BackgroundChart) -> NPEstimate:
    """First Newman-Penrose estimate for an ell = 1 state.

    N1 = [-2M d/dsigma + (rho^2 H) d/dtau] (mu^{-1/2} rho A) at sigma = 0;
    D1_tilde = 2M d/dsigma of q(sigma) = rho^2 Vhat(mu^{-1/2} rho A) at
    sigma = 0, meaningful only when N1 is compatible with zero.
    """
    if state.mode.ell != 1:
        raise ValueError("np_constant applies to ell = 1 states; use the "
                         "ladder route for higher modes")
    phi1, phi1_t = _phi1_pair(state, chart)
    M = chart.M
    k = 9  # only the outermost few nodes enter the one-sided stencils
    dphi1 = dsigma(phi1[: k + 5], chart.dsigma)
    q = -2.0 * M * dphi1[: k + 1] + chart.r2h[: k + 1] * phi1_t[: k + 1]
    n1 = complex(q[0])
    dq0 = dsigma(q[:5] if q.size >= 5 else q, chart.dsigma)[0]
    d1 = 2.0 * M * complex(dq0)
    spread = float(np.max(np.abs(q[: min(5, q.size)] - q[0])))
    reliable = abs(n1) <= 1e-3 * max(spread, 1e-300)
    return NPEstimate(tau=state.tau, N1=n1, D1_tilde=d1, d1_reliable=reliable)


def local_power_index(tau, series, smooth: bool = True, min_abs: float = 1e-280):
    """Instantaneous decay exponent p = -tau d ln|f| / d tau.

    Centered differences in ln tau on the interior samples; an optional
    five-point running median tames oscillatory transients.  Returns
    (tau[1:-1], p).
    """
    tau = np.asarray(tau, dtype=float)
    f = np.abs(np.asarray(series))
    if np.any(f <= min_abs):
        raise ValueError("series underflows inside the requested window")
    if np.any(tau <= 0.0):
        raise ValueError("local power index needs tau > 0")
    if smooth and f.size >= 5:
        g = f.copy()
        for i in range(2, f.size - 2):
            g[i] = np.median(f[i - 2:i + 3])
        f = g
    ln_t = np.log(tau)
    ln_f = np.log(f)
    p = -(ln_f[2:] - ln_f[:-2]) / (ln_t[2:] - ln_t[:-2])
    return tau[1:-1], p


def tail_fit(tau, series, window) -> TailFit:
    """Least-squares power law |f| ~ amplitude * tau^(-exponent) on the
    window [tau_a, tau_b]."""
    tau = np.asarray(tau, dtype=float)
    f = np.abs(np.asarray(series))
    a, b = window
    if not b > a:
        raise ValueError("empty fit window")
    sel = (tau >= a) & (tau <= b) & (f > 0)
    if np.count_nonzero(sel) < 3:
        raise ValueError("fit window contains fewer than 3 usable samples")
    x = np.log(tau[sel])
    y = np.log(f[sel])
    if np.ptp(x) < 1e-12:
        raise ValueError("fit window is ill-conditioned (no tau spread)")
    coef = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, x) - y) ** 2)))
    return TailFit(tau_a=float(a), tau_b=float(b),
                   exponent=float(-coef[0]),
                   amplitude=float(math.exp(coef[1])),
                   residual=resid)


def tme_residual(state: ModeState, chart: BackgroundChart) -> np.ndarray:
    """Residual of the second-order master equation satisfied by A.

    In hyperboloidal coordinates the mode-reduced equation reads

        -ell^2 A + Delta A_rr + (rho-M) A_r
            = h'(Delta H) A_tt + (2 rho^2 - 2 Delta H) A_tr
              + (Delta h'' + (rho-M) h') A_t,

    with every coefficient regular on the grid once rho^2 d/drho is
    realized as -2M d/dsigma.  Time derivatives come from the first-order
    right-hand side, so the residual of an evolved state converges to
    zero at the scheme's order (checked on interior windows).
    """
    ell = state.mode.ell
    M = chart.M
    s = chart.sigma
    h = chart.dsigma
    A = state.A
    dA, dB = rhs(state, chart)
    dstate = ModeState(state.mode, state.tau, dA, dB)
    d2A, _ = rhs(dstate, chart)

    A_s = dsigma(A, h)
    A_ss = dsigma(A_s, h)
    At_s = dsigma(dA, h)
    drh_s = dsigma(chart.drh, h)

    # Delta d^2/drho^2 = s^2(1-s) d^2/ds^2 + 2s(1-s) d/ds ;
    # (rho-M) d/drho = -(s(2-s)/2) d/ds
    radial = (s**2 * (1.0 - s)) * A_ss + 2.0 * s * (1.0 - s) * A_s \
        - 0.5 * s * (2.0 - s) * A_s
    lhs = -float(ell * ell) * A + radial

    t_tt = chart.drh * chart.delta_h * d2A
    t_tr = (-4.0 * M + chart.delta_h * s**2 / M) * At_s
    # (Delta h'' + (rho-M) h') A_t with the finite sigma = 0 limit
    coef_t = -2.0 * M * (1.0 - s) * drh_s
    with np.errstate(divide="ignore", invalid="ignore"):
        last = np.where(s > 0, M * (2.0 - s) * chart.drh * dA / np.where(s > 0, s, 1.0), 0.0)
    last[0] = 2.0 * M * chart.drh[0] * At_s[0]
    return lhs - (t_tt + t_tr + coef_t * dA + last)


# ---------------------------------------------------------------------------
# weighted energies
# ---------------------------------------------------------------------------

def _first_order_set(field, field_t, chart: BackgroundChart):
    """(rV f, Y f) for a radial profile with tau-derivative supplied.

    rV = -sigma mu d/dsigma + (Delta H sigma / 2M) d/dtau,
    Y  = (sigma^2/2M) d/dsigma + h' d/dtau;
    every coefficient is finite on the whole grid.
    """
    df = dsigma(field, chart.dsigma)
    s = chart.sigma
    M = chart.M
    rv = -s * chart.mu * df + (chart.delta_h * s / (2.0 * M)) * field_t
    yf = (s**2 / (2.0 * M)) * df + chart.drh * field_t
    return rv, yf


def _energy_block(field, field_t, lam, p, chart, sig_max=1.0):
    """Quadrature of r^{p-2}|rV f|^2 + r^{-2}((1+lam)|f|^2 + |rV f|^2 + |Y f|^2)
    in d rho, over sigma in (0, sig_max]; returns +inf when the outer
    integrand fails to decay."""
    M = chart.M
    s = chart.sigma
    rv, yf = _first_order_set(field, field_t, chart)
    sel = s <= sig_max + 1e-14

    # W_{-2} part: the d rho measure cancels the r^{-2} weight exactly.
    base = ((1.0 + lam) * np.abs(field) ** 2 + np.abs(rv) ** 2 + np.abs(yf) ** 2) \
        / (2.0 * M)
    total = _simpson(base[sel], chart.dsigma)

    # r^{p-2} |rV f|^2 part, in the sigma measure (2M)^{p-1} s^{-p} |rV|^2.
    g = np.abs(rv) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = (2.0 * M) ** (p - 1.0) * np.where(s > 0, s, 1.0) ** (-p) * g
    # divergence probe: local slope of the sigma-density on the outermost
    # decade; the integral exists iff dens ~ s^w with w > -1.
    probe = (s > 0) & (s <= 0.02)
    if np.count_nonzero(probe) >= 4 and np.max(g[probe]) > 1e-280:
        w = np.polyfit(np.log(s[probe]), np.log(np.maximum(dens[probe], 1e-300)), 1)[0]
        if w < -0.5:
            return math.inf
    dens = np.where(s > 0, dens, 0.0)
    total += _simpson(dens[sel][1:], chart.dsigma) if np.count_nonzero(sel) > 1 else 0.0
    # analytic closure of the (0, dsigma] cell, using rV f ~ k sigma there
    h = chart.dsigma
    k2 = g[1] / h**2
    if p < 3.0:
        total += (2.0 * M) ** (p - 1.0) * k2 * h ** (3.0 - p) / (3.0 - p)
    return float(total)


def weighted_energy(state: ModeState, chart: BackgroundChart,
                    p: float, i: int = 0) -> float:
    """Mode-reduced p-weighted energy at first derivative order.

    The derivative set is the mode-exact {sqrt(Lambda), rV, Y}; i = 0 uses
    the radiation fields rho A and rho B, i = 1 adds the once-rescaled
    ladder scalars on rho >= 4M.  Returns +inf when the p-weighted
    integrand fails to decay (e.g. p = 3 with a nonvanishing first
    Newman-Penrose constant).
    """
    if not 0.0 <= p < 5.0:
        raise ValueError(f"weight must lie in [0, 5), got p={p}")
    if i not in (0, 1):
        raise ValueError("ladder order i must be 0 or 1")
    ell = state.mode.ell
    dA, dB = rhs(state, chart)
    dstate = ModeState(state.mode, state.tau, dA, dB)

    psi_p = derived_scalar(state, chart, "Psi_plus")
    psi_m = derived_scalar(state, chart, "Psi_minus")
    psi_p_t = derived_scalar(dstate, chart, "Psi_plus")
    psi_m_t = derived_scalar(dstate, chart, "Psi_minus")

    tot = _energy_block(psi_p, psi_p_t, eigenvalue_Lambda(0.5, ell), p, chart)
    tot += _energy_block(psi_m, psi_m_t, eigenvalue_Lambda(-0.5, ell), p, chart)
    if not math.isfinite(tot):
        return math.inf

    if i == 1:
        phi1, phi1_t = _phi1_pair(state, chart)
        # minus-side first ladder scalar Vhat_r2 (Delta^{1/2} B)
        M = chart.M
        phm = derived_scalar(state, chart, "Phi_minus")
        phm_t = derived_scalar(dstate, chart, "Phi_minus")
        dphm_t = dsigma(phm_t, chart.dsigma)
        # tau derivative of the minus ladder needs d^2/dtau^2 of B
        d2A, d2B = rhs(dstate, chart)
        d2state = ModeState(state.mode, state.tau, d2A, d2B)
        phm_tt = derived_scalar(d2state, chart, "Phi_minus")
        with np.errstate(invalid="ignore"):
            lad_m = -2.0 * M * dsigma(phm, chart.dsigma) + chart.r2h * phm_t
            lad_m_t = -2.0 * M * dphm_t + chart.r2h * phm_tt
        lad_m[-1] = 0.0   # horizon node excluded from the rho >= 4M window anyway
        lad_m_t[-1] = 0.0
        phi1 = np.where(np.isfinite(phi1), phi1, 0.0)
        phi1_t = np.where(np.isfinite(phi1_t), phi1_t, 0.0)

        sig_max = 0.5  # rho >= 4M
        tot += _energy_block(phi1, phi1_t, eigenvalue_Lambda(0.5, ell), p, chart, sig_max)
        tot += _energy_block(lad_m, lad_m_t, eigenvalue_Lambda(-0.5, ell), p, chart, sig_max)
    return float(tot) if math.isfinite(tot) else math.inf


# ---------------------------------------------------------------------------
# evolution sinks
# ---------------------------------------------------------------------------

class ChargeSink:
    """Collects ChargeRecord rows at the output cadence."""

    def __init__(self):
        self.records = []

    def __call__(self, state, chart, extras):
        self.records.append(charge(state, chart,
                                    extras["flux_horizon_cum"],
                                    extras["flux_scri_cum"]))

    @property
    def tau(self):
        return np.array([r.tau for r in self.records])

    @property
    def balance(self):
        return np.array([r.balance for r in self.records])


class NPSink:
    """Collects NPEstimate rows (ell = 1 runs)."""

    def __init__(self):
        self.records = []

    def __call__(self, state, chart, extras):
        self.records.append(np_constant(state, chart))


class ObserverSink:
    """Samples derived scalars at fixed radii plus the two endpoints.

    Each row: tau, then for each interior observer (psi_plus, psi_minus,
    varphi), then the horizon value of psi_plus and the null-infinity
    radiation fields (Psi_plus, Psi_minus).
    """

    def __init__(self, chart: BackgroundChart, radii):
        self.nodes = [chart.node_of_rho(r) for r in radii]
        self.radii = [float(chart.rho[k]) for k in self.nodes]
        self.tau = []
        self.rows = []

    def __call__(self, state, chart, extras):
        row = {}
        varphi = derived_scalar(state, chart, "varphi")
        for r, k in zip(self.radii, self.nodes):
            row[f"psi_plus@{r:.6g}"] = state.A[k]
            row[f"psi_minus@{r:.6g}"] = state.B[k]
            row[f"varphi@{r:.6g}"] = varphi[k]
        row["psi_plus@hor"] = state.A[-1]
        row["psi_minus@hor"] = state.B[-1]
        row["Psi_plus@scri"] = radiation_field_scri(state, chart, "plus")
        row["Psi_minus@scri"] = radiation_field_scri(state, chart, "minus")
        self.tau.append(state.tau)
        self.rows.append(row)

    def series(self, key):
        return np.array(self.tau), np.array([r[key] for r in self.rows])


class MovingObserverSink:
    """Samples varphi on the outgoing curve rho = tau/2 by cubic Lagrange
    interpolation in sigma (node snapping would leave the observer parked
    between the sparse nodes near null infinity); active once tau/2
    clears the near zone."""

    def __init__(self, chart: BackgroundChart, min_rho: float = 10.0):
        self.min_rho = min_rho
        self.tau = []
        self.varphi = []
        self.v = []

    @staticmethod
    def _interp(sigma_grid, f, s):
        h = sigma_grid[1] - sigma_grid[0]
        k = int(np.clip(np.floor(s / h), 1, f.shape[0] - 3))
        xs = sigma_grid[k - 1:k + 3]
        out = 0.0
        for i in range(4):
            w = 1.0
            for j in range(4):
                if j != i:
                    w *= (s - xs[j]) / (xs[i] - xs[j])
            out = out + w * f[k - 1 + i]
        return out

    def __call__(self, state, chart, extras):
        rho = 0.5 * state.tau
        if rho < self.min_rho * chart.M or rho >= 2.0 * chart.M / chart.dsigma:
            return
        s = 2.0 * chart.M / rho
        with np.errstate(invalid="ignore"):
            varphi_grid = state.A / chart.r_minus_m
        varphi_grid[0] = 0.0
        self.tau.append(state.tau)
        self.varphi.append(self._interp(chart.sigma, varphi_grid, s))
        self.v.append(state.tau + chart.h(rho))
