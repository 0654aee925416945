"""Spin-weighted spherical harmonics for half-integer spin.

Mode labels follow a shifted convention: the label ell equals the usual
angular-momentum number j plus 1/2, so that ell is a positive integer for
the spin |s| = 1/2 harmonics (ell >= 1, m = -1/2, 1/2 for ell = 1).

Harmonics are built from Wigner small-d matrices,

    Y[s, m, ell](theta) = sqrt(ell / (2 pi)) * d^{ell-1/2}_{-m, s}(theta),

normalized so that the full spherical integral of |Y e^{i m phi}|^2 is 1.
The overall per-(m, ell) phase is a local convention (it cancels in every
quantity this package compares); the relative phase across spin weights
is fixed by the raising/lowering relations

    edth  Y[s]  = -sqrt((ell+s+1/2)(ell-s-1/2)) Y[s+1],
    edth' Y[s]  = +sqrt((ell+s-1/2)(ell-s+1/2)) Y[s-1],

which the d-matrix construction satisfies identically.

The azimuthal factor e^{i m phi} is anti-periodic for half-integer m and
is never sampled: all operators act per m on the theta profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModeIndex",
    "AngularGrid",
    "AngularFunction",
    "eigenvalue_Lambda",
    "edth_coefficients",
    "wigner_d",
    "wigner_d_dtheta",
    "eval_harmonic",
    "eval_harmonic_dtheta",
    "edth",
    "edth_prime",
    "edth_pointwise",
    "edth_prime_pointwise",
    "teukolsky_angular",
    "sphere_inner",
]


class AliasingError(ValueError):
    """Input is not band-limited below the grid's ell_max."""


def _check_spin(s: float) -> None:
    if (2.0 * s) != int(round(2.0 * s)):
        raise ValueError(f"spin weight must be half-integer, got {s}")
    if (int(round(2.0 * s)) % 2) == 0:
        raise ValueError(f"only half-odd-integer spin supported, got s={s}")


def _check_mode(s: float, m: float, ell: float) -> None:
    _check_spin(s)
    if abs(ell - round(ell)) > 0:
        raise ValueError(f"shifted mode number must be an integer, got ell={ell}")
    if (2.0 * m) != int(round(2.0 * m)) or (int(round(2.0 * m)) % 2) == 0:
        raise ValueError(f"m must be half-odd-integer, got m={m}")
    if ell < max(abs(s), abs(m)) + 0.5:
        raise ValueError(
            f"need ell >= max(|s|, |m|) + 1/2, got s={s}, m={m}, ell={ell}"
        )


@dataclass(frozen=True)
class ModeIndex:
    """One (m, ell) harmonic label in the shifted convention."""

    ell: int
    m: float

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError(f"ell must be a positive integer, got {self.ell}")
        _check_mode(0.5, self.m, self.ell)  # evolution spins are +-1/2
        k = self.ell - 0.5 - abs(self.m)
        if k < 0 or abs(k - round(k)) > 1e-12:
            raise ValueError(
                f"need ell - 1/2 - |m| to be a nonnegative integer, got "
                f"ell={self.ell}, m={self.m}"
            )


def eigenvalue_Lambda(s: float, ell: float) -> float:
    """Eigenvalue Lambda: edth edth' Y = -Lambda Y, with
    Lambda = (ell - 1/2 + s)(ell - s + 1/2)."""
    _check_spin(s)
    return (ell - 0.5 + s) * (ell - s + 0.5)


def edth_coefficients(s: float, ell: float):
    """Scalar action of (edth, edth') on the (m, ell) harmonic of spin s."""
    _check_spin(s)
    raise_c = -math.sqrt(max((ell + s + 0.5) * (ell - s - 0.5), 0.0))
    lower_c = +math.sqrt(max((ell + s - 0.5) * (ell - s + 0.5), 0.0))
    return raise_c, lower_c


def _fact(n: int) -> float:
    return float(math.factorial(n))


def wigner_d(j: float, a: float, b: float, theta):
    """Wigner small-d matrix element d^j_{a,b}(theta), explicit sum form.

    Valid for half-integer j with j+-a, j+-b nonnegative integers.
    """
    theta = np.asarray(theta, dtype=float)
    ja, jma = int(round(j + a)), int(round(j - a))
    jb, jmb = int(round(j + b)), int(round(j - b))
    if min(ja, jma, jb, jmb) < 0:
        raise ValueError(f"invalid d-matrix indices j={j}, a={a}, b={b}")
    pref = math.sqrt(_fact(ja) * _fact(jma) * _fact(jb) * _fact(jmb))
    c, s2 = np.cos(theta / 2.0), np.sin(theta / 2.0)
    kmin = max(0, int(round(b - a)))
    kmax = min(jb, jma)
    out = np.zeros_like(theta)
    for k in range(kmin, kmax + 1):
        den = (_fact(jb - k) * _fact(k) * _fact(jma - k)
               * _fact(int(round(k - b + a))))
        pc = int(round(2 * j - 2 * k + b - a))
        ps = int(round(2 * k - b + a))
        out = out + ((-1.0) ** (k - b + a) * pref / den) * c**pc * s2**ps
    return out


def wigner_d_dtheta(j: float, a: float, b: float, theta):
    """Exact d/dtheta of wigner_d, by termwise differentiation of the sum.

    Independent of the ladder-coefficient route; used as a pointwise
    oracle for the edth operators.
    """
    theta = np.asarray(theta, dtype=float)
    ja, jma = int(round(j + a)), int(round(j - a))
    jb, jmb = int(round(j + b)), int(round(j - b))
    pref = math.sqrt(_fact(ja) * _fact(jma) * _fact(jb) * _fact(jmb))
    c, s2 = np.cos(theta / 2.0), np.sin(theta / 2.0)
    kmin = max(0, int(round(b - a)))
    kmax = min(jb, jma)
    out = np.zeros_like(theta)
    for k in range(kmin, kmax + 1):
        den = (_fact(jb - k) * _fact(k) * _fact(jma - k)
               * _fact(int(round(k - b + a))))
        pc = int(round(2 * j - 2 * k + b - a))
        ps = int(round(2 * k - b + a))
        term = np.zeros_like(theta)
        if pc > 0:
            term = term - (pc / 2.0) * c ** (pc - 1) * s2 ** (ps + 1)
        if ps > 0:
            term = term + (ps / 2.0) * c ** (pc + 1) * s2 ** (ps - 1)
        out = out + ((-1.0) ** (k - b + a) * pref / den) * term
    return out


@dataclass(frozen=True)
class AngularGrid:
    """Gauss-Legendre nodes in cos(theta) plus quadrature weights.

    Node count >= 2 ell_max + 4 makes every same-spin, same-m product of
    band-limited functions a polynomial integrated exactly.
    """

    ell_max: int
    x: np.ndarray       # cos(theta) nodes
    w: np.ndarray       # GL weights
    theta: np.ndarray

    @staticmethod
    def build(ell_max: int = 8, nodes: int | None = None) -> "AngularGrid":
        if nodes is None:
            nodes = 2 * ell_max + 4
        if nodes < 2 * ell_max + 4:
            raise ValueError("need at least 2*ell_max + 4 quadrature nodes")
        x, w = np.polynomial.legendre.leggauss(nodes)
        return AngularGrid(ell_max=ell_max, x=x, w=w, theta=np.arccos(x))

    def ells(self, s: float, m: float):
        lo = int(round(max(abs(s), abs(m)) + 0.5))
        return list(range(lo, self.ell_max + 1))


@dataclass
class AngularFunction:
    """Theta profile of one azimuthal number m at some spin weight."""

    s: float
    m: float
    samples: np.ndarray
    grid: AngularGrid

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("angular samples must be finite")


def eval_harmonic(s: float, m: float, ell: int, grid: AngularGrid) -> AngularFunction:
    """Sample Y[s, m, ell] at the grid nodes."""
    _check_mode(s, m, ell)
    j = ell - 0.5
    vals = math.sqrt(ell / (2.0 * math.pi)) * wigner_d(j, -m, s, grid.theta)
    return AngularFunction(s=s, m=m, samples=vals.astype(complex), grid=grid)


def eval_harmonic_dtheta(s: float, m: float, ell: int, grid: AngularGrid) -> np.ndarray:
    """d/dtheta of the sampled harmonic (exact, termwise)."""
    _check_mode(s, m, ell)
    j = ell - 0.5
    return math.sqrt(ell / (2.0 * math.pi)) * wigner_d_dtheta(j, -m, s, grid.theta)


def sphere_inner(f: AngularFunction, g: AngularFunction) -> complex:
    """Spherical inner product <f, g> = int conj(f) g dOmega for equal (s, m).

    The phi integral contributes 2 pi (the e^{i m phi} factors cancel).
    """
    if f.s != g.s or f.m != g.m:
        raise ValueError("inner product requires matching spin and m")
    return 2.0 * math.pi * np.sum(f.grid.w * np.conj(f.samples) * g.samples)


def _project(f: AngularFunction):
    """Coefficients of f against the harmonics of its own (s, m)."""
    grid = f.grid
    ells = grid.ells(f.s, f.m)
    coeffs = np.empty(len(ells), dtype=complex)
    basis = np.empty((len(ells), grid.x.size))
    for i, ell in enumerate(ells):
        y = eval_harmonic(f.s, f.m, ell, grid).samples.real
        basis[i] = y
        coeffs[i] = 2.0 * math.pi * np.sum(grid.w * y * f.samples)
    return ells, coeffs, basis


def _check_aliasing(f: AngularFunction, coeffs, basis, tol: float = 1e-8) -> None:
    recon = coeffs @ basis
    scale = max(np.max(np.abs(f.samples)), 1e-300)
    resid = np.max(np.abs(f.samples - recon)) / scale
    if resid > tol:
        raise AliasingError(
            f"input not band-limited below ell_max={f.grid.ell_max} "
            f"(reconstruction residual {resid:.3e})"
        )


def edth(f: AngularFunction) -> AngularFunction:
    """Spin-raising derivative: project, scale by the ladder coefficient,
    resynthesize at spin s+1."""
    ells, coeffs, basis = _project(f)
    _check_aliasing(f, coeffs, basis)
    out = np.zeros_like(f.samples)
    for ell, c in zip(ells, coeffs):
        rc, _ = edth_coefficients(f.s, ell)
        if rc != 0.0:
            out = out + c * rc * eval_harmonic(f.s + 1, f.m, ell, f.grid).samples
    return AngularFunction(s=f.s + 1, m=f.m, samples=out, grid=f.grid)


def edth_prime(f: AngularFunction) -> AngularFunction:
    """Spin-lowering derivative, coefficient route."""
    ells, coeffs, basis = _project(f)
    _check_aliasing(f, coeffs, basis)
    out = np.zeros_like(f.samples)
    for ell, c in zip(ells, coeffs):
        _, lc = edth_coefficients(f.s, ell)
        if lc != 0.0:
            out = out + c * lc * eval_harmonic(f.s - 1, f.m, ell, f.grid).samples
    return AngularFunction(s=f.s - 1, m=f.m, samples=out, grid=f.grid)


def edth_pointwise(f_samples, dtheta_samples, s, m, grid: AngularGrid):
    """Per-m pointwise form (d/dtheta - m csc - s cot) given an exact
    theta-derivative; oracle for the coefficient route."""
    sin_t = np.sqrt(1.0 - grid.x**2)
    cot_t = grid.x / sin_t
    return dtheta_samples - (m / sin_t) * f_samples - s * cot_t * f_samples


def edth_prime_pointwise(f_samples, dtheta_samples, s, m, grid: AngularGrid):
    """Per-m pointwise form (d/dtheta + m csc + s cot)."""
    sin_t = np.sqrt(1.0 - grid.x**2)
    cot_t = grid.x / sin_t
    return dtheta_samples + (m / sin_t) * f_samples + s * cot_t * f_samples


def teukolsky_angular(f: AngularFunction) -> AngularFunction:
    """Second-order angular operator; on an ell mode it multiplies by
    (|s| - 1/2)^2 - ell^2."""
    ells, coeffs, basis = _project(f)
    _check_aliasing(f, coeffs, basis)
    out = np.zeros_like(f.samples)
    for i, (ell, c) in enumerate(zip(ells, coeffs)):
        lam = (abs(f.s) - 0.5) ** 2 - ell**2
        out = out + c * lam * basis[i]
    return AngularFunction(s=f.s, m=f.m, samples=out, grid=f.grid)


def write_harmonic_csv(s: float, m: float, ells, grid: AngularGrid, path) -> None:
    """Optional dump of harmonic samples for plotting."""
    cols = [eval_harmonic(s, m, ell, grid).samples.real for ell in ells]
    with open(path, "w") as fh:
        fh.write("costheta," + ",".join(f"ell{ell}" for ell in ells) + "\n")
        for i in range(grid.x.size):
            fh.write("%.17g" % grid.x[i] + ","
                     + ",".join("%.17g" % c[i] for c in cols) + "\n")
