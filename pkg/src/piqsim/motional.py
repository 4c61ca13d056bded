"""Cooperative decay rate gamma and dipole shift Delta_dd from motional states.

Everything is in units of gamma0. Length scales are fixed per model: the
Gaussian and thermal-Bose models use the trap length l = 1 (so k0 = eta),
the Thomas-Fermi model uses the condensate radius R = 1 (k0 = x), and the
thermal cloud uses its width R = 1 (k0 = k0R).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Union

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import CubicSpline

from .spin_algebra import DomainError

import warnings


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, estimate: float | None = None):
        super().__init__(message if estimate is None else f"{message} (estimate {estimate:.10g})")
        self.estimate = estimate


class UnsupportedFeatureError(NotImplementedError):
    pass


class TransitionKind(str, Enum):
    PI = "pi"
    SIGMA = "sigma"


def angular_factors(alpha: float, kind: TransitionKind | str) -> tuple[float, float]:
    """Angular factors (p, q) for a pair axis at angle ``alpha`` to the quantization axis."""
    kind = TransitionKind(kind)
    c2 = math.cos(alpha) ** 2
    if kind is TransitionKind.PI:
        return 1.0 - c2, 1.0 - 3.0 * c2
    return 0.5 * (1.0 + c2), 0.5 * (3.0 * c2 - 1.0)


def sinc(x):
    """sin(x)/x with a series below |x| = 1e-3."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    safe = np.where(small, 1.0, x)
    out = np.where(small, 1.0 - x * x / 6.0 + x ** 4 / 120.0, np.sin(safe) / safe)
    return float(out) if out.ndim == 0 else out


def gamma_classical(k0r: float, alpha: float, kind: TransitionKind | str) -> float:
    """Pair decay rate of two atoms at fixed separation ``k0r``."""
    if k0r < 0:
        raise DomainError(f"k0r must be nonnegative, got {k0r}")
    p, q = angular_factors(alpha, kind)
    x = k0r
    if x < 1e-2:
        near = -1.0 / 3.0 + x * x / 30.0 - x ** 4 / 840.0 + x ** 6 / 45360.0
    else:
        near = math.cos(x) / x ** 2 - math.sin(x) / x ** 3
    return 1.5 * (p * sinc(x) + q * near)


def delta_classical(k0r: float, alpha: float, kind: TransitionKind | str) -> float:
    """Pair dipole-dipole shift; diverges as 1/(k0 r)^3 at short range."""
    if k0r < 1e-6:
        raise DomainError(f"delta_classical diverges as k0r -> 0; got k0r={k0r}")
    p, q = angular_factors(alpha, kind)
    x = k0r
    return 0.75 * (-p * math.cos(x) / x + q * (math.sin(x) / x ** 2 + math.cos(x) / x ** 3))


# -- closed forms ------------------------------------------------------------

def gamma_gaussian(eta: float) -> float:
    if eta < 0:
        raise DomainError(f"eta must be nonnegative, got {eta}")
    return math.exp(-eta * eta)


_TF_SERIES = (1.0, -1 / 14, 1 / 504, -1 / 33264, 1 / 3459456, -1 / 518918400)


def gamma_thomas_fermi(x: float) -> float:
    """225 (3x cos x + (x^2-3) sin x)^2 / x^10."""
    if x < 0:
        raise DomainError(f"x must be nonnegative, got {x}")
    if x < 0.2:
        # the bracket cancels to O(x^5); direct evaluation loses ~45 eps / x^4
        g = sum(c * x ** (2 * i) for i, c in enumerate(_TF_SERIES))
        return g * g
    return 225.0 * (3 * x * math.cos(x) + (x * x - 3) * math.sin(x)) ** 2 / x ** 10


def gamma_thermal_cloud(k0R: float) -> float:
    """Debye-Waller factor exp(-(k0 R)^2)."""
    if k0R < 0:
        raise DomainError(f"k0R must be nonnegative, got {k0R}")
    return math.exp(-k0R * k0R)


_MAX_TERMS = 1_000_000
_CHUNK = 4096


def _bose_terms(k: np.ndarray, beta_omega: float, z: float) -> np.ndarray:
    # z^(k-1) keeps the z -> 0 limit finite; the common factor z cancels
    with np.errstate(under="ignore"):
        return z ** (k - 1) / (-np.expm1(-k * beta_omega)) ** 3


def _bose_series(eta: float, beta_omega: float, z: float, tol: float):
    """Truncated bracket sums (signal, normalization) and the number of terms."""
    signal = norm = 0.0
    start = 1
    while start <= _MAX_TERMS:
        k = np.arange(start, start + _CHUNK, dtype=float)
        w = _bose_terms(k, beta_omega, z)
        with np.errstate(under="ignore"):
            damp = np.exp(-0.5 * eta * eta / np.tanh(0.5 * k * beta_omega))
        # z^k e^{3kb} / (1 - e^{kb})^3 rewritten as -z^k / (1 - e^{-kb})^3 to avoid overflow
        s_chunk, n_chunk = -w * damp, -w
        s_cum = np.cumsum(np.concatenate(([signal], s_chunk)))[1:]
        n_cum = np.cumsum(np.concatenate(([norm], n_chunk)))[1:]
        # stop once this term and the next are both below tol relative to the sum
        small = np.abs(n_chunk) <= tol * np.abs(n_cum)
        done = np.flatnonzero(small[:-1] & (np.abs(n_chunk[1:]) <= tol * np.abs(n_cum[:-1])))
        if done.size:
            i = done[0]
            return float(s_cum[i]), float(n_cum[i]), int(k[i])
        signal, norm = float(s_cum[-2]), float(n_cum[-2])
        start += _CHUNK - 1
    raise ConvergenceError(
        f"thermal Bose series did not converge within {_MAX_TERMS} terms", (signal / norm) ** 2
    )


def gamma_thermal_bose(eta: float, beta_omega: float, z: float, tol: float = 1e-15) -> float:
    """Off-diagonal rate of a trapped ideal Bose gas at fugacity ``z``."""
    if eta < 0:
        raise DomainError(f"eta must be nonnegative, got {eta}")
    if beta_omega <= 0:
        raise DomainError(f"beta_omega must be positive, got {beta_omega}")
    if not 0 <= z <= 1:
        raise DomainError(f"fugacity must lie in [0, 1], got {z}")
    if z == 1:
        return gamma_gaussian(eta)
    signal, norm, _ = _bose_series(eta, beta_omega, z, tol)
    return (signal / norm) ** 2


# -- motional models ---------------------------------------------------------

@dataclass(frozen=True)
class CustomIsotropic:
    """Isotropic one-body density rho1(r) with 4 pi int rho1 r^2 dr = 1.

    ``rmax`` bounds the support used by the quadratures; ``breakpoints`` are
    radii where rho1 or its derivative is not smooth.
    """

    density: Callable[[float], float]
    k0: float
    rmax: float
    breakpoints: tuple[float, ...] = ()
    label: str = "custom"

    def __post_init__(self):
        if self.k0 < 0:
            raise DomainError(f"k0 must be nonnegative, got {self.k0}")
        if not self.rmax > 0:
            raise DomainError(f"rmax must be positive, got {self.rmax}")

    @classmethod
    def from_table(cls, r, rho, k0: float, normalize: bool = False, tol: float = 1e-8):
        r = np.asarray(r, dtype=float)
        rho = np.asarray(rho, dtype=float)
        if r.ndim != 1 or r.shape != rho.shape or r.size < 4:
            raise DomainError("tabulated density needs matching 1-D r and rho with >= 4 points")
        if np.any(np.diff(r) <= 0):
            raise DomainError("tabulated r must be strictly increasing")
        if r[0] < 0 or np.any(rho < 0):
            raise DomainError("tabulated density must have r >= 0 and rho1 >= 0")
        spline = CubicSpline(r, rho)
        rmax = float(r[-1])

        def dens(x, _s=spline, _lo=r[0], _hi=rmax):
            if x < _lo or x > _hi:
                return 0.0
            return max(float(_s(x)), 0.0)

        model = cls(dens, k0, rmax, label="table")
        total = model.normalization()
        if normalize:
            model = cls(lambda x, _d=dens, _n=total: _d(x) / _n, k0, rmax, label="table")
        elif abs(total - 1.0) > tol:
            raise DomainError(f"tabulated density integrates to {total:.12g}, not 1")
        return model

    def _quad(self, f, a: float = 0.0, b: float | None = None) -> float:
        b = self.rmax if b is None else b
        pts = [p for p in self.breakpoints if a < p < b] or None
        with warnings.catch_warnings():
            warnings.simplefilter("error", IntegrationWarning)
            try:
                val, _err = quad(f, a, b, points=pts, epsabs=1e-13, epsrel=1e-12, limit=1000)
            except IntegrationWarning as exc:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", IntegrationWarning)
                    val, _err = quad(f, a, b, points=pts, epsabs=1e-13, epsrel=1e-12, limit=1000)
                raise ConvergenceError(f"quadrature did not converge: {exc}", val) from None
        return val

    def normalization(self) -> float:
        return 4 * math.pi * self._quad(lambda r: self.density(r) * r * r)

    def with_k0(self, k0: float) -> "CustomIsotropic":
        return CustomIsotropic(self.density, k0, self.rmax, self.breakpoints, self.label)


@dataclass(frozen=True)
class GaussianGround:
    eta: float

    def gamma(self) -> float:
        return gamma_gaussian(self.eta)

    def to_density(self) -> CustomIsotropic:
        return _gaussian_density(1.0, self.eta, "gaussian")

    def params(self) -> dict:
        return {"eta": self.eta}


@dataclass(frozen=True)
class ThomasFermi:
    x: float

    @classmethod
    def from_trap(cls, eta: float, n_atoms: int, a_over_l: float) -> "ThomasFermi":
        """x = eta (60 N a / l)^(1/5)."""
        return cls(eta * (60.0 * n_atoms * a_over_l) ** 0.2)

    def gamma(self) -> float:
        return gamma_thomas_fermi(self.x)

    def to_density(self) -> CustomIsotropic:
        norm = 15.0 / (8.0 * math.pi)  # 4 pi int_0^1 (1 - r^2) r^2 dr = 8 pi / 15

        def dens(r):
            return norm * (1.0 - r * r) if r <= 1.0 else 0.0

        return CustomIsotropic(dens, self.x, 1.0, label="thomas-fermi")

    def params(self) -> dict:
        return {"x": self.x}


@dataclass(frozen=True)
class ThermalBose:
    eta: float
    beta_omega: float
    z: float

    def gamma(self, tol: float = 1e-15) -> float:
        return gamma_thermal_bose(self.eta, self.beta_omega, self.z, tol)

    def to_density(self, tol: float = 1e-15) -> CustomIsotropic:
        """Truncated finite-temperature density (sum of Gaussians, l = 1)."""
        if self.z == 1:
            return _gaussian_density(1.0, self.eta, "thermal-bose")
        _, _, kmax = _bose_series(0.0, self.beta_omega, self.z, tol)
        k = np.arange(1, kmax + 1, dtype=float)
        b = self.beta_omega
        with np.errstate(under="ignore"):
            amp = self.z ** (k - 1) / (-np.expm1(-2 * k * b)) ** 1.5
        inv_var = np.tanh(0.5 * k * b)
        norm = float(np.sum(_bose_terms(k, b, self.z)))
        pref = 1.0 / (norm * (2 * math.pi) ** 1.5)
        widest = 1.0 / math.sqrt(inv_var[0])

        def dens(r):
            return pref * float(np.sum(amp * np.exp(-0.5 * r * r * inv_var)))

        return CustomIsotropic(dens, self.eta, 12.0 * widest, label="thermal-bose")

    def params(self) -> dict:
        return {"eta": self.eta, "beta_omega": self.beta_omega, "z": self.z}


@dataclass(frozen=True)
class ThermalCloud:
    k0R: float

    def gamma(self) -> float:
        return gamma_thermal_cloud(self.k0R)

    def to_density(self) -> CustomIsotropic:
        return _gaussian_density(1.0, self.k0R, "thermal-cloud")

    def params(self) -> dict:
        return {"k0R": self.k0R}


MotionalModel = Union[GaussianGround, ThomasFermi, ThermalBose, ThermalCloud, CustomIsotropic]


def _gaussian_density(sigma: float, k0: float, label: str) -> CustomIsotropic:
    pref = 1.0 / (2 * math.pi * sigma * sigma) ** 1.5

    def dens(r):
        return pref * math.exp(-0.5 * r * r / (sigma * sigma))

    return CustomIsotropic(dens, k0, 12.0 * sigma, label=label)


def _as_density(model: MotionalModel) -> CustomIsotropic:
    return model if isinstance(model, CustomIsotropic) else model.to_density()


def gamma_from_density(model: MotionalModel) -> float:
    """Squared spherically averaged characteristic function of rho1 at k0."""
    dens = _as_density(model)
    k0 = dens.k0
    ft = 4 * math.pi * dens._quad(lambda r: dens.density(r) * r * r * sinc(k0 * r))
    return ft * ft


def _cumulative_first_moment(dens: CustomIsotropic, n: int = 4001):
    """Spline of Q(t) = int_0^t u rho1(u) du on [0, 2 rmax]."""
    grid = np.linspace(0.0, dens.rmax, n)
    pieces = [dens._quad(lambda u: u * dens.density(u), a, b) for a, b in zip(grid[:-1], grid[1:])]
    q = np.concatenate([[0.0], np.cumsum(pieces)])
    spline = CubicSpline(grid, q)
    top = q[-1]

    def Q(t):
        return top if t >= dens.rmax else float(spline(t))

    return Q


def delta_from_density(model: MotionalModel) -> float:
    """Dipole shift of an isotropic product state.

    The pair kernel is averaged over orientations, which removes the
    near-field q-term and leaves -cos(k0 s) / (2 k0 s), integrated against
    the relative-distance distribution of two independent atoms.
    """
    if isinstance(model, ThermalBose):
        raise UnsupportedFeatureError("Delta_dd is not available for the thermal Bose model")
    dens = _as_density(model)
    k0 = dens.k0
    if k0 <= 0:
        raise DomainError("Delta_dd diverges for k0 -> 0 (colocated atoms)")
    Q = _cumulative_first_moment(dens)
    R = dens.rmax
    inner_pts = tuple(dens.breakpoints)

    def H(s):
        # int_0^inf r rho1(r) [Q(r+s) - Q(|r-s|)] dr
        def f(r):
            return r * dens.density(r) * (Q(r + s) - Q(abs(r - s)))
        pts = [p for p in (s, *inner_pts) if 0 < p < R] or None
        val, _ = quad(f, 0.0, R, points=pts, epsabs=1e-13, epsrel=1e-11, limit=500)
        return val

    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            outer, _ = quad(lambda s: math.cos(k0 * s) * H(s), 0.0, 2 * R,
                            points=[R], epsabs=1e-12, epsrel=1e-10, limit=500)
        except IntegrationWarning as exc:
            raise ConvergenceError(f"Delta_dd quadrature did not converge: {exc}") from None
    return -4 * math.pi ** 2 / k0 * outer


def gamma_of(model: MotionalModel) -> float:
    """Closed form where one exists, quadrature for custom densities."""
    if isinstance(model, CustomIsotropic):
        return gamma_from_density(model)
    return model.gamma()
