"""Closed-form reference solutions: two atoms, mean field, subradiant cascade."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .dynamics import SystemParams
from .pi_state import PIState
from .spin_algebra import DomainError, multiplicity

_SMALL = 1e-8


def _expm1_ratio(x: complex, t: float) -> complex:
    """(exp(x t) - 1) / x, continuous through x = 0."""
    if abs(x) < _SMALL:
        return t * (1 + x * t / 2 + (x * t) ** 2 / 6)
    if isinstance(x, complex):
        return np.expm1(x * t) / x
    return math.expm1(x * t) / x


@dataclass(frozen=True)
class TwoAtomState:
    """Tracked elements of an N = 2 state in the basis {|1,M>, |0,0>}."""

    p11: float = 0.0  # rho_1^{1,1}
    p00: float = 0.0  # rho_1^{0,0}
    pmm: float = 0.0  # rho_1^{-1,-1}
    singlet: float = 0.0  # rho_0^{0,0}
    c10: complex = 0j  # rho_1^{1,0}
    c1m: complex = 0j  # rho_1^{1,-1}
    c0m: complex = 0j  # rho_1^{0,-1}

    @classmethod
    def excited(cls) -> "TwoAtomState":
        return cls(p11=1.0)

    @classmethod
    def from_pi(cls, state: PIState) -> "TwoAtomState":
        if state.N != 2:
            raise DomainError("two-atom state needs N = 2")
        t, s = state.blocks[2], state.blocks[0]
        return cls(t[0, 0].real, t[1, 1].real, t[2, 2].real, s[0, 0].real,
                   complex(t[0, 1]), complex(t[0, 2]), complex(t[1, 2]))

    def to_pi(self) -> PIState:
        t = np.array([
            [self.p11, self.c10, self.c1m],
            [np.conj(self.c10), self.p00, self.c0m],
            [np.conj(self.c1m), np.conj(self.c0m), self.pmm],
        ], dtype=complex)
        return PIState(2, {2: t, 0: np.array([[self.singlet]], dtype=complex)})


def two_atom_solution(params: SystemParams, init: TwoAtomState, t: float) -> TwoAtomState:
    """Exact N = 2 evolution of all tracked elements.

    Coherence phases follow ``exp(-i ddd (M'^2 - M^2) t)``, the sign generated
    by the dipole-dipole Hamiltonian in the projected equations.
    """
    if params.N != 2:
        raise DomainError(f"two-atom solution needs N = 2, got N={params.N}")
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    g, dg, ddd = params.gamma, params.dgamma, params.ddd
    s = 2 * g + dg

    p11 = init.p11 * math.exp(-2 * (g + dg) * t)
    # (s/dg) (e^{dg t} - 1) and (dg/s) (e^{s t} - 1), written as products
    # with (e^{x t}-1)/x so that dg -> 0 and s -> 0 stay finite
    p00 = init.p00 * math.exp(-s * t) + s * p11 * _expm1_ratio(dg, t)
    singlet = init.singlet * math.exp(-dg * t) + dg * p11 * _expm1_ratio(s, t)
    pmm = (init.p11 + init.p00 + init.pmm + init.singlet) - p11 - p00 - singlet

    c10 = init.c10 * np.exp(-(4 * g + 3 * dg - 2j * ddd) * t / 2)
    c1m = init.c1m * np.exp(-(g + dg) * t)
    c0m = (init.c0m * np.exp(-(s + 2j * ddd) * t / 2)
           + c10 * s * _expm1_ratio(complex(g + dg, -2 * ddd), t))
    return TwoAtomState(p11, p00, pmm, singlet, complex(c10), complex(c1m), complex(c0m))


def two_atom_intensity(params: SystemParams, t: float) -> float:
    """Radiated energy rate of two atoms starting in |e,e>."""
    if params.N != 2:
        raise DomainError(f"two-atom intensity needs N = 2, got N={params.N}")
    g, dg = params.gamma, params.dgamma
    s = 2 * g + dg
    p11 = math.exp(-2 * (g + dg) * t)
    return p11 * (2 * (g + dg) + s * s * _expm1_ratio(dg, t) + dg * dg * _expm1_ratio(s, t))


# -- mean field ------------------------------------------------------------

def _check_mf(N: int, gamma: float) -> None:
    if N < 1:
        raise DomainError(f"N must be positive, got {N}")
    if gamma <= 0:
        raise DomainError(f"mean-field solution needs gamma > 0, got {gamma}")


def meanfield_trajectory(
    N: int, gamma: float, t_I: float, t, ddd: float = 0.0, theta0: float = 0.0
):
    """Excited fraction p(t) and phase theta(t) of the mean-field product state."""
    _check_mf(N, gamma)
    t = np.asarray(t, dtype=float)
    x = N * gamma * (t - t_I)
    p = expit(-x)
    log_p = -np.logaddexp(0.0, x)
    theta = theta0 + ddd / gamma * (log_p + np.logaddexp(0.0, -N * gamma * t_I))
    if p.ndim == 0:
        return float(p), float(theta)
    return p, theta


def meanfield_intensity(N: int, gamma: float, t_I: float, t):
    _check_mf(N, gamma)
    t = np.asarray(t, dtype=float)
    out = N * N * gamma / 4 / np.cosh(N * gamma * (t - t_I) / 2) ** 2
    return float(out) if out.ndim == 0 else out


def meanfield_height(N: int, gamma: float) -> float:
    _check_mf(N, gamma)
    return N * N * gamma / 4


def meanfield_delay_estimate(N: int, gamma: float) -> float:
    """Large-N delay estimate ln N / (N gamma)."""
    _check_mf(N, gamma)
    return math.log(N) / (N * gamma)


def meanfield_delay_ratio(dgamma: float) -> float:
    """t_I(dgamma) / t_I(0) = 1 / (1 - dgamma) in gamma0 units."""
    if not 0 <= dgamma < 1:
        raise DomainError(f"delay ratio needs 0 <= dgamma < 1, got {dgamma}")
    return 1.0 / (1.0 - dgamma)


# -- subradiant cascade ----------------------------------------------------

def _check_sub(N: int, twoJ0: int, twoJ: int | None, dgamma: float) -> None:
    multiplicity(N, twoJ0)
    if twoJ is not None:
        multiplicity(N, twoJ)
        if twoJ < twoJ0:
            raise DomainError(f"need J >= J0, got 2J={twoJ} < 2J0={twoJ0}")
    if dgamma < 0:
        raise DomainError(f"dgamma must be nonnegative, got {dgamma}")


def subradiant_population(N: int, twoJ0: int, twoJ: int, dgamma: float, t: float) -> float:
    """rho_J^{-J,-J}(t) starting from |J0, -J0> (uniform over multiplicity)."""
    _check_sub(N, twoJ0, twoJ, dgamma)
    n0 = (N - twoJ0) // 2  # N/2 - J0
    nJ = (N - twoJ) // 2  # N/2 - J
    k = (twoJ - twoJ0) // 2  # J - J0
    pref = math.factorial(n0) / (multiplicity(N, twoJ) * math.factorial(nJ) * math.factorial(k))
    if k == 0:
        return pref * math.exp(-dgamma * n0 * t)
    return pref * math.exp(-dgamma * n0 * t) * math.expm1(dgamma * t) ** k


def subradiant_intensity(N: int, twoJ0: int, dgamma: float, t: float) -> float:
    _check_sub(N, twoJ0, None, dgamma)
    return dgamma * (N - twoJ0) / 2 * math.exp(-dgamma * t)
