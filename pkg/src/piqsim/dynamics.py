"""Projected master equation for permutation-invariant states.

Units: the single-atom rate gamma0 is 1, so ``gamma + dgamma == 1`` and all
times are in units of 1/gamma0.

The equation of motion for an element rho_J^{M,M'} is

    d/dt rho_J^{M,M'} = -G1 rho_J^{M,M'} + G2 rho_J^{M+1,M'+1}
                        + G3 rho_{J+1}^{M+1,M'+1} + G4 rho_{J-1}^{M+1,M'+1}

and :class:`RateTable` stores G1..G4 indexed by the *target* element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.integrate import RK45, solve_ivp
from scipy.optimize import bisect

from .pi_state import PIState, degeneracy_diagonal, m_diagonal
from .spin_algebra import (
    DomainError,
    alpha,
    block_list,
    ladder_coefficients,
    m_values,
    multiplicity,
)

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10


class IntegrationError(RuntimeError):
    def __init__(self, message: str, last_time: float):
        super().__init__(f"{message} (last good time t={last_time:.6g})")
        self.last_time = last_time


@dataclass(frozen=True)
class SystemParams:
    N: int
    gamma: float
    dgamma: float
    ddd: float = 0.0

    def __post_init__(self):
        if self.N < 1:
            raise DomainError(f"N must be positive, got {self.N}")
        if abs(self.gamma + self.dgamma - 1.0) > 1e-12:
            raise DomainError(
                f"gamma + dgamma must equal 1 (gamma0 units), got {self.gamma + self.dgamma!r}"
            )
        if self.dgamma < -1e-12:
            raise DomainError(f"Markov bound violated: dgamma={self.dgamma} < 0")
        if self.N > 1 and self.dgamma > self.N / (self.N - 1) + 1e-12:
            raise DomainError(
                f"Markov bound violated: dgamma={self.dgamma} > N/(N-1)={self.N / (self.N - 1)}"
            )

    @classmethod
    def from_dgamma(cls, N: int, dgamma: float, ddd: float = 0.0) -> "SystemParams":
        return cls(N, 1.0 - dgamma, dgamma, ddd)

    @classmethod
    def from_gamma(cls, N: int, gamma: float, ddd: float = 0.0) -> "SystemParams":
        return cls(N, gamma, 1.0 - gamma, ddd)


@dataclass(frozen=True)
class PulseMetrics:
    A_I: float
    t_I: float
    emitted: float
    I0: float


class RateTable:
    """Precomputed G1..G4 for one parameter set; read-only after construction.

    ``g1[twoJ]`` is complex, ``g2/g3/g4[twoJ]`` are real; each is a
    ``(2J+1) x (2J+1)`` array aligned with the target block. Entries whose
    source element does not exist are exactly zero.
    """

    def __init__(self, params: SystemParams):
        self.params = params
        N, g, dg, ddd = params.N, params.gamma, params.dgamma, params.ddd
        self.g1: dict[int, np.ndarray] = {}
        self.g2: dict[int, np.ndarray] = {}
        self.g3: dict[int, np.ndarray] = {}
        self.g4: dict[int, np.ndarray] = {}
        for b in block_list(N):
            tj, dim = b.twoJ, b.dim
            J = tj / 2
            ms = np.array(m_values(tj)) / 2
            ladders = [ladder_coefficients(tj, tm) for tm in m_values(tj)]
            a_plus = np.array([lc[0] for lc in ladders])
            a_minus = np.array([lc[1] for lc in ladders])
            d_J = multiplicity(N, tj)

            self.g1[tj] = (
                1j * ddd * (ms[None, :] ** 2 - ms[:, None] ** 2)
                + 0.5 * g * (a_minus[:, None] ** 2 + a_minus[None, :] ** 2)
                + 0.5 * dg * (N + ms[:, None] + ms[None, :])
            )

            pref = np.outer(a_plus, a_plus)
            g2 = np.zeros((dim, dim))
            if tj > 0:
                same = g + dg / (2 * J) * (1 + alpha(N, tj + 2) * (2 * J + 1) / (d_J * (J + 1)))
                g2 = pref * same
            self.g2[tj] = g2

            g3 = np.zeros((dim, dim))
            if tj + 2 <= N and dg != 0.0:
                b_up = np.array([ladder_coefficients(tj + 2, tm + 2)[2] for tm in m_values(tj)])
                g3 = dg * np.outer(b_up, b_up) * alpha(N, tj + 2) / (2 * (J + 1) * d_J)
            self.g3[tj] = g3

            g4 = np.zeros((dim, dim))
            if tj - 2 >= 0 and dg != 0.0:
                d_dn = np.array([ladder_coefficients(tj - 2, tm + 2)[3] for tm in m_values(tj)])
                # sources must lie inside the J-1 block: M+1 <= J-1
                d_dn[:2] = 0.0
                g4 = dg * np.outer(d_dn, d_dn) * alpha(N, tj) / (2 * J * d_J)
            self.g4[tj] = g4

    def coefficient(self, kind: int, twoJ: int, twoM: int, twoMp: int) -> complex:
        """Rate ``G<kind>`` for the target element (J, M, M')."""
        table = {1: self.g1, 2: self.g2, 3: self.g3, 4: self.g4}[kind]
        a, b = (twoJ - twoM) // 2, (twoJ - twoMp) // 2
        return table[twoJ][a, b]

    @cached_property
    def offsets(self) -> dict[int, int]:
        out, pos = {}, 0
        for b in block_list(self.params.N):
            out[b.twoJ] = pos
            pos += b.dim * b.dim
        return out

    @cached_property
    def diagonal_positions(self) -> np.ndarray:
        """Indices of the populations inside the flat state vector."""
        return np.concatenate([
            self.offsets[b.twoJ] + np.arange(b.dim) * (b.dim + 1)
            for b in block_list(self.params.N)
        ])

    @cached_property
    def liouvillian(self) -> sparse.csr_matrix:
        """Sparse generator acting on ``PIState.to_vector()``."""
        N = self.params.N
        rows, cols, vals = [], [], []
        off = self.offsets
        for b in block_list(N):
            tj, dim = b.twoJ, b.dim
            a, c = np.meshgrid(np.arange(dim), np.arange(dim), indexing="ij")
            tgt = off[tj] + a * dim + c
            rows.append(tgt.ravel())
            cols.append(tgt.ravel())
            vals.append(-self.g1[tj].ravel())
            src = tgt[1:, 1:] - dim - 1
            rows.append(tgt[1:, 1:].ravel())
            cols.append(src.ravel())
            vals.append(self.g2[tj][1:, 1:].ravel().astype(complex))
            if tj + 2 <= N:
                up = dim + 2
                rows.append(tgt.ravel())
                cols.append((off[tj + 2] + a * up + c).ravel())
                vals.append(self.g3[tj].ravel().astype(complex))
            if tj >= 2:
                dn = dim - 2
                rows.append(tgt[2:, 2:].ravel())
                cols.append((off[tj - 2] + (a[2:, 2:] - 2) * dn + (c[2:, 2:] - 2)).ravel())
                vals.append(self.g4[tj][2:, 2:].ravel().astype(complex))
        n = sum(b.dim ** 2 for b in block_list(N))
        mat = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        )
        mat.eliminate_zeros()
        return mat

    @cached_property
    def population_generator(self) -> sparse.csr_matrix:
        """Real sparse generator acting on ``PIState.diagonal_vector()``."""
        N = self.params.N
        dpos, pos = {}, 0
        for b in block_list(N):
            dpos[b.twoJ] = pos
            pos += b.dim
        rows, cols, vals = [], [], []
        for b in block_list(N):
            tj, dim = b.twoJ, b.dim
            idx = dpos[tj] + np.arange(dim)
            rows.append(idx)
            cols.append(idx)
            vals.append(-np.diag(self.g1[tj]).real)
            rows.append(idx[1:])
            cols.append(idx[1:] - 1)
            vals.append(np.diag(self.g2[tj])[1:])
            if tj + 2 <= N:
                rows.append(idx)
                cols.append(dpos[tj + 2] + np.arange(dim))
                vals.append(np.diag(self.g3[tj]))
            if tj >= 2:
                rows.append(idx[2:])
                cols.append(dpos[tj - 2] + np.arange(dim - 2))
                vals.append(np.diag(self.g4[tj])[2:])
        mat = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(pos, pos)
        )
        mat.eliminate_zeros()
        return mat


def build_rate_table(params: SystemParams) -> RateTable:
    return RateTable(params)


def rhs(state: PIState, table: RateTable) -> PIState:
    """Time derivative of ``state`` under the projected master equation."""
    N = table.params.N
    if state.N != N:
        raise DomainError(f"state has N={state.N}, rate table has N={N}")
    out = {}
    for b in block_list(N):
        tj = b.twoJ
        rho = state.blocks[tj]
        d = -table.g1[tj] * rho
        d[1:, 1:] += table.g2[tj][1:, 1:] * rho[:-1, :-1]
        if tj + 2 <= N:
            d += table.g3[tj] * state.blocks[tj + 2][: b.dim, : b.dim]
        if tj >= 2:
            d[2:, 2:] += table.g4[tj][2:, 2:] * state.blocks[tj - 2]
        out[tj] = d
    return PIState(N, out)


# -- observables ---------------------------------------------------------

def intensity_weights(params: SystemParams) -> np.ndarray:
    """d_N^J c_J^M on the diagonal layout, so that I = weights @ populations."""
    N = params.N
    J = np.concatenate([np.full(b.dim, b.twoJ / 2) for b in block_list(N)])
    M = m_diagonal(N)
    c = (J + M) * (J - M + 1) * params.gamma + (M + N / 2) * params.dgamma
    return degeneracy_diagonal(N) * c


def intensity_derivative_weights(params: SystemParams) -> np.ndarray:
    N, g, dg = params.N, params.gamma, params.dgamma
    J = np.concatenate([np.full(b.dim, b.twoJ / 2) for b in block_list(N)])
    M = m_diagonal(N)
    ct = 2 * (J + M) * (J - M + 1) * ((M - 1) * g - dg) * g - (M + N / 2) * dg ** 2
    return degeneracy_diagonal(N) * ct


def intensity(state: PIState, params: SystemParams) -> float:
    """Radiated energy rate I = -d<Jz>/dt."""
    return float(intensity_weights(params) @ state.diagonal_vector())


def intensity_derivative(state: PIState, params: SystemParams) -> float:
    return float(intensity_derivative_weights(params) @ state.diagonal_vector())


# -- time evolution ------------------------------------------------------

@dataclass
class Trajectory:
    params: SystemParams
    t: np.ndarray
    states: list[PIState]

    def intensity(self) -> np.ndarray:
        w = intensity_weights(self.params)
        return np.array([w @ s.diagonal_vector() for s in self.states])

    def jz(self) -> np.ndarray:
        w = degeneracy_diagonal(self.params.N) * m_diagonal(self.params.N)
        return np.array([w @ s.diagonal_vector() for s in self.states])

    def trace(self) -> np.ndarray:
        w = degeneracy_diagonal(self.params.N)
        return np.array([w @ s.diagonal_vector() for s in self.states])


def evolve(
    params: SystemParams,
    state0: PIState,
    t_end: float,
    reltol: float = DEFAULT_RTOL,
    abstol: float = DEFAULT_ATOL,
    sample_grid=None,
    *,
    table: RateTable | None = None,
    populations_only: bool | None = None,
    method: str = "RK45",
) -> Trajectory:
    """Integrate the projected master equation from ``state0`` to ``t_end``.

    Populations and coherences are integrated as two separate systems. With
    ``populations_only`` (default: whenever ``state0`` is diagonal) the
    coherences are skipped and the returned states are diagonal.
    """
    if t_end <= 0:
        raise DomainError(f"t_end must be positive, got {t_end}")
    if reltol <= 0 or abstol <= 0:
        raise DomainError("tolerances must be positive")
    if state0.N != params.N:
        raise DomainError(f"state has N={state0.N}, params have N={params.N}")
    table = table or build_rate_table(params)
    if populations_only is None:
        populations_only = state0.is_diagonal()
    grid = np.linspace(0.0, t_end, 101) if sample_grid is None else np.asarray(sample_grid, float)

    def integrate(gen, y0):
        sol = solve_ivp(
            lambda t, y: gen @ y, (0.0, t_end), y0, method=method,
            t_eval=grid, rtol=reltol, atol=abstol,
        )
        if sol.status < 0:
            raise IntegrationError(sol.message, float(sol.t[-1]) if sol.t.size else 0.0)
        return sol

    # populations never see the coherences, so they are integrated on their
    # own; the step sequence (and hence I(t)) is then independent of ddd
    pops = integrate(table.population_generator, state0.diagonal_vector())
    if populations_only:
        states = [PIState.from_diagonal(params.N, y) for y in pops.y.T]
    else:
        diag = table.diagonal_positions
        off = np.setdiff1d(np.arange(table.liouvillian.shape[0]), diag)
        coh = integrate(table.liouvillian[off][:, off].tocsr(), state0.to_vector()[off])
        full = np.empty((table.liouvillian.shape[0], grid.size), dtype=complex)
        full[diag] = pops.y
        full[off] = coh.y
        states = [PIState.from_vector(params.N, y) for y in full.T]
    return Trajectory(params, pops.t, states)


def pulse_metrics(
    params: SystemParams,
    initial: PIState,
    horizon: float = 10.0,
    *,
    extend: bool = True,
    reltol: float = DEFAULT_RTOL,
    abstol: float = DEFAULT_ATOL,
    table: RateTable | None = None,
    max_time: float = 1e6,
) -> PulseMetrics:
    """Pulse height, delay time and emitted energy of one trajectory.

    Integration runs over ``[0, horizon]``; with ``extend`` it continues until
    ``I < 1e-8 N`` so that ``emitted`` covers the whole decay. The maximum of
    I is located at a +/- sign change of dI/dt, refined by bisection on the
    dense output of the step that brackets it.
    """
    if initial.N != params.N:
        raise DomainError(f"state has N={initial.N}, params have N={params.N}")
    N = params.N
    table = table or build_rate_table(params)
    if not initial.is_diagonal():
        # only populations enter I, and they evolve independently of coherences
        initial = PIState.from_diagonal(N, initial.diagonal_vector())
    gen = table.population_generator
    w_i = intensity_weights(params)
    w_di = intensity_derivative_weights(params)
    n = gen.shape[0]

    def f(t, y):
        dy = np.empty_like(y)
        dy[:n] = gen @ y[:n]
        dy[n] = w_i @ y[:n]
        return dy

    y0 = np.append(initial.diagonal_vector(), 0.0)
    I0 = float(w_i @ y0[:n])
    best_I, best_t = I0, 0.0
    stop_level = 1e-8 * N

    solver = RK45(f, 0.0, y0, max_time, rtol=reltol, atol=abstol)
    prev_t, prev_slope = 0.0, float(w_di @ y0[:n])
    while True:
        msg = solver.step()
        if solver.status == "failed":
            raise IntegrationError(msg or "step failed", prev_t)
        t, y = solver.t, solver.y
        slope = float(w_di @ y[:n])
        if prev_slope > 0 and slope <= 0:
            dense = solver.dense_output()

            def dslope(s):
                return float(w_di @ dense(s)[:n])

            lo, hi = dslope(prev_t), dslope(t)
            if lo > 0 > hi:
                t_peak = bisect(dslope, prev_t, t, xtol=1e-7)
            else:
                # the interpolant and the step values disagree on a sign near zero
                t_peak = prev_t if w_i @ dense(prev_t)[:n] >= w_i @ y[:n] else t
            I_peak = float(w_i @ dense(t_peak)[:n])
            if I_peak > best_I:
                best_I, best_t = I_peak, t_peak
        prev_t, prev_slope = t, slope
        if t >= horizon and (not extend or w_i @ y[:n] < stop_level):
            break
        if solver.status == "finished":
            raise IntegrationError(f"I did not drop below {stop_level:g} before t={max_time:g}", t)

    eps = 1e-9 * N * N
    A_I = best_I - I0
    if A_I <= eps:
        A_I, best_t = 0.0, 0.0
    return PulseMetrics(A_I=A_I, t_I=best_t, emitted=float(solver.y[n]), I0=I0)


def critical_dgamma_formula(N: int) -> float:
    """Sufficient-condition bound 1 - 1/sqrt(N-1) on dgamma for a pulse."""
    if N < 2:
        raise DomainError(f"critical dgamma needs N >= 2, got {N}")
    return 1.0 - 1.0 / math.sqrt(N - 1)


def critical_dgamma_numeric(N: int, grid_tol: float = 1e-3, horizon: float = 10.0) -> float:
    """Smallest dgamma at which the superradiant pulse of |e..e> vanishes.

    Bisection on the predicate ``A_I > 1e-9 N^2`` over dgamma in [0, 1].
    """
    if N < 2:
        raise DomainError(f"critical dgamma needs N >= 2, got {N}")
    state = PIState(N)
    state.blocks[N][0, 0] = 1.0

    def has_pulse(dg: float) -> bool:
        p = SystemParams.from_dgamma(N, dg)
        return pulse_metrics(p, state, horizon, extend=False).A_I > 0

    lo, hi = 0.0, 1.0
    if not has_pulse(lo):
        return 0.0
    while hi - lo > grid_tol:
        mid = 0.5 * (lo + hi)
        if has_pulse(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
