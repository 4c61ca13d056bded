"""Brute-force 2^N Lindblad simulator used to cross-check the PI solver.

Single-site basis: index 0 is |e>, index 1 is |g>; site 1 is the most
significant bit, so |e,e> is the first basis vector for N = 2.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp

from .dynamics import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    IntegrationError,
    SystemParams,
    evolve,
)
from .pi_state import PIState, init_dicke
from .spin_algebra import DomainError, block_list, m_values, multiplicity

MAX_N = 6


class CapacityError(ValueError):
    """Requested system is too large for the dense full-space oracle."""


class NotPermutationInvariantError(ValueError):
    pass


def _check_n(N: int) -> None:
    if N < 1:
        raise DomainError(f"N must be positive, got {N}")
    if N > MAX_N:
        raise CapacityError(f"full-space oracle supports N <= {MAX_N}, got N={N}")


_SM = sparse.csr_matrix(np.array([[0.0, 0.0], [1.0, 0.0]]))  # |g><e|
_SZ = sparse.csr_matrix(np.diag([0.5, -0.5]))


def site_operator(op, site: int, N: int) -> sparse.csr_matrix:
    mats = [sparse.identity(2, format="csr")] * N
    mats[site] = op
    out = mats[0]
    for m in mats[1:]:
        out = sparse.kron(out, m, format="csr")
    return out


@lru_cache(maxsize=None)
def lowering_operators(N: int) -> tuple[sparse.csr_matrix, ...]:
    return tuple(site_operator(_SM, i, N) for i in range(N))


@lru_cache(maxsize=None)
def collective_jz(N: int) -> np.ndarray:
    return sum(site_operator(_SZ, i, N) for i in range(N)).toarray()


def kossakowski_spectrum(N: int, gamma: float, dgamma: float) -> tuple[float, float, int]:
    """Eigenvalues of the N x N decay-rate matrix (1 on the diagonal, gamma off it).

    Returns ``(lambda1, lambda2, mult2)`` where lambda1 belongs to the uniform
    eigenvector and lambda2 is the (N-1)-fold eigenvalue.
    """
    SystemParams(N, gamma, dgamma)
    K = np.full((N, N), gamma) + np.eye(N) * (1.0 - gamma)
    w, v = np.linalg.eigh(K)
    uniform = np.ones(N) / np.sqrt(N)
    i1 = int(np.argmax(np.abs(uniform @ v)))
    lam1 = float(w[i1])
    rest = np.delete(w, i1)
    if rest.size == 0:
        return lam1, 0.0, 0
    lam2 = float(np.mean(rest))
    mult2 = int(np.sum(np.abs(w - lam2) < 1e-9)) - (1 if abs(lam1 - lam2) < 1e-9 else 0)
    return lam1, lam2, mult2


def _lindblad_super(L: sparse.spmatrix, rate: complex = 1.0) -> sparse.csr_matrix:
    """Superoperator of rate*(L rho L^+ - {L^+L, rho}/2) on row-major vec(rho)."""
    n = L.shape[0]
    eye = sparse.identity(n, format="csr")
    Ld = L.conj().T
    LdL = Ld @ L
    # row-major vec: A rho B -> kron(A, B^T)
    return rate * (
        sparse.kron(L, L.conj(), format="csr")
        - 0.5 * sparse.kron(LdL, eye, format="csr")
        - 0.5 * sparse.kron(eye, LdL.T, format="csr")
    )


def _sandwich_super(A, B) -> sparse.csr_matrix:
    """Superoperator of rho -> A rho B on row-major vec(rho)."""
    return sparse.kron(A, B.T, format="csr")


def dipole_hamiltonian(N: int, ddd: float) -> sparse.csr_matrix:
    sm = lowering_operators(N)
    dim = 2 ** N
    H = sparse.csr_matrix((dim, dim), dtype=complex)
    for i in range(N):
        for j in range(N):
            if i != j:
                H = H + ddd * (sm[i].T @ sm[j])
    return H


def standard_liouvillian(params: SystemParams) -> sparse.csr_matrix:
    """Full Liouvillian in standard form, built from single-site operators."""
    N = params.N
    _check_n(N)
    dim = 2 ** N
    eye = sparse.identity(dim, format="csr")
    sm = lowering_operators(N)
    H = dipole_hamiltonian(N, params.ddd)
    L = -1j * (sparse.kron(H, eye, format="csr") - sparse.kron(eye, H.T, format="csr"))
    for i in range(N):
        for j in range(N):
            rate = 1.0 if i == j else params.gamma
            if rate == 0:
                continue
            smj, spi = sm[j], sm[i].T
            prod = spi @ smj
            L = L + rate * (
                _sandwich_super(smj, spi)
                - 0.5 * _sandwich_super(prod, eye)
                - 0.5 * _sandwich_super(eye, prod)
            )
    return L.tocsr()


def lindblad_form_dissipator(params: SystemParams) -> sparse.csr_matrix:
    """Dissipator from the diagonalised decay matrix.

    One collective channel J-/sqrt(N) with rate Gamma1 = N gamma + dgamma and
    N-1 channels with rate dgamma built on the discrete-Fourier vectors
    orthogonal to the uniform vector.
    """
    N = params.N
    _check_n(N)
    sm = lowering_operators(N)
    jm = sum(sm)
    gamma1 = N * params.gamma + params.dgamma
    D = _lindblad_super(jm / np.sqrt(N), gamma1)
    j = np.arange(N)
    for ell in range(1, N):
        v = np.exp(2j * np.pi * ell * j / N) / np.sqrt(N)
        F = sum(v[k] * sm[k] for k in range(N))
        D = D + _lindblad_super(F, params.dgamma)
    return D.tocsr()


def standard_dissipator(params: SystemParams) -> sparse.csr_matrix:
    return standard_liouvillian(SystemParams(params.N, params.gamma, params.dgamma, 0.0))


@dataclass
class FullState:
    N: int
    rho: np.ndarray

    def __post_init__(self):
        _check_n(self.N)
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.shape != (2 ** self.N, 2 ** self.N):
            raise DomainError(f"density matrix shape {self.rho.shape} does not match N={self.N}")


def full_rhs(state: FullState, params: SystemParams) -> FullState:
    _check_n(params.N)
    L = _liouvillian_cached(params)
    return FullState(state.N, (L @ state.rho.ravel()).reshape(state.rho.shape))


@lru_cache(maxsize=64)
def _liouvillian_cached(params: SystemParams) -> sparse.csr_matrix:
    return standard_liouvillian(params)


# -- coupled spin basis --------------------------------------------------

@lru_cache(maxsize=None)
def coupled_basis(N: int) -> dict[tuple[int, int], np.ndarray]:
    """Vectors |J, M, k> of N spins, keyed by (twoJ, k).

    Each value is a ``(2J+1, 2^N)`` array whose row ``a`` is the state with
    M = J - a. Paths are built by adding one spin at a time; k enumerates the
    Bratteli paths in lexicographic order of their intermediate 2J sequence.
    """
    _check_n(N)
    up = np.array([1.0, 0.0])
    dn = np.array([0.0, 1.0])
    # one spin: path (1,)
    paths: dict[tuple[int, ...], np.ndarray] = {(1,): np.array([up, dn])}
    for n in range(2, N + 1):
        new: dict[tuple[int, ...], np.ndarray] = {}
        for path, vecs in paths.items():
            tj1 = path[-1]
            j1 = tj1 / 2
            for tj in (tj1 + 1, tj1 - 1):
                if tj < 0:
                    continue
                rows = []
                for tm in m_values(tj):
                    M = tm / 2
                    v = np.zeros(2 ** n)
                    # |j1, M-1/2> (x) |e>
                    if abs(tm - 1) <= tj1:
                        c = _cg_half(j1, tj, M, +1)
                        v += c * np.kron(vecs[(tj1 - (tm - 1)) // 2], up)
                    if abs(tm + 1) <= tj1:
                        c = _cg_half(j1, tj, M, -1)
                        v += c * np.kron(vecs[(tj1 - (tm + 1)) // 2], dn)
                    rows.append(v)
                new[path + (tj,)] = np.array(rows)
        paths = new
    out: dict[tuple[int, int], np.ndarray] = {}
    counters: dict[int, int] = {}
    for path in sorted(paths):
        tj = path[-1]
        k = counters.get(tj, 0)
        out[(tj, k)] = paths[path]
        counters[tj] = k + 1
    return out


def _cg_half(j1: float, twoJ: int, M: float, sign: int) -> float:
    """<j1, M - s/2; 1/2, s/2 | J, M> for coupling spin j1 with a spin 1/2."""
    J = twoJ / 2
    if J == j1 + 0.5:
        if sign > 0:
            return np.sqrt((j1 + M + 0.5) / (2 * j1 + 1))
        return np.sqrt((j1 - M + 0.5) / (2 * j1 + 1))
    if sign > 0:
        return -np.sqrt((j1 - M + 0.5) / (2 * j1 + 1))
    return np.sqrt((j1 + M + 0.5) / (2 * j1 + 1))


def embed_pi_state(state: PIState) -> FullState:
    """Map a PI state to the full space as the direct sum of identical copies."""
    N = state.N
    basis = coupled_basis(N)
    rho = np.zeros((2 ** N, 2 ** N), dtype=complex)
    for (tj, _k), vecs in basis.items():
        rho += vecs.T @ state.blocks[tj] @ vecs.conj()
    return FullState(N, rho)


def project_to_pi(full: FullState, tol: float = 1e-9) -> PIState:
    """Extract the blocks rho_J from a permutation-invariant full state."""
    N = full.N
    basis = coupled_basis(N)
    blocks: dict[int, np.ndarray] = {}
    keys = sorted(basis)
    for key in keys:
        tj, k = key
        V = basis[key]
        blk = V.conj() @ full.rho @ V.T
        if k == 0:
            blocks[tj] = blk
        elif np.max(np.abs(blk - blocks[tj])) > tol:
            raise NotPermutationInvariantError(
                f"sector 2J={tj} path k={k} differs from k=0 by {np.max(np.abs(blk - blocks[tj])):.3g}"
            )
    for k1, k2 in itertools.combinations(keys, 2):
        cross = basis[k1].conj() @ full.rho @ basis[k2].T
        if np.max(np.abs(cross)) > tol:
            raise NotPermutationInvariantError(
                f"coherence between sectors {k1} and {k2}: {np.max(np.abs(cross)):.3g}"
            )
    return PIState(N, blocks)


def permute_sites(rho: np.ndarray, N: int, perm) -> np.ndarray:
    """P rho P^+ for the site permutation ``perm`` (site i -> perm[i])."""
    t = rho.reshape([2] * (2 * N))
    axes = list(perm) + [N + p for p in perm]
    return t.transpose(axes).reshape(rho.shape)


def check_permutation_invariance(full: FullState, tol: float = 1e-10) -> bool:
    N = full.N
    for i, j in itertools.combinations(range(N), 2):
        perm = list(range(N))
        perm[i], perm[j] = j, i
        if np.max(np.abs(permute_sites(full.rho, N, perm) - full.rho)) >= tol:
            return False
    return True


def full_intensity(state: FullState, params: SystemParams) -> float:
    """I = -d<Jz>/dt evaluated through the full Liouvillian."""
    d = full_rhs(state, params).rho
    return float(-np.real(np.trace(collective_jz(state.N) @ d)))


def full_jz(state: FullState) -> float:
    return float(np.real(np.trace(collective_jz(state.N) @ state.rho)))


def evolve_full(
    params: SystemParams,
    state0: FullState,
    times,
    reltol: float = DEFAULT_RTOL,
    abstol: float = DEFAULT_ATOL,
) -> list[FullState]:
    _check_n(params.N)
    L = _liouvillian_cached(params)
    times = np.asarray(times, float)
    sol = solve_ivp(
        lambda t, y: L @ y, (0.0, float(times[-1])), state0.rho.ravel(),
        method="RK45", t_eval=times, rtol=reltol, atol=abstol,
    )
    if sol.status < 0:
        raise IntegrationError(sol.message, float(sol.t[-1]) if sol.t.size else 0.0)
    shape = state0.rho.shape
    return [FullState(params.N, y.reshape(shape)) for y in sol.y.T]


# -- equivalence suite ---------------------------------------------------

REPORT_COLUMNS = (
    "N", "seed", "gamma", "dgamma", "ddd", "max_abs_err_I", "max_abs_err_Jz", "pass",
)


@dataclass(frozen=True)
class OracleRow:
    N: int
    seed: int
    gamma: float
    dgamma: float
    ddd: float
    max_abs_err_I: float
    max_abs_err_Jz: float
    passed: bool

    def as_row(self) -> tuple:
        return (self.N, self.seed, self.gamma, self.dgamma, self.ddd,
                self.max_abs_err_I, self.max_abs_err_Jz, self.passed)


def random_case(N: int, seed: int) -> tuple[SystemParams, int, int]:
    """Markov-valid (gamma, dgamma, ddd) and a Dicke label (2J0, 2M0) for a seed."""
    rng = np.random.default_rng([N, seed])
    lower = -1.0 / (N - 1) if N > 1 else 0.0
    gamma = float(rng.uniform(lower, 1.0))
    ddd = float(rng.uniform(-2.0, 2.0))
    blocks = block_list(N)
    tj = int(blocks[rng.integers(len(blocks))].twoJ)
    tm = int(list(m_values(tj))[rng.integers(tj + 1)])
    return SystemParams.from_gamma(N, gamma, ddd), tj, tm


def run_equivalence(
    N: int,
    seed: int,
    t_end: float = 5.0,
    n_samples: int = 50,
    tol: float = 1e-6,
) -> OracleRow:
    """Compare PI and full-space I(t), <Jz>(t) for one random case."""
    _check_n(N)
    params, tj, tm = random_case(N, seed)
    times = np.linspace(0.0, t_end, n_samples)
    pi0 = init_dicke(N, tj, tm)
    traj = evolve(params, pi0, t_end, sample_grid=times, populations_only=False)
    full = evolve_full(params, embed_pi_state(pi0), times)
    I_full = np.array([full_intensity(s, params) for s in full])
    jz_full = np.array([full_jz(s) for s in full])
    err_I = float(np.max(np.abs(traj.intensity() - I_full)))
    err_jz = float(np.max(np.abs(traj.jz() - jz_full)))
    return OracleRow(N, seed, params.gamma, params.dgamma, params.ddd,
                     err_I, err_jz, err_I <= tol and err_jz <= tol)
