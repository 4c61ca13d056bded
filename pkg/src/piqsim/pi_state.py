"""Block-diagonal permutation-invariant density matrices.

A state stores one dense ``(2J+1) x (2J+1)`` block per total angular
momentum. Row/column ``a`` of a block holds magnetic number ``M = J - a``.
The blocks hold the elements shared by all ``d_N^J`` copies of the irrep, so
degeneracy factors enter only through the observables below.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .spin_algebra import DomainError, block_list, m_values, multiplicity


@dataclass
class PIState:
    N: int
    blocks: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for b in block_list(self.N):
            blk = self.blocks.get(b.twoJ)
            if blk is None:
                self.blocks[b.twoJ] = np.zeros((b.dim, b.dim), dtype=complex)
            elif blk.shape != (b.dim, b.dim):
                raise DomainError(
                    f"block 2J={b.twoJ} has shape {blk.shape}, expected {(b.dim, b.dim)}"
                )
            else:
                self.blocks[b.twoJ] = np.asarray(blk, dtype=complex)
        extra = set(self.blocks) - {b.twoJ for b in block_list(self.N)}
        if extra:
            raise DomainError(f"blocks {sorted(extra)} do not exist for N={self.N}")

    def copy(self) -> "PIState":
        return PIState(self.N, {k: v.copy() for k, v in self.blocks.items()})

    def element(self, twoJ: int, twoM: int, twoMp: int) -> complex:
        a, b = (twoJ - twoM) // 2, (twoJ - twoMp) // 2
        return complex(self.blocks[twoJ][a, b])

    # flat vector layout used by the integrators
    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.blocks[b.twoJ].ravel() for b in block_list(self.N)])

    @classmethod
    def from_vector(cls, N: int, vec: np.ndarray) -> "PIState":
        blocks, pos = {}, 0
        for b in block_list(N):
            n = b.dim * b.dim
            blocks[b.twoJ] = np.array(vec[pos:pos + n], dtype=complex).reshape(b.dim, b.dim)
            pos += n
        return cls(N, blocks)

    def diagonal_vector(self) -> np.ndarray:
        return np.concatenate([np.diag(self.blocks[b.twoJ]).real for b in block_list(self.N)])

    @classmethod
    def from_diagonal(cls, N: int, diag: np.ndarray) -> "PIState":
        blocks, pos = {}, 0
        for b in block_list(N):
            blocks[b.twoJ] = np.diag(np.asarray(diag[pos:pos + b.dim], dtype=complex))
            pos += b.dim
        return cls(N, blocks)

    def is_diagonal(self, tol: float = 0.0) -> bool:
        for blk in self.blocks.values():
            off = blk - np.diag(np.diag(blk))
            if np.any(np.abs(off) > tol):
                return False
        return True


def zero_state(N: int) -> PIState:
    return PIState(N)


def init_dicke(N: int, twoJ0: int, twoM0: int) -> PIState:
    """Uniform mixture over the multiplicity label of the Dicke state |J0, M0>."""
    d = multiplicity(N, twoJ0)
    if abs(twoM0) > twoJ0 or (twoJ0 - twoM0) % 2:
        raise DomainError(f"2M={twoM0} is not a valid projection in block 2J={twoJ0}")
    state = PIState(N)
    a = (twoJ0 - twoM0) // 2
    state.blocks[twoJ0][a, a] = 1.0 / d
    return state


def fully_excited(N: int) -> PIState:
    return init_dicke(N, N, N)


def ground_state(N: int) -> PIState:
    return init_dicke(N, N, -N)


def degeneracy_diagonal(N: int) -> np.ndarray:
    """d_N^J repeated over each block's diagonal, in ``diagonal_vector`` order."""
    return np.concatenate(
        [np.full(b.dim, float(multiplicity(N, b.twoJ))) for b in block_list(N)]
    )


def m_diagonal(N: int) -> np.ndarray:
    """M of each diagonal entry, in ``diagonal_vector`` order."""
    return np.concatenate([np.array(m_values(b.twoJ)) / 2 for b in block_list(N)])


def trace(state: PIState) -> float:
    return float(degeneracy_diagonal(state.N) @ state.diagonal_vector())


def expect_Jz(state: PIState) -> float:
    N = state.N
    return float((degeneracy_diagonal(N) * m_diagonal(N)) @ state.diagonal_vector())


def populations(state: PIState) -> list[tuple[int, int, float]]:
    """Diagonal entries as ``(twoJ, twoM, value)``, J ascending, M descending."""
    out = []
    for b in block_list(state.N):
        diag = np.diag(state.blocks[b.twoJ]).real
        out.extend((b.twoJ, twoM, float(v)) for twoM, v in zip(m_values(b.twoJ), diag))
    return out


def is_hermitian(state: PIState, tol: float = 1e-12) -> bool:
    return all(np.max(np.abs(blk - blk.conj().T), initial=0.0) <= tol
               for blk in state.blocks.values())


SNAPSHOT_COLUMNS = ("twoJ", "twoM", "twoMp", "re", "im")


def snapshot_records(state: PIState) -> Iterable[tuple[int, int, int, float, float]]:
    for b in block_list(state.N):
        blk = state.blocks[b.twoJ]
        for a, twoM in enumerate(m_values(b.twoJ)):
            for c, twoMp in enumerate(m_values(b.twoJ)):
                z = blk[a, c]
                yield b.twoJ, twoM, twoMp, float(z.real), float(z.imag)


def write_snapshot(state: PIState, path) -> None:
    """Write the state as flat CSV records (twoJ, twoM, twoMp, re, im)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SNAPSHOT_COLUMNS)
        for tj, tm, tmp, re, im in snapshot_records(state):
            w.writerow([tj, tm, tmp, f"{re:.17g}", f"{im:.17g}"])


def read_snapshot(path, N: int) -> PIState:
    state = PIState(N)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            tj, tm, tmp = int(row["twoJ"]), int(row["twoM"]), int(row["twoMp"])
            a, c = (tj - tm) // 2, (tj - tmp) // 2
            state.blocks[tj][a, c] = complex(float(row["re"]), float(row["im"]))
    return state
