"""Truncated two-mode bosonic Fock spaces and their operator algebra.

States |n_a, n_b> are ordered sector-major (ascending total number n), then
by ascending n_a inside a sector.  A basis either holds every sector
0..n_max (the triangular basis) or a single fixed-N sector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class Mode(str, Enum):
    A = "a"
    B = "b"


@dataclass(frozen=True)
class TwoModeBasis:
    """Two-mode Fock basis holding the sectors n_min..n_max."""

    n_max: int
    n_min: int = 0
    states: tuple[tuple[int, int], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_max < 0 or self.n_min < 0 or self.n_min > self.n_max:
            raise ValueError(f"invalid sector range [{self.n_min}, {self.n_max}]")
        states = tuple(
            (na, n - na) for n in range(self.n_min, self.n_max + 1) for na in range(n + 1)
        )
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def is_single_sector(self) -> bool:
        return self.n_min == self.n_max

    @cached_property
    def index_of(self) -> dict[tuple[int, int], int]:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def sector_ranges(self) -> dict[int, range]:
        ranges = {}
        start = 0
        for n in range(self.n_min, self.n_max + 1):
            ranges[n] = range(start, start + n + 1)
            start += n + 1
        return ranges

    @cached_property
    def totals(self) -> np.ndarray:
        return np.array([na + nb for na, nb in self.states])

    def index(self, n_a: int, n_b: int) -> int:
        try:
            return self.index_of[(n_a, n_b)]
        except KeyError:
            raise ValueError(
                f"state |{n_a},{n_b}> is outside the basis "
                f"(sectors {self.n_min}..{self.n_max})"
            ) from None


def build_basis(n_max: int) -> TwoModeBasis:
    """Triangular basis with every (n_a, n_b) such that n_a + n_b <= n_max."""
    return TwoModeBasis(n_max=n_max)


def sector_basis(n: int) -> TwoModeBasis:
    """Basis of the fixed total-number sector n (dimension n + 1)."""
    return TwoModeBasis(n_max=n, n_min=n)


def annihilator(basis: TwoModeBasis, mode: Mode | str) -> np.ndarray:
    """Matrix of `a` or `b` on the basis; transitions leaving the basis are dropped."""
    return _sparse_annihilator(basis, Mode(mode)).toarray()


def _sparse_annihilator(basis: TwoModeBasis, mode: Mode) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for j, (na, nb) in enumerate(basis.states):
        n, target = (na, (na - 1, nb)) if mode is Mode.A else (nb, (na, nb - 1))
        i = basis.index_of.get(target) if n > 0 else None
        if i is not None:
            rows.append(i)
            cols.append(j)
            vals.append(np.sqrt(n))
    return sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(basis.dim, basis.dim))


def creator(basis: TwoModeBasis, mode: Mode | str) -> np.ndarray:
    return annihilator(basis, mode).conj().T


def dag(op: np.ndarray) -> np.ndarray:
    return op.conj().T


@dataclass(frozen=True)
class CollectiveOps:
    J_x: np.ndarray
    J_z: np.ndarray
    J_plus: np.ndarray
    J_minus: np.ndarray
    alpha: np.ndarray
    N_total: np.ndarray


def collective_ops(basis: TwoModeBasis) -> CollectiveOps:
    """Collective two-mode operators built from the ladder operators.

    For a single-sector basis the operators are computed on the enclosing
    triangular basis and then restricted, so J_+ and J_- keep their full
    matrix elements.  ``alpha`` maps sector n to n - 1 and therefore vanishes
    on a single-sector basis.
    """
    full = build_basis(basis.n_max)
    # sparse products: the enclosing basis grows as n_max^2
    a = _sparse_annihilator(full, Mode.A)
    b = _sparse_annihilator(full, Mode.B)
    n_a = a.conj().T @ a
    n_b = b.conj().T @ b
    j_plus = a.conj().T @ b
    j_minus = b.conj().T @ a
    ops = dict(
        J_x=0.5 * (j_plus + j_minus),
        J_z=0.5 * (n_a - n_b),
        J_plus=j_plus,
        J_minus=j_minus,
        alpha=(a + b) / np.sqrt(2.0),
        N_total=n_a + n_b,
    )
    keep = np.array([full.index_of[s] for s in basis.states])
    ops = {k: np.ascontiguousarray(v[keep][:, keep].toarray()) for k, v in ops.items()}
    return CollectiveOps(**ops)


def sector_projector(basis: TwoModeBasis, n: int) -> np.ndarray:
    if n not in basis.sector_ranges:
        raise ValueError(f"sector {n} outside [{basis.n_min}, {basis.n_max}]")
    diag = np.zeros(basis.dim, dtype=complex)
    r = basis.sector_ranges[n]
    diag[r.start : r.stop] = 1.0
    return np.diag(diag)


def sector_blocks(basis: TwoModeBasis, mat: np.ndarray) -> dict[int, np.ndarray]:
    """Diagonal sector blocks of a matrix on ``basis``."""
    return {n: mat[r.start : r.stop, r.start : r.stop] for n, r in basis.sector_ranges.items()}


def off_sector_norm(basis: TwoModeBasis, mat: np.ndarray) -> float:
    """Largest |entry| of ``mat`` coupling two different total-number sectors."""
    totals = basis.totals
    mask = totals[:, None] != totals[None, :]
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(mat[mask])))
