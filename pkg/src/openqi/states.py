"""Initial states of the interferometer and the beam-splitter unitary."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .fock import TwoModeBasis, collective_ops, dag


class StateKind(str, Enum):
    N_ZERO = "nzero"
    TWIN_FOCK = "twin_fock"
    NOON = "noon"


@dataclass(frozen=True)
class StateVector:
    basis: TwoModeBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (self.basis.dim,):
            raise ValueError("amplitude vector does not match basis dimension")
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state not normalized (norm {norm!r})")

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.vdot(self.amplitudes, op @ self.amplitudes))

    def to_density(self) -> DensityMatrix:
        return DensityMatrix(self.basis, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    basis: TwoModeBasis
    rho: np.ndarray

    def __post_init__(self):
        if self.rho.shape != (self.basis.dim, self.basis.dim):
            raise ValueError("density matrix does not match basis dimension")

    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.rho - dag(self.rho)))) if self.rho.size else 0.0

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.rho + dag(self.rho)))[0])

    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(op @ self.rho))

    def check(self, herm_tol=1e-12, trace_tol=1e-10, psd_tol=1e-8) -> None:
        """Raise ValueError unless the matrix is a valid state within tolerance."""
        if self.hermiticity_error() > herm_tol:
            raise ValueError(f"not Hermitian: {self.hermiticity_error():.3e}")
        if abs(self.trace() - 1.0) > trace_tol:
            raise ValueError(f"trace {self.trace()} != 1")
        if self.min_eigenvalue() < -psd_tol:
            raise ValueError(f"negative eigenvalue {self.min_eigenvalue():.3e}")


def _unit(basis: TwoModeBasis, entries: dict[tuple[int, int], complex]) -> StateVector:
    amps = np.zeros(basis.dim, dtype=complex)
    for (na, nb), c in entries.items():
        amps[basis.index(na, nb)] = c
    return StateVector(basis, amps)


def fock_state(basis: TwoModeBasis, n_a: int, n_b: int) -> StateVector:
    if n_a < 0 or n_b < 0:
        raise ValueError("occupations must be non-negative")
    if n_a + n_b > basis.n_max:
        raise ValueError(f"|{n_a},{n_b}> exceeds cutoff n_max={basis.n_max}")
    return _unit(basis, {(n_a, n_b): 1.0})


def noon_state(basis: TwoModeBasis, n: int, phase: float = 0.0) -> StateVector:
    """(|N,0> + e^{i phase}|0,N>)/sqrt(2)."""
    if n < 1:
        raise ValueError("NOON state needs N >= 1")
    if n > basis.n_max:
        raise ValueError(f"N={n} exceeds cutoff n_max={basis.n_max}")
    c = 1.0 / np.sqrt(2.0)
    return _unit(basis, {(n, 0): c, (0, n): c * np.exp(1j * phase)})


def twin_fock(basis: TwoModeBasis, n: int) -> StateVector:
    if n % 2:
        raise ValueError(f"twin-Fock state needs even N, got {n}")
    return fock_state(basis, n // 2, n // 2)


def beam_splitter(basis: TwoModeBasis, theta: float) -> np.ndarray:
    """exp(-i theta J_x), exponentiated one sector block at a time."""
    jx = collective_ops(basis).J_x
    u = np.zeros((basis.dim, basis.dim), dtype=complex)
    for r in basis.sector_ranges.values():
        s = slice(r.start, r.stop)
        u[s, s] = scipy.linalg.expm(-1j * theta * jx[s, s])
    return u


def default_apply_bs(kind: StateKind | str) -> bool:
    return StateKind(kind) is not StateKind.NOON


def protocol_state(
    basis: TwoModeBasis,
    kind: StateKind | str,
    n: int,
    apply_bs: bool | None = None,
    noon_phase: float = 0.0,
) -> StateVector:
    kind = StateKind(kind)
    if apply_bs is None:
        apply_bs = default_apply_bs(kind)
    if kind is StateKind.N_ZERO:
        psi = fock_state(basis, n, 0)
    elif kind is StateKind.TWIN_FOCK:
        psi = twin_fock(basis, n)
    else:
        psi = noon_state(basis, n, phase=noon_phase)
    if apply_bs:
        amps = beam_splitter(basis, np.pi / 2) @ psi.amplitudes
        psi = StateVector(basis, amps / np.linalg.norm(amps))
    return psi


def prepare_protocol_state(
    basis: TwoModeBasis,
    kind: StateKind | str,
    n: int,
    apply_bs: bool | None = None,
    noon_phase: float = 0.0,
) -> DensityMatrix:
    """Pure initial state of the phase-accumulation stage.

    By default the 50:50 beam splitter is applied to |N,0> and the twin-Fock
    state, and not to the NOON state.
    """
    return protocol_state(basis, kind, n, apply_bs, noon_phase).to_density()
