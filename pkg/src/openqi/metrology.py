"""Quantum Fisher information with respect to the detuning, and the CRLB."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .fock import dag
from .lindblad import (
    IntegratorOptions,
    LindbladModel,
    propagate,
    propagate_with_sensitivity,
)
from .states import DensityMatrix


class DerivativeMode(str, Enum):
    CENTRAL_FD = "central_fd"
    SENSITIVITY_ODE = "sensitivity"


@dataclass(frozen=True)
class QfiResult:
    f_q: float
    crlb: float
    eigen_cut: float
    n_terms: int


@dataclass
class Derivative:
    drho: np.ndarray
    rho: np.ndarray
    warnings: list[str] = field(default_factory=list)


def default_fd_step(delta0: float) -> float:
    return 1e-3 * max(1.0, abs(delta0))


def _hermitian(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + dag(m))


def drho_ddelta(
    model_at: Callable[[float], LindbladModel] | LindbladModel,
    rho0,
    t: float,
    delta0: float,
    h: float | None = None,
    mode: DerivativeMode | str = DerivativeMode.SENSITIVITY_ODE,
    opts: IntegratorOptions | None = None,
    check_step: bool = True,
) -> Derivative:
    """d rho(t)/d delta at delta0.

    ``model_at`` maps a detuning to a model; a model instance is accepted
    and re-parametrized through ``with_delta``.  Central differences run a
    second pass at h/2 and record a warning when the two estimates disagree
    by more than the expected O(h^2) shrinkage allows.
    """
    if not callable(model_at):
        template = model_at
        model_at = template.with_delta
    mode = DerivativeMode(mode)

    if mode is DerivativeMode.SENSITIVITY_ODE:
        rho, sigma = propagate_with_sensitivity(model_at(delta0), rho0, t, opts)
        return Derivative(_hermitian(sigma), rho.rho)

    h = default_fd_step(delta0) if h is None else h
    if h <= 0:
        raise ValueError("finite-difference step must be positive")

    def central(step):
        plus = propagate(model_at(delta0 + step), rho0, t, opts).rho
        minus = propagate(model_at(delta0 - step), rho0, t, opts).rho
        return (plus - minus) / (2 * step)

    d1 = central(h)
    rho = propagate(model_at(delta0), rho0, t, opts).rho
    notes = []
    if check_step and t > 0:
        d2 = central(h / 2)
        scale = max(np.max(np.abs(d2)), 1e-300)
        gap = np.max(np.abs(d1 - d2)) / scale
        # truncation error shrinks 4x from h to h/2; integrator noise does not
        if gap > 1e-3:
            notes.append(f"finite-difference step h={h:g} unresolved (relative gap {gap:.2e})")
        noise = (opts or IntegratorOptions()).abs_tol / h
        if noise > 1e-2 * scale:
            notes.append(f"cancellation: integrator tolerance / h ~ {noise:.1e} dominates")
        for n in notes:
            warnings.warn(n, RuntimeWarning, stacklevel=2)
    return Derivative(_hermitian(d1), rho, notes)


def qfi(rho, drho: np.ndarray, eps_p: float = 1e-12, psd_tol: float = 1e-7) -> QfiResult:
    """F_Q = 2 sum_{k,k'} |<k|d rho|k'>|^2 / (p_k + p_k'), pairs with p_k + p_k' > eps_p."""
    r = rho.rho if isinstance(rho, DensityMatrix) else np.asarray(rho)
    p, vecs = np.linalg.eigh(_hermitian(r))
    if p[0] < -psd_tol:
        raise ValueError(f"density matrix has eigenvalue {p[0]:.3e} below -{psd_tol:g}")
    dk = dag(vecs) @ _hermitian(np.asarray(drho)) @ vecs
    denom = p[:, None] + p[None, :]
    keep = denom > eps_p
    f_q = float(2.0 * np.sum(np.abs(dk[keep]) ** 2 / denom[keep]))
    return QfiResult(
        f_q=f_q,
        crlb=1.0 / math.sqrt(f_q) if f_q > 0 else math.inf,
        eigen_cut=eps_p,
        n_terms=int(keep.sum()),
    )


def qfi_blocked(
    rho: np.ndarray, drho: np.ndarray, ranges, eps_p: float = 1e-12, psd_tol: float = 1e-7
) -> QfiResult:
    """QFI of a sector-block-diagonal pair (rho, drho); sums the per-block values."""
    total, terms = 0.0, 0
    for r in ranges:
        s = slice(r.start, r.stop)
        part = qfi(rho[s, s], drho[s, s], eps_p, psd_tol)
        total += part.f_q
        terms += part.n_terms
    return QfiResult(total, 1.0 / math.sqrt(total) if total > 0 else math.inf, eps_p, terms)


def qfi_two_term(rho: np.ndarray, drho: np.ndarray, eps_p: float = 1e-12) -> float:
    """The eigenvalue / eigenvector-derivative form of the QFI.

    F_Q = sum_k (dp_k)^2/p_k + 2 sum_{k,k'} (p_k - p_k')^2/(p_k + p_k') |<dk|k'>|^2,
    with dp_k and |dk> from first-order perturbation theory.  Requires a
    non-degenerate spectrum; used to cross-check :func:`qfi`.
    """
    p, v = np.linalg.eigh(_hermitian(rho))
    dk = dag(v) @ _hermitian(drho) @ v
    n = len(p)
    gaps = p[:, None] - p[None, :]
    if np.any(np.abs(gaps[~np.eye(n, dtype=bool)]) < 1e-12):
        raise ValueError("spectrum is degenerate; eigenvector derivatives undefined")
    dp = np.real(np.diag(dk))
    f = sum(dp[k] ** 2 / p[k] for k in range(n) if p[k] > eps_p)
    # |dk> = sum_{j != k} <j|drho|k> / (p_k - p_j) |j>
    coeff = np.zeros((n, n), dtype=complex)
    for k in range(n):
        for j in range(n):
            if j != k:
                coeff[j, k] = dk[j, k] / (p[k] - p[j])
    for k in range(n):
        for kp in range(n):
            s = p[k] + p[kp]
            if s > eps_p and k != kp:
                # <dk|k'> = conj(coeff[k', k])
                f += 2 * (p[k] - p[kp]) ** 2 / s * abs(coeff[kp, k]) ** 2
    return float(f)


def crlb(f_q: float, repetitions: int = 1) -> float:
    if repetitions < 1:
        raise ValueError("repetitions must be a positive integer")
    if not f_q > 0:
        raise ValueError(f"Fisher information must be positive, got {f_q!r}")
    return 1.0 / math.sqrt(repetitions * f_q)
