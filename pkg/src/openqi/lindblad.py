"""Lindblad master equation for the phase-accumulation stage.

The system Hamiltonian is ``delta * J_z`` and the dissipator is
``gamma * (L rho L^+ - {L^+ L, rho}/2)`` with either the symmetric loss
operator ``L = (a + b)/sqrt(2)`` or the exchange operator ``L = b^+ a``.

Propagation works on a flat complex state vector in one of two layouts:
the dense D x D matrix, or the list of diagonal sector blocks when the
initial state carries no coherence between total-number sectors (both
jump operators map a sector into a single sector, so that structure is
preserved exactly).  The same machinery co-propagates the derivative
``d rho / d delta`` through the sensitivity equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.integrate import RK45

from .fock import CollectiveOps, TwoModeBasis, collective_ops, dag, off_sector_norm
from .states import DensityMatrix


class DissipatorKind(str, Enum):
    ALPHA = "alpha"
    J_MINUS = "jminus"


class Method(str, Enum):
    ADAPTIVE_RK = "adaptive_rk"
    FIXED_RK4 = "rk4"
    EXACT_SUPEROP = "exact"


class PropagationError(RuntimeError):
    def __init__(self, message: str, t_reached: float):
        super().__init__(f"{message} (reached t={t_reached:.6g})")
        self.t_reached = t_reached


class DimensionGuardError(ValueError):
    pass


@dataclass(frozen=True)
class IntegratorOptions:
    method: Method = Method.ADAPTIVE_RK
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = math.inf
    rehermitize_every: int = 1
    rk4_steps: int | None = None
    # None: use sector blocks whenever the initial state allows it
    blocked: bool | None = None
    max_superop_dim: int = 64
    psd_tol: float = 1e-7

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("integrator tolerances must be positive")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")
        if self.rehermitize_every < 0:
            raise ValueError("rehermitize_every must be >= 0 (0 disables)")


@dataclass(frozen=True)
class LindbladModel:
    basis: TwoModeBasis
    delta: float
    gamma: float
    kind: DissipatorKind = DissipatorKind.ALPHA
    # chemical-potential scale; kept for bookkeeping, not propagated
    v0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", DissipatorKind(self.kind))
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")

    def with_delta(self, delta: float) -> LindbladModel:
        return LindbladModel(self.basis, delta, self.gamma, self.kind, self.v0)

    @cached_property
    def ops(self) -> CollectiveOps:
        return collective_ops(self.basis)

    @cached_property
    def jump(self) -> np.ndarray:
        if self.kind is DissipatorKind.ALPHA:
            return self.ops.alpha
        return self.ops.J_minus

    @cached_property
    def hamiltonian(self) -> np.ndarray:
        return self.delta * self.ops.J_z


def hamiltonian(model: LindbladModel) -> np.ndarray:
    return model.hamiltonian


def jump_operator(model: LindbladModel) -> np.ndarray:
    return model.jump


def _as_matrix(model: LindbladModel, rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        if rho.basis != model.basis:
            raise ValueError("density matrix and model live on different bases")
        return rho.rho
    rho = np.asarray(rho)
    if rho.shape != (model.basis.dim, model.basis.dim):
        raise ValueError(f"matrix shape {rho.shape} does not match basis dimension")
    return rho


def apply_liouvillian(model: LindbladModel, rho) -> np.ndarray:
    """d rho/dt = -i[H, rho] + gamma (L rho L^+ - {L^+ L, rho}/2)."""
    r = _as_matrix(model, rho)
    h = model.hamiltonian
    out = -1j * (h @ r - r @ h)
    if model.gamma:
        L = model.jump
        ldl = dag(L) @ L
        out = out + model.gamma * (L @ r @ dag(L) - 0.5 * (ldl @ r + r @ ldl))
    return out


def liouvillian_superoperator(model: LindbladModel, max_dim: int = 64) -> np.ndarray:
    """Matrix K with vec(d rho/dt) = K vec(rho) under column stacking."""
    d = model.basis.dim
    if d > max_dim:
        raise DimensionGuardError(f"basis dimension {d} exceeds superoperator guard {max_dim}")
    eye = np.eye(d)
    h = model.hamiltonian
    # vec(A X B) = (B^T kron A) vec(X)
    k = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    if model.gamma:
        L = model.jump
        ldl = dag(L) @ L
        k = k + model.gamma * (
            np.kron(L.conj(), L) - 0.5 * np.kron(eye, ldl) - 0.5 * np.kron(ldl.T, eye)
        )
    return k


def vec(mat: np.ndarray) -> np.ndarray:
    return mat.reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return v.reshape((dim, dim), order="F")


def propagate_exact(model: LindbladModel, rho0, t: float, max_dim: int = 64) -> DensityMatrix:
    """unvec(exp(K t) vec(rho0)) with a dense matrix exponential."""
    r0 = _as_matrix(model, rho0)
    k = liouvillian_superoperator(model, max_dim=max_dim)
    out = unvec(scipy.linalg.expm(k * t) @ vec(r0), model.basis.dim)
    return DensityMatrix(model.basis, out)


# ---------------------------------------------------------------------------
# state layouts


class _Layout:
    """Packs one or two operator-valued quantities into a flat vector."""

    size: int

    def pack(self, mat: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def unpack(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def rhs(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jz_commutator(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hermitize(self, y: np.ndarray) -> None:
        raise NotImplementedError

    def min_eigenvalue(self, y: np.ndarray) -> float:
        raise NotImplementedError


class _DenseLayout(_Layout):
    def __init__(self, model: LindbladModel):
        d = model.basis.dim
        self.dim = d
        self.size = d * d
        L = model.jump
        self.gamma = model.gamma
        self.jz = model.ops.J_z
        self.h_eff = model.hamiltonian - 0.5j * model.gamma * (dag(L) @ L)
        self.L = L
        self.Ld = dag(L)

    def pack(self, mat):
        return np.ascontiguousarray(mat, dtype=complex).reshape(-1)

    def unpack(self, y):
        return y.reshape(self.dim, self.dim)

    def rhs(self, y):
        r = self.unpack(y)
        a = self.h_eff @ r
        out = -1j * a + 1j * dag(a)
        if self.gamma:
            out += self.gamma * (self.L @ r @ self.Ld)
        return out.reshape(-1)

    def jz_commutator(self, y):
        r = self.unpack(y)
        return (-1j * (self.jz @ r - r @ self.jz)).reshape(-1)

    def hermitize(self, y):
        r = self.unpack(y)
        r[...] = 0.5 * (r + dag(r))

    def min_eigenvalue(self, y):
        r = self.unpack(y)
        return float(np.linalg.eigvalsh(0.5 * (r + dag(r)))[0])


class _BlockedLayout(_Layout):
    """Diagonal sector blocks; the jump operator maps sector n to n - shift."""

    def __init__(self, model: LindbladModel):
        basis = model.basis
        self.basis = basis
        self.gamma = model.gamma
        self.shift = 1 if model.kind is DissipatorKind.ALPHA else 0
        self.sectors = list(basis.sector_ranges)
        self.slices = [slice(r.start, r.stop) for r in basis.sector_ranges.values()]
        sizes = [s.stop - s.start for s in self.slices]
        self.sizes = sizes
        self.offsets = np.cumsum([0] + [m * m for m in sizes])
        self.size = int(self.offsets[-1])
        L = model.jump
        ldl = dag(L) @ L
        h = model.hamiltonian
        jz = model.ops.J_z
        self.h_eff, self.jz, self.jumps = [], [], []
        for i, s in enumerate(self.slices):
            self.h_eff.append(h[s, s] - 0.5j * model.gamma * ldl[s, s])
            self.jz.append(jz[s, s])
            src = i + self.shift
            if model.gamma and src < len(self.slices):
                block = L[s, self.slices[src]]
                self.jumps.append((src, block, dag(block)))
            else:
                self.jumps.append(None)

    def _views(self, y):
        return [
            y[self.offsets[i] : self.offsets[i + 1]].reshape(m, m)
            for i, m in enumerate(self.sizes)
        ]

    def pack(self, mat):
        y = np.empty(self.size, dtype=complex)
        for view, s in zip(self._views(y), self.slices):
            view[...] = mat[s, s]
        return y

    def unpack(self, y):
        out = np.zeros((self.basis.dim, self.basis.dim), dtype=complex)
        for view, s in zip(self._views(y), self.slices):
            out[s, s] = view
        return out

    def rhs(self, y):
        blocks = self._views(y)
        out = np.empty(self.size, dtype=complex)
        for i, (o, r) in enumerate(zip(self._views(out), blocks)):
            a = self.h_eff[i] @ r
            o[...] = -1j * a + 1j * dag(a)
            jump = self.jumps[i]
            if jump is not None:
                src, L, Ld = jump
                o += self.gamma * (L @ blocks[src] @ Ld)
        return out

    def jz_commutator(self, y):
        out = np.empty(self.size, dtype=complex)
        for jz, o, r in zip(self.jz, self._views(out), self._views(y)):
            o[...] = -1j * (jz @ r - r @ jz)
        return out

    def hermitize(self, y):
        for r in self._views(y):
            r[...] = 0.5 * (r + dag(r))

    def min_eigenvalue(self, y):
        return min(
            float(np.linalg.eigvalsh(0.5 * (r + dag(r)))[0]) for r in self._views(y)
        )


def _choose_layout(model: LindbladModel, rho0: np.ndarray, blocked: bool | None) -> _Layout:
    block_ok = off_sector_norm(model.basis, rho0) == 0.0
    if blocked is None:
        blocked = block_ok and not model.basis.is_single_sector
    if blocked and not block_ok:
        raise ValueError("blocked layout requested but rho0 couples different sectors")
    return _BlockedLayout(model) if blocked else _DenseLayout(model)


# ---------------------------------------------------------------------------
# integration


@dataclass
class Trajectory:
    times: list[float]
    rhos: list[np.ndarray]
    sensitivities: list[np.ndarray] | None
    n_steps: int = 0
    min_eigenvalue: float = 0.0


class _System:
    """rho alone, or (rho, d rho/d delta) stacked."""

    def __init__(self, layout: _Layout, sensitivity: bool):
        self.layout = layout
        self.sensitivity = sensitivity
        self.n = layout.size

    def __call__(self, t, y):
        lay = self.layout
        if not self.sensitivity:
            return lay.rhs(y)
        r, s = y[: self.n], y[self.n :]
        return np.concatenate([lay.rhs(r), lay.rhs(s) + lay.jz_commutator(r)])

    def hermitize(self, y):
        self.layout.hermitize(y[: self.n])
        if self.sensitivity:
            self.layout.hermitize(y[self.n :])

    def split(self, y):
        rho = self.layout.unpack(y[: self.n])
        sens = self.layout.unpack(y[self.n :]) if self.sensitivity else None
        return rho, sens


def _run_adaptive(system: _System, y0, times, opts: IntegratorOptions):
    out, steps = [], 0
    y, t_now = y0.copy(), 0.0
    for t_target in times:
        if t_target == t_now:
            out.append(y.copy())
            continue
        solver = RK45(
            system, t_now, y, t_target,
            rtol=opts.rel_tol, atol=opts.abs_tol, max_step=opts.max_step,
        )
        while solver.status == "running":
            msg = solver.step()
            steps += 1
            if solver.status == "failed":
                raise PropagationError(f"adaptive integrator failed: {msg}", solver.t)
            if opts.rehermitize_every and steps % opts.rehermitize_every == 0:
                # in-place; the cached FSAL derivative is off only by rounding
                system.hermitize(solver.y)
        y, t_now = solver.y.copy(), t_target
        out.append(y.copy())
    return out, steps


def _run_rk4(system: _System, y0, times, opts: IntegratorOptions):
    t_end = times[-1] if times else 0.0
    if opts.rk4_steps is not None:
        h_nominal = t_end / opts.rk4_steps if opts.rk4_steps else math.inf
    elif math.isfinite(opts.max_step):
        h_nominal = opts.max_step
    else:
        raise ValueError("fixed-step RK4 needs rk4_steps or a finite max_step")
    out, steps = [], 0
    y, t_now = y0.copy(), 0.0
    for t_target in times:
        span = t_target - t_now
        n = max(1, math.ceil(span / h_nominal - 1e-12)) if span > 0 else 0
        for _ in range(n):
            h = span / n
            k1 = system(t_now, y)
            k2 = system(t_now, y + 0.5 * h * k1)
            k3 = system(t_now, y + 0.5 * h * k2)
            k4 = system(t_now, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            steps += 1
            if opts.rehermitize_every and steps % opts.rehermitize_every == 0:
                system.hermitize(y)
        t_now = t_target
        out.append(y.copy())
    return out, steps


def _run_exact(model: LindbladModel, system: _System, rho0, times, opts):
    k = liouvillian_superoperator(model, max_dim=opts.max_superop_dim)
    d = model.basis.dim
    if system.sensitivity:
        eye = np.eye(d)
        jz = model.ops.J_z
        kz = -1j * (np.kron(eye, jz) - np.kron(jz.T, eye))
        gen = np.block([[k, np.zeros_like(k)], [kz, k]])
        v0 = np.concatenate([vec(rho0), np.zeros(d * d, dtype=complex)])
    else:
        gen, v0 = k, vec(rho0)
    out = []
    for t in times:
        v = scipy.linalg.expm(gen * t) @ v0
        y = system.layout.pack(unvec(v[: d * d], d))
        if system.sensitivity:
            y = np.concatenate([y, system.layout.pack(unvec(v[d * d :], d))])
        out.append(y)
    return out, len(times)


def evolve(
    model: LindbladModel,
    rho0,
    times,
    opts: IntegratorOptions | None = None,
    sensitivity: bool = False,
) -> Trajectory:
    """Propagate rho0 to each of the ascending ``times``.

    With ``sensitivity`` the derivative sigma = d rho/d delta is carried
    along via d sigma/dt = -i[J_z, rho] + Liouvillian(sigma), sigma(0) = 0.
    """
    opts = opts or IntegratorOptions()
    r0 = np.array(_as_matrix(model, rho0), dtype=complex)
    times = [float(t) for t in np.atleast_1d(times)]
    if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be non-negative and ascending")

    blocked = opts.blocked
    if opts.method is Method.EXACT_SUPEROP:
        blocked = False if blocked is None else blocked
    layout = _choose_layout(model, r0, blocked)
    system = _System(layout, sensitivity)
    y0 = layout.pack(r0)
    if sensitivity:
        y0 = np.concatenate([y0, np.zeros_like(y0)])

    if opts.method is Method.ADAPTIVE_RK:
        ys, steps = _run_adaptive(system, y0, times, opts)
    elif opts.method is Method.FIXED_RK4:
        ys, steps = _run_rk4(system, y0, times, opts)
    else:
        ys, steps = _run_exact(model, system, r0, times, opts)

    rhos, sens = [], [] if sensitivity else None
    min_eig = math.inf
    for t, y in zip(times, ys):
        if t == 0.0:
            rho, s = r0.copy(), (np.zeros_like(r0) if sensitivity else None)
        else:
            lam = layout.min_eigenvalue(y[: layout.size])
            min_eig = min(min_eig, lam)
            if lam < -opts.psd_tol:
                raise PropagationError(f"density matrix lost positivity ({lam:.3e})", t)
            rho, s = system.split(y)
        rhos.append(rho)
        if sensitivity:
            sens.append(s)
    return Trajectory(times, rhos, sens, steps, min_eig if math.isfinite(min_eig) else 0.0)


def propagate(
    model: LindbladModel, rho0, t: float, opts: IntegratorOptions | None = None
) -> DensityMatrix:
    if t < 0:
        raise ValueError("t must be >= 0")
    traj = evolve(model, rho0, [t], opts)
    return DensityMatrix(model.basis, traj.rhos[-1])


def propagate_with_sensitivity(
    model: LindbladModel, rho0, t: float, opts: IntegratorOptions | None = None
) -> tuple[DensityMatrix, np.ndarray]:
    """rho(t) together with d rho(t)/d delta at the model's delta."""
    if t < 0:
        raise ValueError("t must be >= 0")
    traj = evolve(model, rho0, [t], opts, sensitivity=True)
    return DensityMatrix(model.basis, traj.rhos[-1]), traj.sensitivities[-1]

