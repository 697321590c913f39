"""Ground-state interaction energy of system modes coupled to a harmonic bath.

The star Hamiltonian  sum_s w_s s^+ s + sum_i w_i R_i^+ R_i
+ sum_{s,i} g_i (R_i^+ s + h.c.)  is a one-body quadratic form.  Its
many-body ground state at total particle number N puts every particle in
the lowest one-body mode; the target occupations are imposed with
Lagrange multipliers shifting the diagonal, so that the squared mode
components equal occupation / N.  The interaction energy is then
N * v^T H_int v for that mode vector v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import optimize, stats


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class BathSpec:
    omegas: np.ndarray
    couplings: np.ndarray
    occupations: np.ndarray
    epsilon: float | None = None
    m_avg: float | None = None

    def __post_init__(self):
        for name in ("omegas", "couplings", "occupations"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        m = len(self.omegas)
        if len(self.couplings) != m or len(self.occupations) != m:
            raise ValueError("omegas, couplings and occupations must have equal length")
        if np.any(self.omegas <= 0):
            raise ValueError("bath frequencies must be positive")
        if np.any(self.couplings < 0) or np.any(self.occupations < 0):
            raise ValueError("couplings and occupations must be non-negative")
        if self.epsilon is not None and not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")

    @property
    def m(self) -> int:
        return len(self.omegas)

    @property
    def total_occupation(self) -> float:
        return float(self.occupations.sum())

    def coupling_sum(self) -> float:
        """sum_i g_i sqrt(M_i)."""
        return float(np.sum(self.couplings * np.sqrt(self.occupations)))


def homogeneous_bath(
    n: int,
    epsilon: float,
    g: float,
    m_avg: float,
    omega_min: float = 0.5,
    omega_max: float = 1.5,
) -> BathSpec:
    """M = N/epsilon oscillators on a uniform frequency grid, all with g and M_AVG."""
    m = n / epsilon
    if abs(m - round(m)) > 1e-9:
        raise ValueError(f"N/epsilon = {m} is not an integer")
    m = int(round(m))
    omegas = np.linspace(omega_min, omega_max, m) if m > 1 else np.array([omega_min])
    return BathSpec(omegas, np.full(m, g), np.full(m, m_avg), epsilon=epsilon, m_avg=m_avg)


# ---------------------------------------------------------------------------
# one system mode, one bath mode


@dataclass(frozen=True)
class PairSolution:
    mu: float
    h_int: float
    mode: np.ndarray


def _lower_mode(mat: np.ndarray) -> np.ndarray:
    _, v = np.linalg.eigh(mat)
    v0 = v[:, 0]
    return v0 if v0[0] >= 0 else -v0


def ground_state_pair(
    omega_a: float, omega_r: float, g: float, n_a: float, n_total: float
) -> PairSolution:
    """Multiplier mu on the system mode so that the lower mode holds n_a of n_total."""
    if not 0 < n_a < n_total:
        raise ValueError("need 0 < n_a < n_total")
    if g <= 0:
        raise ValueError("coupling must be positive")
    target = n_a / n_total

    def resid(mu):
        v = _lower_mode(np.array([[omega_a + mu, g], [g, omega_r]]))
        return v[0] ** 2 - target

    # v_0^2 falls monotonically from 1 to 0 as mu sweeps upward
    width = max(1.0, abs(omega_a - omega_r), g)
    lo, hi = -width, width
    for _ in range(200):
        if resid(lo) > 0:
            break
        lo *= 2
    for _ in range(200):
        if resid(hi) < 0:
            break
        hi *= 2
    if not (resid(lo) > 0 > resid(hi)):
        raise ConvergenceError("could not bracket the multiplier")
    mu = optimize.brentq(resid, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    v = _lower_mode(np.array([[omega_a + mu, g], [g, omega_r]]))
    return PairSolution(mu=mu, h_int=2.0 * n_total * g * v[0] * v[1], mode=v)


# ---------------------------------------------------------------------------
# star coupling


@dataclass(frozen=True)
class QuadraticModel:
    """Star one-body matrix: system modes first, then bath modes."""

    system_omegas: np.ndarray
    bath: BathSpec

    @property
    def n_system(self) -> int:
        return len(self.system_omegas)

    @property
    def size(self) -> int:
        return self.n_system + self.bath.m

    def matrix(self, multipliers: np.ndarray | None = None) -> np.ndarray:
        s = self.n_system
        h = np.zeros((self.size, self.size))
        h[np.arange(s), np.arange(s)] = self.system_omegas
        h[np.arange(s, self.size), np.arange(s, self.size)] = self.bath.omegas
        h[:s, s:] = self.bath.couplings
        h[s:, :s] = self.bath.couplings[:, None]
        if multipliers is not None:
            h[np.diag_indices(self.size)] += multipliers
        return h

    def interaction(self) -> np.ndarray:
        s = self.n_system
        h = np.zeros((self.size, self.size))
        h[:s, s:] = self.bath.couplings
        h[s:, :s] = self.bath.couplings[:, None]
        return h


@dataclass
class StarSolution:
    multipliers: np.ndarray
    h_int: float
    mode: np.ndarray
    iterations: int
    residual: float
    mode_index: int
    branch_switched: bool = False
    history: list[float] = field(default_factory=list)


def _tracked_mode(h: np.ndarray, previous: np.ndarray | None):
    """Ground mode of ``h`` (sign: system component positive).

    With positive star couplings the ground mode is non-degenerate for every
    multiplier vector, so the branch connected to the mu = 0 ground mode is
    always index 0.  The returned index is the mode that best overlaps
    ``previous``; anything other than 0 is reported as a branch switch.
    """
    lam, v = np.linalg.eigh(h)
    k = 0 if previous is None else int(np.argmax(np.abs(v.T @ previous)))
    mode = v[:, 0]
    if mode[0] < 0:
        mode = -mode
    return k, lam, v, mode


def _newton(model, mu, mode, target, tol, max_iter, history):
    """Damped Newton from (mu, mode) towards squared components ``target``."""
    k, lam, vecs, mode = _tracked_mode(model.matrix(mu), mode)
    res = mode**2 - target
    norm = float(np.max(np.abs(res)))
    for it in range(max_iter + 1):
        history.append(norm)
        if norm < tol:
            return mu, k, mode, norm, it
        # d v_0 / d mu_j = sum_{l > 0} V_l V_l[j] v_0[j] / (lam_0 - lam_l)
        vo = vecs[:, 1:]
        w = 1.0 / (lam[0] - lam[1:])
        dv = (vo * w) @ (vo.T * mode[None, :])
        jac = 2.0 * mode[:, None] * dv
        # the multipliers are defined up to a common shift: minimum-norm step
        step = np.linalg.lstsq(jac, -res, rcond=None)[0]
        scale = 1.0
        for _ in range(40):
            trial = mu + scale * step
            k_t, lam_t, vecs_t, mode_t = _tracked_mode(model.matrix(trial), mode)
            res_t = mode_t**2 - target
            norm_t = float(np.max(np.abs(res_t)))
            if norm_t < norm or norm_t < tol:
                break
            scale *= 0.5
        else:
            raise ConvergenceError(f"line search stalled at residual {norm:.3e}")
        mu, k, lam, vecs, mode, res, norm = trial, k_t, lam_t, vecs_t, mode_t, res_t, norm_t
    raise ConvergenceError(f"no convergence after {max_iter} iterations ({norm:.3e})")


def solve_star(
    model: QuadraticModel,
    system_occupations: Sequence[float],
    tol: float = 1e-14,
    max_iter: int = 200,
) -> StarSolution:
    """Multipliers fixing every squared component of the ground mode.

    Damped Newton seeded at mu = 0.  When a solve stalls, the target is
    approached along the straight path from the unconstrained ground
    mode's components, shortening the path increment until Newton copes.
    """
    occ = np.concatenate([np.asarray(system_occupations, float), model.bath.occupations])
    if len(occ) != model.size:
        raise ValueError("need one occupation per system mode")
    if np.any(occ[: model.n_system] <= 0):
        raise ValueError("system occupations must be positive")
    if np.any(model.bath.couplings <= 0):
        raise ValueError("star couplings must be positive")
    n_total = occ.sum()
    target = occ / n_total

    mu = np.zeros(model.size)
    _, _, _, mode = _tracked_mode(model.matrix(mu), None)
    start = mode**2
    history: list[float] = []
    switched = False
    iterations = 0
    s, ds = 0.0, 1.0
    while True:
        s_try = min(1.0, s + ds)
        goal = target if s_try == 1.0 else (1 - s_try) * start + s_try * target
        try:
            mu_t, k, mode_t, norm, it = _newton(
                model, mu, mode, goal, tol if s_try == 1.0 else 1e-10, max_iter, history
            )
        except ConvergenceError:
            ds *= 0.25
            if ds < 1e-6:
                raise
            continue
        iterations += it
        mu, mode, s = mu_t, mode_t, s_try
        switched = switched or k != 0
        if s == 1.0:
            break
        ds *= 2
    h_int = n_total * float(mode @ model.interaction() @ mode)
    return StarSolution(mu, h_int, mode, iterations, norm, k, switched, history)


def ground_state_star(
    spec: BathSpec,
    omega_a: float,
    n_a: float,
    n_grand_total: float | None = None,
    omega_b: float | None = None,
    n_b: float | None = None,
) -> StarSolution:
    """Star solve with one system mode, or two when ``omega_b``/``n_b`` are given."""
    sys_omegas = [omega_a]
    sys_occ = [n_a]
    if n_b is not None:
        sys_omegas.append(omega_a if omega_b is None else omega_b)
        sys_occ.append(n_b)
    total = sum(sys_occ) + spec.total_occupation
    if n_grand_total is not None and not math.isclose(n_grand_total, total, rel_tol=1e-12):
        raise ValueError(
            f"occupations sum to {total}, not the stated grand total {n_grand_total}"
        )
    return solve_star(QuadraticModel(np.array(sys_omegas, float), spec), sys_occ)


# ---------------------------------------------------------------------------
# closed forms and rescaling


class CouplingKind(str, Enum):
    SINGLE_MODE = "single_mode"
    TWO_MODE_LINEAR = "two_mode_linear"
    TWO_MODE_NUMBER_CONSERVING = "two_mode_number_conserving"


def interaction_energy_closed_form(
    kind: CouplingKind | str, n_a: float, n_b: float, spec: BathSpec
) -> float:
    if n_a < 0 or n_b < 0:
        raise ValueError("occupations must be non-negative")
    kind = CouplingKind(kind)
    s = spec.coupling_sum()
    if kind is CouplingKind.SINGLE_MODE:
        return 2.0 * math.sqrt(n_a) * s
    if kind is CouplingKind.TWO_MODE_LINEAR:
        return 2.0 * (math.sqrt(n_a) + math.sqrt(n_b)) * s
    return 2.0 * math.sqrt(n_a * n_b) * s


class PolicyKind(str, Enum):
    NONE = "none"
    INV_SQRT_N_G = "inv_sqrt_n_g"
    INV_N_G = "inv_n_g"
    GENERAL_SIGMA = "general_sigma"
    GAMMA_POWER = "gamma_power"


@dataclass(frozen=True)
class KacPolicy:
    kind: PolicyKind = PolicyKind.NONE
    sigma: float | None = None
    power: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.kind is PolicyKind.GENERAL_SIGMA:
            if self.sigma is None or not 0 < self.sigma <= 1:
                raise ValueError(f"sigma must lie in (0, 1], got {self.sigma}")
        if self.kind is PolicyKind.GAMMA_POWER and self.power is None:
            raise ValueError("gamma_power policy needs a power")

    @property
    def rate_exponent(self) -> float:
        """p such that gamma(N) = gamma0 * N^-p; amplitudes scale with p/2."""
        k = self.kind
        if k is PolicyKind.NONE:
            return 0.0
        if k is PolicyKind.INV_SQRT_N_G:
            return 1.0
        if k is PolicyKind.INV_N_G:
            return 2.0
        if k is PolicyKind.GENERAL_SIGMA:
            return 2.0 * (0.5 + 1.0 / self.sigma - 1.0)
        return float(self.power)

    def label(self) -> str:
        p = self.rate_exponent
        return "fixed" if p == 0 else f"N^-{p:g}"


def kac_policy(policy: KacPolicy, base: float, n: float, quantity: str = "gamma") -> float:
    """Rescale a rate (``quantity='gamma'``) or coupling amplitude (``'g'``) at size n.

    gamma is proportional to g^2, so an amplitude scaling N^-q is a rate
    scaling N^-2q.
    """
    if n < 1:
        raise ValueError("N must be >= 1")
    p = policy.rate_exponent
    if quantity == "gamma":
        return base * n ** (-p)
    if quantity == "g":
        return base * n ** (-p / 2.0)
    raise ValueError(f"quantity must be 'gamma' or 'g', got {quantity!r}")


@dataclass(frozen=True)
class FitResult:
    slope: float
    stderr: float
    intercept: float
    n_points: int


def fit_scaling_exponent(values, window: slice | tuple[int, int] | None = None) -> FitResult:
    """Least-squares slope of log y against log N over ``window`` (index range)."""
    pts = sorted((float(n), float(y)) for n, y in values)
    if window is not None:
        if isinstance(window, tuple):
            window = slice(*window)
        pts = pts[window]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points to fit, got {len(pts)}")
    n = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.any(y <= 0) or np.any(n <= 0):
        raise ValueError("log-log fit needs positive N and y")
    if len(np.unique(n)) < 2:
        raise ValueError("degenerate window: all N equal")
    fit = stats.linregress(np.log(n), np.log(y))
    return FitResult(float(fit.slope), float(fit.stderr), float(fit.intercept), len(pts))
