"""N-grid experiments: prepare, propagate, evaluate the QFI, fit the scaling."""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .extensivity import FitResult, KacPolicy, fit_scaling_exponent, kac_policy
from .fock import build_basis, off_sector_norm, sector_basis
from .lindblad import DissipatorKind, IntegratorOptions, LindbladModel
from .metrology import DerivativeMode, crlb, drho_ddelta, qfi_blocked
from .states import StateKind, default_apply_bs, prepare_protocol_state

log = logging.getLogger(__name__)


class Scaling(str, Enum):
    HEISENBERG = "heisenberg"
    SHOT_NOISE = "shot_noise"
    INTERMEDIATE = "intermediate"
    DEGRADING = "degrading"


class SweepError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    state: StateKind = StateKind.NOON
    dissipator: DissipatorKind = DissipatorKind.ALPHA
    gamma0: float = 0.0
    policy: KacPolicy = field(default_factory=KacPolicy)
    n_grid: tuple[int, ...] = tuple(range(2, 25, 2))
    delta0: float = 0.1
    hold_time: float = 1.0
    apply_bs: bool | None = None
    derivative: DerivativeMode = DerivativeMode.SENSITIVITY_ODE
    fd_step: float | None = None
    eps_p: float = 1e-12
    # inclusive (N_min, N_max); None fits the upper half of the grid
    fit_window: tuple[int, int] | None = None
    integrator: IntegratorOptions = field(default_factory=IntegratorOptions)
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "state", StateKind(self.state))
        object.__setattr__(self, "dissipator", DissipatorKind(self.dissipator))
        object.__setattr__(self, "derivative", DerivativeMode(self.derivative))
        grid = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        if not grid:
            raise ValueError("n_grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be strictly ascending")
        if grid[0] < 1:
            raise ValueError("n_grid entries must be >= 1")
        if self.state is StateKind.TWIN_FOCK and any(n % 2 or n < 2 for n in grid):
            raise ValueError("twin-Fock grids need even N >= 2")
        if self.gamma0 < 0:
            raise ValueError("gamma0 must be >= 0")
        if self.hold_time < 0:
            raise ValueError("hold_time must be >= 0")

    @property
    def bs_applied(self) -> bool:
        return default_apply_bs(self.state) if self.apply_bs is None else self.apply_bs

    def gamma_at(self, n: int) -> float:
        return kac_policy(self.policy, self.gamma0, n, quantity="gamma")

    def window_indices(self) -> slice:
        if self.fit_window is None:
            return slice(len(self.n_grid) // 2, len(self.n_grid))
        lo, hi = self.fit_window
        idx = [i for i, n in enumerate(self.n_grid) if lo <= n <= hi]
        if not idx:
            raise ValueError(f"fit window {self.fit_window} holds no grid point")
        return slice(idx[0], idx[-1] + 1)

    def curve_name(self) -> str:
        return self.label or f"{self.state.value}__{self.dissipator.value}__g{self.gamma0:g}_{self.policy.label()}"


@dataclass(frozen=True)
class PointRecord:
    n: int
    gamma: float
    f_q: float
    crlb: float
    wall_time: float
    # physicality of the final state
    min_eigenvalue: float = math.nan
    trace_error: float = math.nan
    hermiticity_error: float = math.nan
    off_sector: float = math.nan
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ScalingCurve:
    config: ExperimentConfig
    records: list[PointRecord]
    fit: FitResult | None = None
    classification: Scaling | None = None

    @property
    def complete(self) -> bool:
        return all(r.ok for r in self.records)

    @property
    def name(self) -> str:
        return self.config.curve_name()

    def ns(self):
        return [r.n for r in self.records]

    def crlbs(self):
        return [r.crlb for r in self.records]


def classify_scaling(slope: float) -> Scaling:
    if not math.isfinite(slope):
        raise ValueError("slope must be finite")
    if slope <= -0.85:
        return Scaling.HEISENBERG
    if -0.65 <= slope <= -0.35:
        return Scaling.SHOT_NOISE
    if slope > 0.05:
        return Scaling.DEGRADING
    return Scaling.INTERMEDIATE


def evaluate_point(config: ExperimentConfig, n: int) -> PointRecord:
    """One grid point: F_Q and CRLB of the state after the holding time."""
    start = time.perf_counter()
    gamma = config.gamma_at(n)
    try:
        if config.dissipator is DissipatorKind.J_MINUS:
            basis = sector_basis(n)
        else:
            basis = build_basis(n)
        rho0 = prepare_protocol_state(basis, config.state, n, config.apply_bs)
        model = LindbladModel(basis, config.delta0, gamma, config.dissipator)
        d = drho_ddelta(
            model, rho0, config.hold_time, config.delta0,
            h=config.fd_step, mode=config.derivative, opts=config.integrator,
        )
        # rho and d rho stay block-diagonal over sectors, so the QFI splits
        res = qfi_blocked(d.rho, d.drho, basis.sector_ranges.values(), config.eps_p)
        bound = crlb(res.f_q)
        return PointRecord(
            n, gamma, res.f_q, bound, time.perf_counter() - start, **_diagnostics(basis, d.rho)
        )
    except (ValueError, RuntimeError) as exc:
        log.warning("N=%d failed: %s", n, exc)
        return PointRecord(
            n, gamma, math.nan, math.nan, time.perf_counter() - start, error=str(exc)
        )


def _diagnostics(basis, rho: np.ndarray) -> dict:
    blocks = [rho[r.start : r.stop, r.start : r.stop] for r in basis.sector_ranges.values()]
    return dict(
        min_eigenvalue=min(float(np.linalg.eigvalsh(0.5 * (b + b.conj().T))[0]) for b in blocks),
        trace_error=float(abs(np.trace(rho) - 1.0)),
        hermiticity_error=float(np.max(np.abs(rho - rho.conj().T))),
        off_sector=off_sector_norm(basis, rho),
    )


def _point_task(args):
    return evaluate_point(*args)


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get("OPENQI_THREADS")
        workers = int(env) if env else 1
    return max(1, workers)


def _map_points(tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [_point_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_point_task, tasks))


def finish_curve(config: ExperimentConfig, records: list[PointRecord]) -> ScalingCurve:
    records = sorted(records, key=lambda r: r.n)
    curve = ScalingCurve(config, records)
    if not any(r.ok for r in records):
        raise SweepError(
            f"{config.curve_name()}: every grid point failed "
            f"(first error: {records[0].error})"
        )
    if curve.complete:
        window = config.window_indices()
        if len(records[window]) >= 3:
            curve.fit = fit_scaling_exponent([(r.n, r.crlb) for r in records], window)
            curve.classification = classify_scaling(curve.fit.slope)
    return curve


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ScalingCurve:
    workers = resolve_workers(workers)
    records = _map_points([(config, n) for n in config.n_grid], workers)
    return finish_curve(config, records)


@dataclass(frozen=True)
class NoisePolicy:
    """A named choice of base rate and its N-rescaling."""

    label: str
    gamma0: float
    policy: KacPolicy = field(default_factory=KacPolicy)


def compare_policies(
    base: ExperimentConfig, policies: list[NoisePolicy], workers: int | None = None
) -> list[ScalingCurve]:
    """One curve per policy on the shared grid; all points share one worker pool."""
    if not policies:
        raise ValueError("no policies given")
    workers = resolve_workers(workers)
    configs = [
        replace(base, gamma0=p.gamma0, policy=p.policy, label=p.label) for p in policies
    ]
    tasks = [(c, n) for c in configs for n in c.n_grid]
    records = _map_points(tasks, workers)
    curves, i = [], 0
    for c in configs:
        k = len(c.n_grid)
        curves.append(finish_curve(c, records[i : i + k]))
        i += k
    return curves
