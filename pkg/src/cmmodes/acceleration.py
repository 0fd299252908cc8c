"""Nesterov-style over-relaxation with restart wrapped around the ADMM cycle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .operators import LaplaceOperator
from .solver import (
    AdmmState,
    EFactorCache,
    SolveConfig,
    adapt_penalty,
    admm_step,
    check_stop,
    initialize,
    objective,
    project_A_orthonormal,
    residuals,
    shrink,
    update_E,
)

TRACE_COLUMNS = ("iter", "primal", "dual", "c_k", "rho", "objective")
TRACE_FLUSH_EVERY = 100

# hard safety net for the stagnation-triggered momentum: if the combined
# residual jumps by more than this factor in one cycle the overshoot is treated
# as a failure and the shadows fall back to the current iterate
OVERSHOOT_GUARD = 1.2


@dataclass
class MomentumState:
    alpha: float
    v_hat_E: np.ndarray
    v_hat_S: np.ndarray
    dual_hat_E: np.ndarray
    dual_hat_S: np.ndarray
    c_prev: float
    prev_E: np.ndarray
    prev_S: np.ndarray
    prev_dual_E: np.ndarray
    prev_dual_S: np.ndarray

    @classmethod
    def from_state(cls, state: AdmmState) -> "MomentumState":
        return cls(
            alpha=1.0,
            v_hat_E=state.E.copy(),
            v_hat_S=state.S.copy(),
            dual_hat_E=state.dual_E.copy(),
            dual_hat_S=state.dual_S.copy(),
            c_prev=math.inf,
            prev_E=state.E.copy(),
            prev_S=state.S.copy(),
            prev_dual_E=state.dual_E.copy(),
            prev_dual_S=state.dual_S.copy(),
        )


def combined_residual(state: AdmmState, momentum: MomentumState, rho: float) -> float:
    """c_k = rho * (||lambda - lambda_hat||^2 + ||v - v_hat||^2) over both blocks."""
    return rho * float(
        np.sum((state.dual_E - momentum.dual_hat_E) ** 2)
        + np.sum((state.dual_S - momentum.dual_hat_S) ** 2)
        + np.sum((state.E - momentum.v_hat_E) ** 2)
        + np.sum((state.S - momentum.v_hat_S) ** 2)
    )


def update_alpha(alpha: float) -> float:
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * alpha * alpha))


def accelerated_step(state: AdmmState, momentum: MomentumState, op: LaplaceOperator,
                     cfg: SolveConfig, cache: EFactorCache):
    """One accelerated cycle: the ADMM sub-steps consume the over-relaxed shadows."""
    prev_E, prev_S = state.E, state.S
    rho = state.rho

    target = 0.5 * ((momentum.v_hat_E + momentum.dual_hat_E)
                    + (momentum.v_hat_S + momentum.dual_hat_S))
    Phi = project_A_orthonormal(target, op.mass)
    E = update_E(Phi, momentum.dual_hat_E, op.weight, op.mass, rho, cache)
    S = shrink(Phi - momentum.dual_hat_S, cfg.mu / (rho * cache.row_mass))
    dual_E = momentum.dual_hat_E - (Phi - E)
    dual_S = momentum.dual_hat_S - (Phi - S)
    state.Phi, state.E, state.S = Phi, E, S
    state.dual_E, state.dual_S = dual_E, dual_S
    state.it += 1

    c_k = combined_residual(state, momentum, rho)

    restarted = False
    if cfg.restart_rule == "paper":
        # momentum builds while the residual stagnates and resets once it
        # decreases again; a runaway overshoot drops the momentum entirely
        if c_k > OVERSHOOT_GUARD * momentum.c_prev and math.isfinite(momentum.c_prev):
            momentum.alpha = 1.0
            momentum.v_hat_E = E.copy()
            momentum.v_hat_S = S.copy()
            momentum.dual_hat_E = dual_E.copy()
            momentum.dual_hat_S = dual_S.copy()
            restarted = True
        else:
            if c_k < cfg.eta * momentum.c_prev:
                momentum.alpha = 1.0
                restarted = True
            alpha_next = update_alpha(momentum.alpha)
            coeff = (momentum.alpha - 1.0) / alpha_next
            momentum.v_hat_E = E + coeff * (E - momentum.prev_E)
            momentum.v_hat_S = S + coeff * (S - momentum.prev_S)
            momentum.dual_hat_E = dual_E + coeff * (dual_E - momentum.prev_dual_E)
            momentum.dual_hat_S = dual_S + coeff * (dual_S - momentum.prev_dual_S)
            momentum.alpha = alpha_next
        momentum.c_prev = c_k
    else:
        # classic rule: keep momentum on decrease, otherwise restart and revert shadows
        if c_k < cfg.eta * momentum.c_prev:
            alpha_next = update_alpha(momentum.alpha)
            coeff = (momentum.alpha - 1.0) / alpha_next
            momentum.v_hat_E = E + coeff * (E - momentum.prev_E)
            momentum.v_hat_S = S + coeff * (S - momentum.prev_S)
            momentum.dual_hat_E = dual_E + coeff * (dual_E - momentum.prev_dual_E)
            momentum.dual_hat_S = dual_S + coeff * (dual_S - momentum.prev_dual_S)
            momentum.alpha = alpha_next
            momentum.c_prev = c_k
        else:
            # drop the momentum: shadows fall back to the last iterate, so the
            # next cycle is a plain step, while the iterate itself continues
            momentum.alpha = 1.0
            momentum.v_hat_E = momentum.prev_E.copy()
            momentum.v_hat_S = momentum.prev_S.copy()
            momentum.dual_hat_E = momentum.prev_dual_E.copy()
            momentum.dual_hat_S = momentum.prev_dual_S.copy()
            momentum.c_prev = momentum.c_prev / cfg.eta
            restarted = True

    momentum.prev_E, momentum.prev_S = E, S
    momentum.prev_dual_E, momentum.prev_dual_S = dual_E, dual_S

    prev = AdmmState(Phi, prev_E, prev_S, dual_E, dual_S, rho)
    primal, dual = residuals(prev, state, rho)
    state.residual_history.append((primal, dual, c_k))
    return state, momentum, restarted


@dataclass
class ConvergenceTrace:
    rows: list = field(default_factory=list)  # tuples matching TRACE_COLUMNS
    converged: bool = False
    iterations: int = 0

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for row in self.rows:
                fh.write(_format_row(row))


def _format_row(row) -> str:
    it, primal, dual, c_k, rho, obj = row
    ck = "" if math.isnan(c_k) else f"{c_k:.17g}"
    return f"{it},{primal:.17g},{dual:.17g},{ck},{rho:.17g},{obj:.17g}\n"


class _TraceSink:
    """Buffers trace rows, flushing to disk every TRACE_FLUSH_EVERY iterations."""

    def __init__(self, path):
        self.path = path
        self._pending = []
        if path is not None:
            with open(path, "w") as fh:
                fh.write(",".join(TRACE_COLUMNS) + "\n")

    def add(self, row):
        if self.path is None:
            return
        self._pending.append(row)
        if len(self._pending) >= TRACE_FLUSH_EVERY:
            self.flush()

    def flush(self):
        if self.path is None or not self._pending:
            return
        with open(self.path, "a") as fh:
            for row in self._pending:
                fh.write(_format_row(row))
        self._pending = []


def _rescale_momentum_duals(momentum: MomentumState, scale: float) -> None:
    momentum.dual_hat_E *= scale
    momentum.dual_hat_S *= scale
    momentum.prev_dual_E *= scale
    momentum.prev_dual_S *= scale


def _truncate_restart(state: AdmmState, momentum, cfg: SolveConfig):
    """Zero small entries of Phi and restart the iteration from the truncated iterate."""
    Phi = np.where(np.abs(state.Phi) < cfg.truncate_tol, 0.0, state.Phi)
    state.Phi = Phi
    state.E = Phi.copy()
    state.S = Phi.copy()
    state.dual_E = np.zeros_like(Phi)
    state.dual_S = np.zeros_like(Phi)
    return MomentumState.from_state(state) if momentum is not None else None


def solve(op: LaplaceOperator, cfg: SolveConfig, trace_path=None,
          order_by: str = "compressed", flip: str = "extremum",
          initial_state: AdmmState | None = None):
    """Run the configured variant to convergence; package the result as a ModeSet.

    Returns (ModeSet, ConvergenceTrace). Non-convergence at max_iter is
    reported through trace.converged, not an exception.
    """
    from . import spectra  # local import to keep module layering acyclic

    cfg.validate()
    state = initial_state if initial_state is not None else initialize(op, cfg)
    cache = EFactorCache(op.weight, op.mass)
    momentum = MomentumState.from_state(state) if cfg.variant == "fast_admm" else None
    sink = _TraceSink(trace_path)
    trace = ConvergenceTrace()
    n = op.n
    converged = False
    truncated = False

    for _ in range(cfg.max_iter):
        if cfg.variant == "fast_admm":
            state, momentum, _ = accelerated_step(state, momentum, op, cfg, cache)
        else:
            admm_step(state, op, cfg, cache)
        primal, dual, c_k = state.residual_history[-1]
        row = (state.it, primal, dual, c_k, state.rho,
               objective(state.Phi, op, cfg.mu))
        trace.rows.append(row)
        sink.add(row)
        if check_stop(state, cfg, n):
            converged = True
            break
        if (cfg.truncate_restart_at is not None and not truncated
                and state.it >= cfg.truncate_restart_at):
            momentum = _truncate_restart(state, momentum, cfg)
            truncated = True
            continue
        if cfg.penalty_adapt and (cfg.penalty_freeze_iter is None
                                  or state.it <= cfg.penalty_freeze_iter):
            scale = adapt_penalty(state, primal, dual, cfg, cache)
            if scale != 1.0 and momentum is not None:
                _rescale_momentum_duals(momentum, scale)

    sink.flush()
    trace.converged = converged
    trace.iterations = state.it
    modes = spectra.build_mode_set(state.Phi, op, cfg.mu, order_by=order_by, flip=flip)
    return modes, trace
