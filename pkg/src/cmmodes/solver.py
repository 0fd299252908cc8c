"""Baseline ADMM for the compressed-mode problem.

Three-way splitting of  Tr(Phi^T W Phi) + mu ||Phi||_1  subject to
Phi^T A Phi = I  into an orthogonality iterate Phi, a Dirichlet-energy
iterate E and a sparsity iterate S, with scaled duals, residual-based
stopping and Boyd-style adaptive penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FactorizationError, RankDeficient
from .operators import LaplaceOperator, generalized_eigs

RANK_TOL = 1e-12


@dataclass
class SolveConfig:
    mu: float
    k: int
    rho0: float | None = None  # None = spectral auto-scaling
    eps_abs: float = 1e-8
    eps_rel: float = 1e-6
    eta: float = 0.999
    max_iter: int = 20000
    init: str = "random"  # "random" | "eigen"
    seed: int = 0
    variant: str = "fast_admm"  # "admm" | "fast_admm"
    penalty_adapt: bool = True
    penalty_factor: float = 2.0
    penalty_ratio: float = 10.0
    penalty_freeze_iter: int | None = None  # stop adapting rho after this many iterations
    restart_rule: str = "paper"  # "paper" | "goldstein"
    # optional truncate-and-restart heuristic; off by default and not acceptance-gated
    truncate_restart_at: int | None = None
    truncate_tol: float = 1e-4

    def validate(self):
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.rho0 is not None and self.rho0 <= 0:
            raise ValueError("rho0 must be > 0")
        if not 0 < self.eta < 1:
            raise ValueError("eta must be in (0, 1)")
        if self.init not in ("random", "eigen"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.variant not in ("admm", "fast_admm"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.restart_rule not in ("paper", "goldstein"):
            raise ValueError(f"unknown restart_rule {self.restart_rule!r}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        return self


@dataclass
class AdmmState:
    Phi: np.ndarray
    E: np.ndarray
    S: np.ndarray
    dual_E: np.ndarray
    dual_S: np.ndarray
    rho: float
    it: int = 0
    residual_history: list = field(default_factory=list)  # (primal, dual, c_k) per step
    rho_floor: float = 0.0  # adaptation never drops rho below this


def objective(Phi, op: LaplaceOperator, mu: float) -> float:
    """Tr(Phi^T W Phi) + mu * sum |Phi_ij|."""
    return float(np.sum(Phi * (op.weight @ Phi)) + mu * np.abs(Phi).sum())


def shrink(Z, t):
    """Elementwise soft threshold sign(z) * max(|z| - t, 0).

    t may be a scalar or anything that broadcasts against Z (the solver passes
    a per-row threshold mu / (rho * m_i) with m_i the lumped vertex mass, so the
    L1 block is proximal in the same mass-weighted metric as the other blocks).
    """
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be >= 0")
    return np.sign(Z) * np.maximum(np.abs(Z) - t, 0.0)


def project_A_orthonormal(Y, A):
    """Map Y to Phi = Y V Sigma^{-1/2} V^T with Y^T A Y = V Sigma V^T, so Phi^T A Phi = I.

    Only a K x K eigendecomposition is needed; no N x N square root of A is formed.
    """
    G = Y.T @ (A @ Y)
    G = 0.5 * (G + G.T)
    sigma, V = scipy.linalg.eigh(G)
    if sigma.min() <= RANK_TOL:
        raise RankDeficient(
            f"columns collinear under the mass inner product (min eigenvalue {sigma.min():.3e})"
        )
    return Y @ (V * (1.0 / np.sqrt(sigma))) @ V.T


class EFactorCache:
    """Cached sparse factorization of (2W + rho A), rebuilt when rho changes."""

    def __init__(self, W, A):
        self._W2 = (2.0 * W).tocsc()
        self._A = A.tocsc()
        self._rho = None
        self._solve = None
        self.row_mass = np.asarray(A.sum(axis=1)).ravel()[:, None]

    @property
    def mass(self):
        return self._A

    def solve(self, rho: float, rhs):
        if self._solve is None or rho != self._rho:
            try:
                self._solve = spla.factorized(self._W2 + rho * self._A)
            except RuntimeError as exc:
                raise FactorizationError(f"factorization of 2W + rho A failed: {exc}") from exc
            self._rho = rho
        return self._solve(rhs)

    def invalidate(self):
        self._solve = None


def update_E(Phi, dual_E, W, A, rho: float, cache: EFactorCache | None = None):
    """Dirichlet-block minimizer: solves (2W + rho A) E = rho A (Phi - dual_E).

    This is the first-order condition of the Tr(E^T L E) block with
    L = A^{-1} W; with an identity mass matrix it reduces to
    (2W + rho I) E = rho (Phi - dual_E).
    """
    if cache is None:
        cache = EFactorCache(W, A)
    return cache.solve(rho, rho * (A @ (Phi - dual_E)))


def residuals(state_prev: AdmmState, state: AdmmState, rho: float):
    """Primal ||[Phi-E; Phi-S]||_F and dual rho*||(E - E_prev) + (S - S_prev)||_F."""
    pe = state.Phi - state.E
    ps = state.Phi - state.S
    primal = math.sqrt(np.sum(pe * pe) + np.sum(ps * ps))
    d = (state.E - state_prev.E) + (state.S - state_prev.S)
    dual = rho * float(np.linalg.norm(d))
    return primal, dual


def stop_thresholds(state: AdmmState, cfg: SolveConfig, n: int):
    """eps_pri = sqrt(2n) eps_abs + eps_rel max(||Phi||, ||[E;S]||) and
    eps_dual = sqrt(n) eps_abs + eps_rel ||lambda|| with lambda the unscaled
    stacked dual, i.e. rho times the scaled duals the iteration stores."""
    norm_phi = float(np.linalg.norm(state.Phi))
    norm_v = math.sqrt(np.sum(state.E**2) + np.sum(state.S**2))
    norm_dual = state.rho * math.sqrt(np.sum(state.dual_E**2) + np.sum(state.dual_S**2))
    eps_pri = math.sqrt(2 * n) * cfg.eps_abs + cfg.eps_rel * max(norm_phi, norm_v)
    eps_dual = math.sqrt(n) * cfg.eps_abs + cfg.eps_rel * norm_dual
    return eps_pri, eps_dual


def check_stop(state: AdmmState, cfg: SolveConfig, n: int) -> bool:
    if not state.residual_history:
        raise ValueError("residual history is empty")
    primal, dual = state.residual_history[-1][:2]
    eps_pri, eps_dual = stop_thresholds(state, cfg, n)
    return primal <= eps_pri and dual <= eps_dual


def adapt_penalty(state: AdmmState, primal: float, dual: float, cfg: SolveConfig,
                  cache: EFactorCache | None = None) -> float:
    """Boyd residual-balancing rule; returns the factor applied to the duals (1.0 if unchanged).

    rho is never lowered below state.rho_floor: below the top compressed
    eigenvalue the orthonormality projection flips mode signs and the
    iteration has no fixed point.
    """
    tau, ratio = cfg.penalty_factor, cfg.penalty_ratio
    if primal > ratio * dual:
        state.rho *= tau
        scale = 1.0 / tau
    elif dual > ratio * primal and state.rho > state.rho_floor:
        new_rho = max(state.rho / tau, state.rho_floor)
        scale = state.rho / new_rho
        state.rho = new_rho
    else:
        return 1.0
    state.dual_E *= scale
    state.dual_S *= scale
    if cache is not None:
        cache.invalidate()
    return scale


def admm_step(state: AdmmState, op: LaplaceOperator, cfg: SolveConfig,
              cache: EFactorCache) -> AdmmState:
    """One unaccelerated ADMM cycle: Phi, then (E, S), then the duals."""
    prev_E, prev_S = state.E, state.S
    target = 0.5 * ((state.E + state.dual_E) + (state.S + state.dual_S))
    Phi = project_A_orthonormal(target, op.mass)
    E = update_E(Phi, state.dual_E, op.weight, op.mass, state.rho, cache)
    S = shrink(Phi - state.dual_S, cfg.mu / (state.rho * cache.row_mass))
    state.Phi, state.E, state.S = Phi, E, S
    state.dual_E = state.dual_E - (Phi - E)
    state.dual_S = state.dual_S - (Phi - S)
    state.it += 1
    prev = AdmmState(Phi, prev_E, prev_S, state.dual_E, state.dual_S, state.rho)
    primal, dual = residuals(prev, state, state.rho)
    state.residual_history.append((primal, dual, math.nan))
    return state


RHO_AUTO_FACTOR = 3.0


def estimate_lambda_k(W, A, k: int) -> float:
    """Cheap estimate of the k-th smallest generalized eigenvalue for penalty scaling."""
    n = W.shape[0]
    if n <= 200 or k >= n - 1:
        vals, _ = generalized_eigs(W, A, min(k, n))
        return float(vals[-1])
    scale = float(W.diagonal().sum() / A.diagonal().sum())
    v0 = np.full(n, 1.0 / math.sqrt(n))  # fixed start vector for determinism
    try:
        vals = spla.eigsh(W, k=k, M=A, sigma=-1e-3 * scale, which="LM",
                          v0=v0, return_eigenvectors=False)
        return float(vals.max())
    except (spla.ArpackError, RuntimeError):
        vals, _ = generalized_eigs(W, A, k)
        return float(vals[-1])


def auto_rho0(op: LaplaceOperator, cfg: SolveConfig) -> float:
    """Initial penalty a safe factor above the K-th generalized eigenvalue.

    A second term keeps the per-vertex shrink threshold mu / (rho m_i) bounded
    even at the lightest vertex, which is what limits stability for large mu.
    """
    lam = RHO_AUTO_FACTOR * estimate_lambda_k(op.weight, op.mass, cfg.k)
    m_min = float(np.asarray(op.mass.sum(axis=1)).min())
    return max(1.0, lam, 2.0 * cfg.mu / m_min)


def initialize(op: LaplaceOperator, cfg: SolveConfig) -> AdmmState:
    """Random-uniform or eigenfunction initialization, duals zero.

    With rho0 unset, the penalty starts at a spectral auto-scale and that
    value becomes a floor for downward adaptation.
    """
    n, k = op.n, cfg.k
    if cfg.init == "random":
        rng = np.random.default_rng(cfg.seed)
        Phi = project_A_orthonormal(rng.uniform(0.0, 1.0, (n, k)), op.mass)
        E = rng.uniform(0.0, 1.0, (n, k))
        S = rng.uniform(0.0, 1.0, (n, k))
    elif cfg.init == "eigen":
        _, vecs = generalized_eigs(op.weight, op.mass, k)
        Phi = vecs
        E = vecs.copy()
        S = vecs.copy()
    else:
        raise ValueError(f"unknown init {cfg.init!r}")
    if cfg.rho0 is None:
        rho = auto_rho0(op, cfg)
        floor = rho
    else:
        rho = cfg.rho0
        floor = 0.0
    zeros = np.zeros((n, k))
    return AdmmState(Phi, E, S, zeros.copy(), zeros.copy(), rho=rho, rho_floor=floor)
