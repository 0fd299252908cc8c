"""Compressed eigenvalues, mode ordering, orientation, and the accuracy residual."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import LaplaceOperator

# entries below this are snapped to exact zero when a mode set is assembled, so
# the sign term of the accuracy residual ignores round-off left by the
# orthonormality projection outside a mode's support
MODE_ZERO_TOL = 1e-5


@dataclass
class ModeSet:
    modes: np.ndarray                      # N x K, columns ordered
    compressed_eigenvalues: np.ndarray     # K ascending
    flipped: np.ndarray                    # K bools
    mu: float
    accuracy: np.ndarray                   # K mean-absolute residuals
    permutation: np.ndarray                # original column index of each ordered column
    dirichlet_energy: np.ndarray
    l1_norm: np.ndarray

    @property
    def k(self) -> int:
        return self.modes.shape[1]


def compressed_eigenvalue(phi, W, mu: float) -> float:
    """lambda = phi^T W phi + (mu/2) ||phi||_1."""
    return float(phi @ (W @ phi) + 0.5 * mu * np.abs(phi).sum())


def dirichlet_energy(phi, W) -> float:
    return float(phi @ (W @ phi))


def order_modes(Phi, W, mu: float, order_by: str = "compressed"):
    """Stable ascending sort of columns by compressed eigenvalue (or Dirichlet energy).

    Returns (sorted Phi, sorted eigenvalues, permutation). Ties keep original
    column order so near-degenerate pairs come out deterministically.
    """
    if order_by not in ("compressed", "dirichlet"):
        raise ValueError(f"unknown ordering {order_by!r}")
    if order_by == "compressed":
        key = np.array([compressed_eigenvalue(Phi[:, j], W, mu) for j in range(Phi.shape[1])])
    else:
        key = np.array([dirichlet_energy(Phi[:, j], W) for j in range(Phi.shape[1])])
    perm = np.argsort(key, kind="stable")
    return Phi[:, perm], key[perm], perm


def flip_mode(phi, method: str = "extremum", A=None):
    """Resolve the +-phi sign ambiguity; returns (phi, was_flipped).

    extremum: negate when max(phi) + min(phi) < 0.
    integral: negate when the discrete integral 1^T A phi < 0.
    The exact tie (max = -min, or zero integral) leaves the mode unflipped.
    """
    if method == "extremum":
        flip = (phi.max() + phi.min()) < 0
    elif method == "integral":
        if A is None:
            raise ValueError("integral flip requires the mass matrix")
        flip = float(np.sum(A @ phi)) < 0
    else:
        raise ValueError(f"unknown flip method {method!r}")
    return (-phi, True) if flip else (phi, False)


def accuracy_residual(phi, lam: float, op: LaplaceOperator, mu: float) -> float:
    """Mean entry of |W phi + (mu/2) sign(phi) - lambda A phi|, with sign(0) = 0."""
    r = op.weight @ phi + 0.5 * mu * np.sign(phi) - lam * (op.mass @ phi)
    return float(np.abs(r).mean())


def lagrangian_matrix(Phi, W, mu: float):
    """Diagnostic readout Phi^T W Phi + (mu/2) Phi^T sign(Phi); its diagonal holds the compressed eigenvalues."""
    return Phi.T @ (W @ Phi) + 0.5 * mu * (Phi.T @ np.sign(Phi))


def build_mode_set(Phi, op: LaplaceOperator, mu: float,
                   order_by: str = "compressed", flip: str = "extremum") -> ModeSet:
    """Order, orient, and annotate a converged iterate."""
    Phi = np.where(np.abs(Phi) < MODE_ZERO_TOL, 0.0, Phi)
    Phi_sorted, lam, perm = order_modes(Phi, op.weight, mu, order_by=order_by)
    k = Phi_sorted.shape[1]
    flags = np.zeros(k, dtype=bool)
    if flip != "none":
        cols = []
        for j in range(k):
            col, flags[j] = flip_mode(Phi_sorted[:, j], method=flip, A=op.mass)
            cols.append(col)
        Phi_sorted = np.column_stack(cols)
    acc = np.array([accuracy_residual(Phi_sorted[:, j], lam[j], op, mu) for j in range(k)])
    dir_e = np.array([dirichlet_energy(Phi_sorted[:, j], op.weight) for j in range(k)])
    l1 = np.abs(Phi_sorted).sum(axis=0)
    return ModeSet(
        modes=Phi_sorted,
        compressed_eigenvalues=lam,
        flipped=flags,
        mu=mu,
        accuracy=acc,
        permutation=perm,
        dirichlet_energy=dir_e,
        l1_norm=l1,
    )


def write_eigenvalue_table(modeset: ModeSet, path) -> None:
    """CSV table: rank, lambda, dirichlet_energy, l1_norm, accuracy_residual, flipped."""
    with open(path, "w") as fh:
        fh.write("rank,lambda,dirichlet_energy,l1_norm,accuracy_residual,flipped\n")
        for j in range(modeset.k):
            fh.write(
                f"{j + 1},{modeset.compressed_eigenvalues[j]:.17g},"
                f"{modeset.dirichlet_energy[j]:.17g},{modeset.l1_norm[j]:.17g},"
                f"{modeset.accuracy[j]:.17g},{int(modeset.flipped[j])}\n"
            )
