"""Discrete Laplace-Beltrami building blocks: cotan weights, mass matrices, eigensolver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp

from .errors import DegenerateTriangleError, NotPositiveDefinite
from .mesh import TriangleMesh

COTAN_CAP = 1e8
DENSE_SOLVER_CAP = 5000


@dataclass(frozen=True)
class LaplaceOperator:
    """The decomposition L = A^{-1} W with W the cotan weight matrix and A a mass matrix."""

    weight: sp.csr_array
    mass: sp.csr_array
    mass_kind: str  # "lumped" | "unlumped"

    @property
    def n(self) -> int:
        return self.weight.shape[0]


def build_laplacian(mesh: TriangleMesh, mass_kind: str = "lumped") -> LaplaceOperator:
    if mass_kind not in ("lumped", "unlumped"):
        raise ValueError(f"mass_kind must be 'lumped' or 'unlumped', got {mass_kind!r}")
    return LaplaceOperator(
        weight=assemble_cotan_weights(mesh),
        mass=assemble_mass(mesh, mass_kind),
        mass_kind=mass_kind,
    )


def assemble_cotan_weights(mesh: TriangleMesh) -> sp.csr_array:
    """Cotan weight matrix W, positive semidefinite (Dirichlet energy) sign convention.

    Off-diagonal W_ij = -(cot a + cot b)/2 over the triangles containing edge ij,
    with the cotangents taken at the angles opposite the edge; W_ii = -sum_j W_ij.
    """
    v, f = mesh.vertices, mesh.faces
    n = mesh.n_vertices
    rows, cols, vals = [], [], []
    for k in range(3):
        # angle at vertex f[:, k] is opposite edge (f[:, k+1], f[:, k+2])
        i = f[:, (k + 1) % 3]
        j = f[:, (k + 2) % 3]
        a = v[i] - v[f[:, k]]
        b = v[j] - v[f[:, k]]
        cross = np.linalg.norm(np.cross(a, b), axis=1)
        cot = np.einsum("ij,ij->i", a, b) / cross
        if np.abs(cot).max() > COTAN_CAP:
            bad = int(np.argmax(np.abs(cot)))
            raise DegenerateTriangleError(
                f"triangle {bad} has |cot angle| = {np.abs(cot).max():.3e} > {COTAN_CAP:.0e}"
            )
        half = 0.5 * cot
        rows += [i, j]
        cols += [j, i]
        vals += [-half, -half]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    w = sp.coo_array((vals, (rows, cols)), shape=(n, n)).tocsr()
    diag = -np.asarray(w.sum(axis=1)).ravel()
    w = w + sp.diags_array(diag, format="csr")
    w.eliminate_zeros()
    return w


def assemble_mass(mesh: TriangleMesh, kind: str = "lumped") -> sp.csr_array:
    """Piecewise-linear FEM mass matrix; `lumped` row-lumps it onto the diagonal."""
    f = mesh.faces
    n = mesh.n_vertices
    areas = mesh.face_areas()
    if kind == "lumped":
        diag = np.zeros(n)
        for k in range(3):
            np.add.at(diag, f[:, k], areas / 3.0)
        return sp.diags_array(diag, format="csr")
    if kind != "unlumped":
        raise ValueError(f"kind must be 'lumped' or 'unlumped', got {kind!r}")
    rows, cols, vals = [], [], []
    for k in range(3):
        rows.append(f[:, k])
        cols.append(f[:, k])
        vals.append(areas / 6.0)
        i = f[:, k]
        j = f[:, (k + 1) % 3]
        rows += [i, j]
        cols += [j, i]
        vals += [areas / 12.0, areas / 12.0]
    a = sp.coo_array(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    a.eliminate_zeros()
    return a


def generalized_eigs(W, A, k: int, dense_cap: int = DENSE_SOLVER_CAP):
    """K smallest eigenpairs of W phi = lambda A phi, eigenvectors A-orthonormal.

    Dense solve; meant for initialization and oracle duty at desk scale.
    """
    n = W.shape[0]
    if n > dense_cap:
        raise ValueError(f"problem size {n} exceeds dense solver cap {dense_cap}")
    if k > n:
        raise ValueError(f"requested {k} eigenpairs of a {n}x{n} problem")
    Wd = W.toarray() if sp.issparse(W) else np.asarray(W, dtype=np.float64)
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=np.float64)
    try:
        vals, vecs = scipy.linalg.eigh(Wd, Ad, subset_by_index=[0, k - 1])
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NotPositiveDefinite(f"mass matrix failed factorization: {exc}") from exc
    return vals, vecs


def write_matrix_market(M, path) -> None:
    """Dump a symmetric sparse matrix in MatrixMarket coordinate format."""
    coo = sp.coo_matrix(M)
    scipy.io.mmwrite(str(path), coo, symmetry="symmetric")
