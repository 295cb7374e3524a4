"""Constrained inverse of the inertia/constraint block matrix.

For a mode with constraint rows ``A`` and inertia ``M`` the inverse

    [[M, Aᵀ], [A, 0]]⁻¹ = [[M†, A†ᵀ], [A†, Λ]]

is well defined even when ``M`` is singular, as long as the active constraints fix every
massless coordinate. All dynamics, impulses and complementarity tests are written in terms
of these four blocks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg

from contact_hybrid.errors import (
    DegenerateExtensionError,
    InternalInconsistencyError,
    RankDeficientConstraintsError,
    SingularBlockMatrixError,
)

if TYPE_CHECKING:
    from contact_hybrid.core.system import ContactMode

logger = logging.getLogger(__name__)

# Relative singular-value cutoff for both the block matrix and the constraint rows.
SINGULAR_CUTOFF = 1e-12

TOL_LIN = 1e-10

# Factor around SINGULAR_CUTOFF inside which the two invertibility tests may disagree.
EQUIVALENCE_BAND = 1e3


@dataclass(frozen=True)
class BlockInverse:
    """The quadruple (M†, A†ᵀ, A†, Λ) for one set of constraint rows.

    ``rows`` lists the constraint indices in row order. It is the global order for a fresh
    build and append order after :func:`extend_block_inverse`.
    """

    mdag: np.ndarray
    adag_t: np.ndarray
    adag: np.ndarray
    lambda_mat: np.ndarray
    mode: ContactMode | None = None
    rows: tuple[int, ...] = field(default_factory=tuple)

    @property
    def n_coords(self) -> int:
        return self.mdag.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.lambda_mat.shape[0]

    def position(self, index: int) -> int:
        """Row position of constraint ``index``."""
        return self.rows.index(index)


def _relative_rank(matrix: np.ndarray) -> tuple[int, np.ndarray]:
    singular = np.linalg.svd(matrix, compute_uv=False)
    if singular.size == 0 or singular[0] == 0.0:
        return 0, singular
    return int(np.sum(singular > SINGULAR_CUTOFF * singular[0])), singular


def constraint_rank(a: np.ndarray) -> int:
    """Numerical row rank of ``a`` under the engine's relative cutoff."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] == 0:
        return 0
    return _relative_rank(a)[0]


def block_matrix(m: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Assemble [[m, aᵀ], [a, 0]]."""
    c = a.shape[0]
    return np.block([[m, a.T], [a, np.zeros((c, c))]])


def build_block_inverse(
    m: np.ndarray,
    a: np.ndarray,
    *,
    mode: ContactMode | None = None,
    rows: tuple[int, ...] | None = None,
) -> BlockInverse:
    """Invert the constrained block matrix once with a pivoted LU factorization.

    Args:
        m: Inertia matrix, q×q, symmetric positive semi-definite.
        a: Constraint matrix, c×q, full row rank.
        mode: Contact mode the rows belong to, recorded on the result.
        rows: Constraint indices in row order; defaults to ``0..c-1``.

    Raises:
        RankDeficientConstraintsError: If ``a`` is row-rank-deficient.
        SingularBlockMatrixError: If the block matrix is not invertible.
    """
    m = np.asarray(m, dtype=float)
    q = m.shape[0]
    a = np.asarray(a, dtype=float).reshape(-1, q)
    c = a.shape[0]
    label = str(mode) if mode is not None else None

    if c:
        rank, _ = _relative_rank(a)
        if rank < c:
            raise RankDeficientConstraintsError(rank, c, label)

    block = block_matrix(m, a)
    singular = np.linalg.svd(block, compute_uv=False)
    if singular[0] == 0.0 or singular[-1] < SINGULAR_CUTOFF * singular[0]:
        raise SingularBlockMatrixError(float(singular[-1]), float(singular[0]), label)

    lu, piv = scipy.linalg.lu_factor(block, check_finite=False)
    inverse = scipy.linalg.lu_solve((lu, piv), np.eye(q + c), check_finite=False)
    # The block matrix is symmetric, so is its inverse.
    inverse = 0.5 * (inverse + inverse.T)

    return BlockInverse(
        mdag=inverse[:q, :q],
        adag_t=inverse[:q, q:],
        adag=inverse[q:, :q],
        lambda_mat=inverse[q:, q:],
        mode=mode,
        rows=tuple(rows) if rows is not None else tuple(range(c)),
    )


def extend_block_inverse(
    base: BlockInverse,
    a_k: np.ndarray,
    *,
    index: int | None = None,
    mode: ContactMode | None = None,
    tol: float = TOL_LIN,
) -> BlockInverse:
    """Append one constraint row through the rank-one Schur update.

    With s = a_k M†_J a_kᵀ, u = M†_J a_kᵀ and v = A†_J a_kᵀ the blocks for J ∪ {k} are

        M†_K  = M†_J − u uᵀ / s
        A†ᵀ_K = [A†ᵀ_J − u vᵀ / s,  u / s]
        Λ_K   = [[Λ_J − v vᵀ / s, v / s], [vᵀ / s, −1 / s]]

    The scale of ``s`` is judged against ‖a_k‖² ‖M†_J‖ so the cutoff is unit free.

    Raises:
        DegenerateExtensionError: If ``s`` is not positive beyond the tolerance.
    """
    a_k = np.asarray(a_k, dtype=float).reshape(-1)
    u = base.mdag @ a_k
    s = float(a_k @ u)
    reference = float(a_k @ a_k) * max(np.linalg.norm(base.mdag, 2), np.finfo(float).tiny)
    if s <= tol * reference:
        raise DegenerateExtensionError(s, tol * reference)
    v = base.adag @ a_k

    mdag = base.mdag - np.outer(u, u) / s
    adag_t = np.hstack([base.adag_t - np.outer(u, v) / s, (u / s)[:, None]])
    c = base.n_constraints
    lambda_mat = np.empty((c + 1, c + 1))
    lambda_mat[:c, :c] = base.lambda_mat - np.outer(v, v) / s
    lambda_mat[:c, c] = v / s
    lambda_mat[c, :c] = v / s
    lambda_mat[c, c] = -1.0 / s

    rows = base.rows + ((index if index is not None else c),)
    return BlockInverse(
        mdag=mdag,
        adag_t=adag_t,
        adag=adag_t.T.copy(),
        lambda_mat=lambda_mat,
        mode=mode,
        rows=rows,
    )


def block_identity_residuals(bi: BlockInverse, m: np.ndarray, a: np.ndarray) -> dict[str, float]:
    """Norm-scaled residuals of the defining identities of a block inverse.

    Keys: ``a_adag_t``, ``adag_a_t`` (A A†ᵀ = Id, A† Aᵀ = Id), ``mdag_a_t``, ``a_mdag``
    (M† Aᵀ = 0, A M† = 0), ``completeness`` (M† M + A†ᵀ A = Id), ``adag_m`` (A† M + Λ A = 0),
    ``lambda_symmetry`` and ``lambda_psd`` (largest eigenvalue of Λ, must be ≤ 0).
    """
    m = np.asarray(m, dtype=float)
    a = np.asarray(a, dtype=float).reshape(-1, m.shape[0])
    q, c = m.shape[0], a.shape[0]
    scale_m = max(np.linalg.norm(m, 2), 1.0)
    scale_a = max(np.linalg.norm(a, 2) if c else 0.0, 1.0)
    scale_dag = max(np.linalg.norm(bi.mdag, 2), np.linalg.norm(bi.adag, 2) if c else 0.0, 1.0)

    def rel(x: np.ndarray, scale: float) -> float:
        return float(np.max(np.abs(x)) / scale) if x.size else 0.0

    residuals = {
        "a_adag_t": rel(a @ bi.adag_t - np.eye(c), scale_a * scale_dag),
        "adag_a_t": rel(bi.adag @ a.T - np.eye(c), scale_a * scale_dag),
        "mdag_a_t": rel(bi.mdag @ a.T, scale_a * scale_dag),
        "a_mdag": rel(a @ bi.mdag, scale_a * scale_dag),
        "completeness": rel(bi.mdag @ m + bi.adag_t @ a - np.eye(q), (scale_m + scale_a) * scale_dag),
        "adag_m": rel(bi.adag @ m + bi.lambda_mat @ a, (scale_m + scale_a) * scale_dag),
        "lambda_symmetry": rel(bi.lambda_mat - bi.lambda_mat.T, scale_dag),
    }
    if c:
        top = float(np.max(np.linalg.eigvalsh(0.5 * (bi.lambda_mat + bi.lambda_mat.T))))
        residuals["lambda_psd"] = max(top, 0.0) / max(np.linalg.norm(bi.lambda_mat, 2), 1.0)
    else:
        residuals["lambda_psd"] = 0.0
    return residuals


def check_reduced_equivalence(m: np.ndarray, a: np.ndarray) -> bool:
    """Check that block invertibility matches invertibility of the reduced inertia.

    The reduced inertia is Hᵀ M H with H an orthonormal basis of ker(a). Both tests run on
    the same normalized data (unit constraint rows, ‖M‖ = 1), so rescaling rows or units
    does not change the verdict. The reduced test decides; the block test only has to agree
    outside a band of ``EQUIVALENCE_BAND`` around the cutoff.

    Raises:
        InternalInconsistencyError: If the two tests clearly disagree.
    """
    m = np.asarray(m, dtype=float)
    q = m.shape[0]
    a = np.asarray(a, dtype=float).reshape(-1, q)

    norms = np.linalg.norm(a, axis=1, keepdims=True)
    a_hat = a / np.maximum(norms, np.finfo(float).tiny)
    m_hat = m / max(np.linalg.norm(m, 2), np.finfo(float).tiny)

    singular = np.linalg.svd(block_matrix(m_hat, a_hat), compute_uv=False)
    block_ratio = float(singular[-1] / singular[0]) if singular[0] > 0.0 else 0.0

    kernel = scipy.linalg.null_space(a_hat) if a.shape[0] else np.eye(q)
    if kernel.shape[1] == 0:
        reduced_ratio = 1.0
    else:
        reduced_ratio = float(np.linalg.svd(kernel.T @ m_hat @ kernel, compute_uv=False)[-1])

    invertible = reduced_ratio >= SINGULAR_CUTOFF
    clear_yes = SINGULAR_CUTOFF * EQUIVALENCE_BAND
    clear_no = SINGULAR_CUTOFF / EQUIVALENCE_BAND
    if (block_ratio >= clear_yes and reduced_ratio < clear_no) or (
        reduced_ratio >= clear_yes and block_ratio < clear_no
    ):
        raise InternalInconsistencyError(
            f"Block matrix conditioning {block_ratio:.3g} but reduced inertia {reduced_ratio:.3g}"
        )
    logger.debug(
        "reduced_equivalence q=%d c=%d invertible=%s block=%.3g reduced=%.3g",
        q,
        a.shape[0],
        invertible,
        block_ratio,
        reduced_ratio,
    )
    return invertible
