"""Log norms of exterior powers and of Jacobian cocycles.

``|Λ^k A|`` is the operator norm of the map induced on k-vectors, which is
the product of the k largest singular values of ``A``.  Everything here is
computed in log space.  Tangent frames are pushed along orbits with a QR
step per iterate; cocycle norms are carried on k-vectors with a scalar
rescaling per iterate, so long products never overflow.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from ._validation import check_k, check_point, check_points

__all__ = [
    "LOG_FLOOR",
    "LogNorm",
    "exterior_log_norm",
    "exterior_log_norms",
    "minor_matrix",
    "minor_matrix_log_norm",
    "compound",
    "orbit_jacobians",
    "push_frames",
    "cocycle_log_norm",
    "cocycle_log_norms",
]

#: log of a zero singular value is replaced by this value and flagged
LOG_FLOOR = -745.0

@dataclass(frozen=True)
class LogNorm:
    value: float
    is_floor: bool = False

    def __float__(self):
        return float(self.value)


def _safe_log(s):
    zero = s <= 0.0
    with np.errstate(divide="ignore"):
        out = np.log(np.where(zero, 1.0, s))
    return np.where(zero, LOG_FLOOR, out), zero


def exterior_log_norms(A, k):
    """Batched ``log|Λ^k A|`` over the leading axes of ``A``.

    Returns ``(values, floored)`` arrays with the batch shape.
    """
    A = np.asarray(A, dtype=float)
    s = np.linalg.svd(A, compute_uv=False)[..., :k]
    logs, zero = _safe_log(s)
    return logs.sum(axis=-1), zero.any(axis=-1)


def exterior_log_norm(A, k):
    """``log|Λ^k A|`` as the sum of logs of the k largest singular values."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2:
        raise ValueError("A must be a matrix")
    k = check_k(k, min(A.shape))
    value, floored = exterior_log_norms(A, k)
    return LogNorm(float(value), bool(floored))


def minor_matrix(A, k):
    """Matrix of ``Λ^k A`` in the lexicographic basis of k-vectors."""
    A = np.asarray(A, dtype=float)
    rows = list(combinations(range(A.shape[0]), k))
    cols = list(combinations(range(A.shape[1]), k))
    C = np.empty((len(rows), len(cols)))
    for a, I in enumerate(rows):
        for b, J in enumerate(cols):
            C[a, b] = np.linalg.det(A[np.ix_(I, J)])
    return C


def minor_matrix_log_norm(A, k):
    """Brute-force ``log|Λ^k A|`` from the matrix of k x k minors.

    Independent of :func:`exterior_log_norm`; used as its oracle.  Refuses
    matrices larger than 8 x 8 (the minor matrix has C(d, k)^2 entries).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if max(A.shape) > 8:
        raise ValueError("minor_matrix_log_norm refuses matrices larger than 8 x 8")
    k = check_k(k, min(A.shape))
    norm = np.linalg.norm(minor_matrix(A, k), 2)
    if norm == 0.0:
        return LogNorm(LOG_FLOOR, True)
    return LogNorm(float(np.log(norm)), False)


# --------------------------------------------------------------------------
# cocycles


def _orthonormalize(M):
    """QR of a stack of d x k frames: ``(Q, log|diag R|, any_zero)``."""
    k = M.shape[-1]
    if k == 1:
        r = np.linalg.norm(M, axis=-2)
        logs, zero = _safe_log(r)
        Q = M / np.where(zero, 1.0, r)[..., None, :]
        return Q, logs, zero.any(axis=-1)
    if k == 2:
        # Gram-Schmidt; inputs are images of orthonormal frames, so the two
        # columns are never closer to parallel than cond(J) allows
        a, b = M[..., 0], M[..., 1]
        ra = np.linalg.norm(a, axis=-1)
        qa = a / np.where(ra == 0.0, 1.0, ra)[..., None]
        b = b - np.sum(qa * b, axis=-1)[..., None] * qa
        rb = np.linalg.norm(b, axis=-1)
        qb = b / np.where(rb == 0.0, 1.0, rb)[..., None]
        logs, zero = _safe_log(np.stack([ra, rb], axis=-1))
        return np.stack([qa, qb], axis=-1), logs, zero.any(axis=-1)
    Q, R = np.linalg.qr(M)
    logs, zero = _safe_log(np.abs(np.diagonal(R, axis1=-2, axis2=-1)))
    return Q, logs, zero.any(axis=-1)


@lru_cache(maxsize=None)
def _minor_index(d, k):
    combos = np.array(list(combinations(range(d), k)), dtype=np.intp)
    rows = combos[:, None, :, None]
    cols = combos[None, :, None, :]
    return rows, cols


def compound(J, k):
    """Batched k-th compound (matrix of k x k minors) of square ``J``."""
    J = np.asarray(J, dtype=float)
    d = J.shape[-1]
    if k == 1:
        return J
    rows, cols = _minor_index(d, k)
    sub = J[..., rows, cols]
    if k == 2:
        return sub[..., 0, 0] * sub[..., 1, 1] - sub[..., 0, 1] * sub[..., 1, 0]
    return np.linalg.det(sub)


def orbit_jacobians(system, X, n):
    """Jacobians along the orbits of ``X``: shape ``(n, B, d, d)``."""
    X = np.array(X, dtype=float)
    out = np.empty((n, X.shape[0], system.d, system.d))
    for t in range(n):
        out[t] = system.jac(X)
        X = system.step(X)
    return out


def push_frames(J, F):
    """Push frames ``F`` (B, d, k) through the Jacobian sequence ``J``.

    Returns the accumulated log k-volume expansion, the final orthonormal
    frames and a per-batch floor flag.  The input frames are orthonormalized
    first and their own log volume is *not* included.
    """
    Q, _, floored = _orthonormalize(np.asarray(F, dtype=float))
    acc = np.zeros(Q.shape[0])
    for t in range(len(J)):
        Q, logs, zero = _orthonormalize(J[t] @ Q)
        acc += logs.sum(axis=-1)
        floored |= zero
    return acc, Q, floored


def cocycle_log_norms(system, X, n, k):
    """Batched ``log|Λ^k T_x f^n|`` for each row of ``X``.

    Returns ``(values, floored)`` arrays of length ``B``.
    """
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    X = check_points(system, X)
    k = check_k(k, system.d)
    B = X.shape[0]
    if n == 0:
        return np.zeros(B), np.zeros(B, dtype=bool)
    if k == system.d:
        # top compound is the determinant; products of scalars need no rescaling
        acc = np.zeros(B)
        floored = np.zeros(B, dtype=bool)
        for _ in range(n):
            sign, logdet = np.linalg.slogdet(system.jac(X))
            zero = sign == 0
            floored |= zero
            acc += np.where(zero, LOG_FLOOR, logdet)
            X = system.step(X)
        return acc, floored
    size = comb(system.d, k)
    M = np.broadcast_to(np.eye(size), (B, size, size))
    acc = np.zeros(B)
    floored = np.zeros(B, dtype=bool)
    for _ in range(n):
        M = compound(system.jac(X), k) @ M
        s = np.sqrt(np.einsum("bij,bij->b", M, M))
        zero = s == 0.0
        if zero.any():
            # product annihilated every k-vector: floor and restart
            floored |= zero
            acc[zero] += LOG_FLOOR
            M[zero] = np.eye(size)
            s = np.where(zero, 1.0, s)
        acc += np.log(s)
        M = M / s[:, None, None]
        X = system.step(X)
    top = np.linalg.svd(M, compute_uv=False)[:, 0]
    return acc + np.log(top), floored


def cocycle_log_norm(system, x, n, k):
    """``log|Λ^k T_x f^n|`` along the orbit of ``x``.

    The cocycle is carried on k-vectors: the compound matrices of the step
    Jacobians are multiplied in order, the running product is rescaled to
    unit Frobenius norm at every step (the log scale is accumulated) and the
    top singular value of the rescaled product gives the remaining factor.
    Only the largest singular value of the product is read off, so there is
    no overflow and no loss from the contracting directions.
    """
    x = check_point(system, x)
    value, floored = cocycle_log_norms(system, x[None, :], n, k)
    return LogNorm(float(value[0]), bool(floored[0]))
