"""Dense numerical kernels parameterized over floating-point precision.

Givens and Householder QR, Cholesky factorization, triangular solves and
spectral condition numbers, all preserving the dtype of their inputs
(float32 or float64) and optionally instrumented with a FLOP counter.
Condition numbers are always evaluated in float64 so the diagnostics do
not inherit the instability they are measuring.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


class NotPositiveDefinite(Exception):
    """Cholesky pivot <= 0; carries the offending pivot index."""

    def __init__(self, pivot: int, value: float = float("nan")):
        super().__init__(f"non-positive pivot {value} at index {pivot}")
        self.pivot = pivot
        self.value = value


class SingularTriangular(Exception):
    """Zero diagonal entry in a triangular solve."""

    def __init__(self, index: int):
        super().__init__(f"zero diagonal at index {index}")
        self.index = index


@dataclass
class FlopCounter:
    """Accumulates floating-point operation counts by kind.

    Counts are model-level: each kernel reports the arithmetic its
    algorithm performs, so counts are identical across precisions and
    platforms.
    """

    adds: int = 0
    muls: int = 0
    divs: int = 0
    sqrts: int = 0

    def add(self, adds=0, muls=0, divs=0, sqrts=0):
        self.adds += int(adds)
        self.muls += int(muls)
        self.divs += int(divs)
        self.sqrts += int(sqrts)

    def total(self) -> int:
        return self.adds + self.muls + self.divs + self.sqrts

    def reset(self):
        self.adds = self.muls = self.divs = self.sqrts = 0

    def snapshot(self) -> "FlopCounter":
        return FlopCounter(self.adds, self.muls, self.divs, self.sqrts)

    def __sub__(self, other: "FlopCounter") -> "FlopCounter":
        return FlopCounter(
            self.adds - other.adds,
            self.muls - other.muls,
            self.divs - other.divs,
            self.sqrts - other.sqrts,
        )


@dataclass
class GivensRotation:
    """Plane rotation with c**2 + s**2 = 1 acting on rows i and j."""

    c: float
    s: float
    i: int = 0
    j: int = 1


def eps_of(dtype) -> float:
    return float(np.finfo(np.dtype(dtype)).eps)


def givens_from_pair(a, b, i=0, j=1, flops: FlopCounter | None = None) -> GivensRotation:
    """Rotation G such that G.T @ [a, b] = [r, 0] with r >= 0.

    The a = b = 0 case returns the identity rotation (r = 0).
    """
    dt = np.result_type(a, b)
    a = np.asarray(a, dtype=dt)[()]
    b = np.asarray(b, dtype=dt)[()]
    if flops is not None:
        flops.add(adds=1, muls=2, divs=2, sqrts=1)
    if b == 0 and a == 0:
        return GivensRotation(dt.type(1.0), dt.type(0.0), i, j)
    r = np.hypot(a, b)
    return GivensRotation(a / r, b / r, i, j)


def apply_givens_rows(M, G: GivensRotation, cols=slice(None), flops: FlopCounter | None = None):
    """Apply G.T to rows G.i and G.j of M over the given columns, in place.

    Returns M. Frobenius norm of the two affected rows (restricted to the
    column range) is preserved up to roundoff.
    """
    i, j = G.i, G.j
    ri = np.array(M[i, cols], copy=True)
    rj = np.array(M[j, cols], copy=True)
    M[i, cols] = G.c * ri + G.s * rj
    M[j, cols] = -G.s * ri + G.c * rj
    if flops is not None:
        ncol = ri.shape[0] if ri.ndim else 1
        flops.add(adds=2 * ncol, muls=4 * ncol)
    return M


def sign_normalize_rows(R, rhs=None):
    """Flip rows of an upper-triangular factor so its diagonal is >= 0.

    Triangular factors are unique only up to row signs; normalizing makes
    factors from different QR/Cholesky paths directly comparable. If rhs
    is given its rows are flipped consistently.
    """
    n = min(R.shape)
    d = np.sign(np.diag(R)[:n])
    d[d == 0] = 1.0
    R[:n, :] *= d[:, None].astype(R.dtype)
    if rhs is not None:
        rhs[:n] *= d.reshape((n,) + (1,) * (rhs.ndim - 1)).astype(rhs.dtype)
    return R


def householder_qr(A, rhs=None, flops: FlopCounter | None = None, overwrite=False):
    """Householder QR of A, never forming Q explicitly.

    Returns (R, transformed_rhs). For m >= n, R is the n x n
    upper-triangular factor with A.T @ A = R.T @ R; for wide inputs the
    full m x n upper-trapezoidal factor is returned. transformed_rhs is
    Q.T @ rhs (all m rows; the caller splits off the top n). Rank
    deficiency is permitted and shows up as (near-)zero diagonal entries.
    """
    W = A if overwrite else np.array(A, copy=True)
    m, n = W.shape
    b = None
    if rhs is not None:
        b = rhs if overwrite else np.array(rhs, copy=True)
        if b.ndim == 1:
            b = b[:, None]
            squeeze = True
        else:
            squeeze = False
    for k in range(min(n, m - 1)):
        x = W[k:, k]
        normx = np.linalg.norm(x)
        if flops is not None:
            flops.add(adds=m - k - 1, muls=m - k, sqrts=1)
        if normx == 0.0:
            continue
        alpha = -np.copysign(normx, x[0])
        v = x.copy()
        v[0] -= alpha
        vtv = v @ v
        if flops is not None:
            flops.add(adds=m - k, muls=m - k)
        if vtv == 0.0:
            continue
        beta = W.dtype.type(2.0) / vtv
        # reflect trailing columns of W
        if k + 1 < n:
            C = W[k:, k + 1:]
            w = beta * (v @ C)
            C -= np.outer(v, w)
            if flops is not None:
                nc = n - k - 1
                flops.add(adds=2 * (m - k) * nc, muls=2 * (m - k) * nc + nc, divs=0)
        W[k, k] = alpha
        W[k + 1:, k] = 0.0
        if b is not None:
            w = beta * (v @ b[k:])
            b[k:] -= np.outer(v, w)
            if flops is not None:
                nc = b.shape[1]
                flops.add(adds=2 * (m - k) * nc, muls=2 * (m - k) * nc + nc)
    R = np.triu(W[:n, :n]) if m >= n else np.triu(W)
    if b is not None and squeeze:
        b = b[:, 0]
    return R, b


def givens_triangularize(A, flops: FlopCounter | None = None):
    """Zero all below-diagonal entries of A in place with Givens rotations.

    Sweeps column by column and skips entries that are already zero, so
    nearly-triangular inputs cost far less than a dense QR. Returns A.
    """
    m, n = A.shape
    for j in range(min(n, m - 1)):
        col = A[j + 1:, j]
        nz = np.nonzero(col)[0]
        for off in nz:
            r = j + 1 + off
            G = givens_from_pair(A[j, j], A[r, j], i=j, j=r, flops=flops)
            apply_givens_rows(A, G, cols=slice(j, n), flops=flops)
            A[r, j] = 0.0
    return A


def cholesky_upper(S, flops: FlopCounter | None = None, check_symmetry=True):
    """Upper-triangular U with U.T @ U = S and positive diagonal.

    Raises NotPositiveDefinite (with the pivot index) when a pivot is
    <= 0 -- the signature of a conditioning failure at the active
    precision.
    """
    S = np.asarray(S)
    n = S.shape[0]
    if S.shape != (n, n):
        raise ValueError("cholesky_upper needs a square matrix")
    if check_symmetry:
        scale = np.abs(S) + np.abs(S.T) + eps_of(S.dtype)
        if not np.all(np.abs(S - S.T) <= 4.0 * eps_of(S.dtype) * scale):
            raise ValueError("matrix is not symmetric to 4 eps")
    U = np.zeros_like(S)
    for k in range(n):
        uk = U[:k, k]
        d = S[k, k] - uk @ uk
        if flops is not None:
            flops.add(adds=k, muls=k, sqrts=1)
        if d <= 0.0 or not np.isfinite(d):
            raise NotPositiveDefinite(k, float(d))
        U[k, k] = np.sqrt(d)
        if k + 1 < n:
            U[k, k + 1:] = (S[k, k + 1:] - uk @ U[:k, k + 1:]) / U[k, k]
            if flops is not None:
                nc = n - k - 1
                flops.add(adds=2 * k * nc + nc, muls=2 * k * nc, divs=nc)
    return U


def _check_diag(U):
    d = np.diag(U)
    bad = np.nonzero(d == 0)[0]
    if bad.size:
        raise SingularTriangular(int(bad[0]))


def solve_upper(U, b, flops: FlopCounter | None = None):
    """Solve U x = b by back substitution (U upper triangular)."""
    _check_diag(U)
    n = U.shape[0]
    if flops is not None:
        ncol = 1 if np.ndim(b) == 1 else np.shape(b)[1]
        flops.add(adds=n * (n - 1) * ncol, muls=n * (n - 1) * ncol, divs=n * ncol)
    return scipy.linalg.solve_triangular(U, b, lower=False)


def solve_upper_transposed(U, b, flops: FlopCounter | None = None):
    """Solve U.T x = b by forward substitution (U upper triangular)."""
    _check_diag(U)
    n = U.shape[0]
    if flops is not None:
        ncol = 1 if np.ndim(b) == 1 else np.shape(b)[1]
        flops.add(adds=n * (n - 1) * ncol, muls=n * (n - 1) * ncol, divs=n * ncol)
    return scipy.linalg.solve_triangular(U, b, lower=False, trans="T")


def form_normal_half(A, flops: FlopCounter | None = None):
    """A.T @ A computed column-by-column on the upper triangle, mirrored.

    Only the upper half is computed (roughly m*n**2 FLOPs instead of
    2*m*n**2) and the result is exactly symmetric by construction.
    """
    m, n = A.shape
    S = np.empty((n, n), dtype=A.dtype)
    for j in range(n):
        S[: j + 1, j] = A[:, : j + 1].T @ A[:, j]
    lo = np.tril_indices(n, -1)
    S[lo] = S.T[lo]
    if flops is not None:
        nup = n * (n + 1) // 2
        flops.add(adds=(m - 1) * nup, muls=m * nup)
    return S


def cond_spectral(A):
    """(kappa, sigma_max, sigma_min) via full SVD at float64.

    Diagnostic-grade: always evaluated in double precision regardless of
    the input dtype. sigma_min = 0 reports kappa = +inf.
    """
    A64 = np.asarray(A, dtype=np.float64)
    if A64.size == 0 or not np.any(A64):
        raise ValueError("cond_spectral needs a nonzero matrix")
    s = np.linalg.svd(A64, compute_uv=False)
    smax = float(s[0])
    smin = float(s[-1])
    kappa = float("inf") if smin == 0.0 else smax / smin
    return kappa, smax, smin
