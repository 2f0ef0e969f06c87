"""Quaternionic arithmetic and 2x2 quaternionic linear algebra.

Quaternions are numpy arrays whose last axis holds ``(w, x, y, z)`` for
``q = w + x i + y j + z k``.  Vectors of H^2 carry a trailing ``(2, 4)``
block and endomorphisms of H^2 a trailing ``(2, 2, 4)`` block, so every
routine here broadcasts over arbitrary leading (grid) axes.

H^2 is a *right* H-module: lines are ``v H`` and matrices act from the left,
which keeps ``B (v l) = (B v) l`` for every quaternion ``l``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_ZERO_EPS = 1e-300
DEFAULT_RANK_EPS = 1e-9


class ZeroDivisorError(ZeroDivisionError):
    """Raised when inverting a quaternion of (numerically) zero magnitude."""


def quat(w=0.0, x=0.0, y=0.0, z=0.0) -> np.ndarray:
    return np.array([w, x, y, z], dtype=float)


ONE = quat(1.0)
I = quat(0.0, 1.0)
J = quat(0.0, 0.0, 1.0)
K = quat(0.0, 0.0, 0.0, 1.0)
ZERO = quat()


def as_quat(a) -> np.ndarray:
    """Promote reals (or arrays of reals) to quaternions; pass quaternions through."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 0 or a.shape[-1] != 4:
        out = np.zeros(a.shape + (4,))
        out[..., 0] = a
        return out
    return a


def from_complex(z) -> np.ndarray:
    """Embed complex numbers in the span of {1, i}."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.shape + (4,))
    out[..., 0] = z.real
    out[..., 1] = z.imag
    return out


def qmul(p, q) -> np.ndarray:
    """Hamilton product, ``ij = k``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pw, px, py, pz = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    qw, qx, qy, qz = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ],
        axis=-1,
    )


def qconj(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def qnorm2(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.sum(q * q, axis=-1)


def qabs(q) -> np.ndarray:
    return np.sqrt(qnorm2(q))


def qinv(q, eps: float = DEFAULT_ZERO_EPS) -> np.ndarray:
    """Two-sided inverse ``conj(q) / |q|^2``.

    Raises :class:`ZeroDivisorError` if any entry has ``|q| <= eps``.
    """
    n2 = qnorm2(q)
    if np.any(n2 <= eps * eps):
        raise ZeroDivisorError(f"quaternion magnitude below {eps:g}")
    return qconj(q) / n2[..., None]


def qinv_unchecked(q) -> np.ndarray:
    # caller guarantees nonzero entries (masked grids, pivots)
    n2 = qnorm2(q)
    return qconj(q) / n2[..., None]


def qexp_i(theta) -> np.ndarray:
    """``cos(theta) + i sin(theta)``."""
    theta = np.asarray(theta, dtype=float)
    return from_complex(np.exp(1j * theta))


# --------------------------------------------------------------------------
# H^2 vectors and endomorphisms


def hvec(a, b) -> np.ndarray:
    return np.stack([as_quat(a), as_quat(b)], axis=-2)


def hmat(m11, m12, m21, m22) -> np.ndarray:
    row1 = np.stack(np.broadcast_arrays(as_quat(m11), as_quat(m12)), axis=-2)
    row2 = np.stack(np.broadcast_arrays(as_quat(m21), as_quat(m22)), axis=-2)
    return np.stack(np.broadcast_arrays(row1, row2), axis=-3)


def identity(shape=()) -> np.ndarray:
    out = np.zeros(tuple(shape) + (2, 2, 4))
    out[..., 0, 0, 0] = 1.0
    out[..., 1, 1, 0] = 1.0
    return out


def mat_mul(a, b) -> np.ndarray:
    """``(AB)_ik = sum_j A_ij B_jk`` with quaternion entries."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    rows = []
    for i in range(2):
        cols = []
        for k in range(2):
            cols.append(qmul(a[..., i, 0, :], b[..., 0, k, :]) + qmul(a[..., i, 1, :], b[..., 1, k, :]))
        rows.append(np.stack(cols, axis=-2))
    return np.stack(rows, axis=-3)


def mat_vec(a, v) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.stack(
        [qmul(a[..., i, 0, :], v[..., 0, :]) + qmul(a[..., i, 1, :], v[..., 1, :]) for i in range(2)],
        axis=-2,
    )


def vec_scale(v, lam) -> np.ndarray:
    """Right scalar action ``v . lam``."""
    v = np.asarray(v, dtype=float)
    lam = np.asarray(lam, dtype=float)
    return qmul(v, lam[..., None, :])


def left_scale(lam, a) -> np.ndarray:
    """Entrywise left multiplication ``lam * A`` (vector or matrix)."""
    lam = np.asarray(lam, dtype=float)
    a = np.asarray(a, dtype=float)
    extra = a.ndim - lam.ndim
    return qmul(lam.reshape(lam.shape[:-1] + (1,) * extra + (4,)), a)


def mat_scale_right(a, lam) -> np.ndarray:
    """Entrywise right multiplication ``A * lam``."""
    a = np.asarray(a, dtype=float)
    lam = np.asarray(lam, dtype=float)
    return qmul(a, lam[..., None, None, :])


def adjoint(b) -> np.ndarray:
    """Quaternionic conjugate transpose; ``(BC)* = C* B*``."""
    b = np.asarray(b, dtype=float)
    return qconj(np.swapaxes(b, -3, -2))


def mat_norm(b) -> np.ndarray:
    """Frobenius-type magnitude: root of the sum of all squared coefficients."""
    b = np.asarray(b, dtype=float)
    return np.sqrt(np.sum(b * b, axis=(-3, -2, -1)))


def vec_norm(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.sqrt(np.sum(v * v, axis=(-2, -1)))


def hermitian(v, w) -> np.ndarray:
    """Standard form ``<v, w> = conj(v1) w1 + conj(v2) w2``; right-linear in ``w``."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return qmul(qconj(v[..., 0, :]), w[..., 0, :]) + qmul(qconj(v[..., 1, :]), w[..., 1, :])


def mat_inv(b) -> np.ndarray:
    """Inverse of an invertible 2x2 quaternionic matrix by block elimination."""
    b = np.asarray(b, dtype=float)
    a11, a12, a21, a22 = b[..., 0, 0, :], b[..., 0, 1, :], b[..., 1, 0, :], b[..., 1, 1, :]
    swap = qabs(a11) < qabs(a21)
    if np.any(swap):
        # pivot on the larger first-column entry: inv(P B) P = inv(B)
        p = np.zeros(b.shape)
        p[..., 0, 0, 0] = np.where(swap, 0.0, 1.0)
        p[..., 1, 1, 0] = np.where(swap, 0.0, 1.0)
        p[..., 0, 1, 0] = np.where(swap, 1.0, 0.0)
        p[..., 1, 0, 0] = np.where(swap, 1.0, 0.0)
        return mat_mul(_mat_inv_pivoted(mat_mul(p, b)), p)
    return _mat_inv_pivoted(b)


def _mat_inv_pivoted(b):
    a11, a12, a21, a22 = b[..., 0, 0, :], b[..., 0, 1, :], b[..., 1, 0, :], b[..., 1, 1, :]
    a11i = qinv(a11)
    schur = a22 - qmul(qmul(a21, a11i), a12)
    si = qinv(schur)
    x12 = -qmul(qmul(a11i, a12), si)
    x22 = si
    x21 = -qmul(qmul(si, a21), a11i)
    x11 = a11i + qmul(qmul(qmul(qmul(a11i, a12), si), a21), a11i)
    return hmat(x11, x12, x21, x22)


# --------------------------------------------------------------------------
# rank-one structure


def _pivot(b):
    """Largest-magnitude entry of each 2x2 block: (row, col, |pivot|)."""
    mags = qabs(b)  # (..., 2, 2)
    flat = mags.reshape(mags.shape[:-2] + (4,))
    idx = np.argmax(flat, axis=-1)
    return idx // 2, idx % 2, np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]


def _take(b, r, c):
    r = np.asarray(r)[..., None, None, None]
    c = np.asarray(c)[..., None, None]
    rows = np.take_along_axis(b, np.broadcast_to(r, b.shape[:-3] + (1, 2, 4)), axis=-3)[..., 0, :, :]
    return np.take_along_axis(rows, np.broadcast_to(c, rows.shape[:-2] + (1, 4)), axis=-2)[..., 0, :]


def rank_structure(b, eps: float = DEFAULT_RANK_EPS):
    """Gaussian elimination over H with full pivoting on each 2x2 block.

    Returns ``(rank, row, col, pivot_ratio)`` where ``(row, col)`` locates the
    first pivot and ``pivot_ratio`` is ``|second pivot| / |first pivot|``.
    """
    b = np.asarray(b, dtype=float)
    r, c, p = _pivot(b)
    rr, oc = 1 - r, 1 - c
    piv = _take(b, r, c)
    safe = np.where(p[..., None] > 0, piv, ONE)
    factor = qmul(_take(b, rr, c), qinv_unchecked(safe))
    second = _take(b, rr, oc) - qmul(factor, _take(b, r, oc))
    ratio = np.where(p > 0, qabs(second) / np.where(p > 0, p, 1.0), 0.0)
    rank = np.where(p <= DEFAULT_ZERO_EPS, 0, np.where(ratio < eps, 1, 2))
    return rank, r, c, ratio


def kernel_vectors(b, eps: float = DEFAULT_RANK_EPS):
    """Vectorised kernel extraction; returns ``(rank, vectors, ratio)``.

    ``vectors`` spans the kernel wherever ``rank == 1`` and is zero elsewhere.
    """
    b = np.asarray(b, dtype=float)
    rank, r, c, ratio = rank_structure(b, eps)
    oc = 1 - c
    piv = _take(b, r, c)
    safe = np.where((rank > 0)[..., None], piv, ONE)
    v_c = -qmul(qinv_unchecked(safe), _take(b, r, oc))
    v = np.zeros(b.shape[:-3] + (2, 4))
    ones = np.broadcast_to(ONE, v_c.shape)
    v[..., 0, :] = np.where((c == 0)[..., None], v_c, ones)
    v[..., 1, :] = np.where((c == 0)[..., None], ones, v_c)
    v = np.where((rank == 1)[..., None, None], v, 0.0)
    return rank, v, ratio


def image_vectors(b, eps: float = DEFAULT_RANK_EPS):
    """Vectorised image extraction; the pivot column spans the image of a rank-one block."""
    b = np.asarray(b, dtype=float)
    rank, r, c, ratio = rank_structure(b, eps)
    cidx = np.asarray(c)[..., None, None, None]
    col = np.take_along_axis(b, np.broadcast_to(cidx, b.shape[:-3] + (2, 1, 4)), axis=-2)[..., :, 0, :]
    col = np.where((rank == 1)[..., None, None], col, 0.0)
    return rank, col, ratio


def kernel_line(b, eps: float = DEFAULT_RANK_EPS):
    """``(rank, ProjPoint | None)`` for a single 2x2 block."""
    rank, v, _ = kernel_vectors(b, eps)
    rank = int(rank)
    return rank, (ProjPoint(v) if rank == 1 else None)


def image_line(b, eps: float = DEFAULT_RANK_EPS):
    rank, v, _ = image_vectors(b, eps)
    rank = int(rank)
    return rank, (ProjPoint(v) if rank == 1 else None)


# --------------------------------------------------------------------------
# points of HP^1


def normalize_lines(v) -> np.ndarray:
    """Unit-norm representatives of the lines ``v H``."""
    v = np.asarray(v, dtype=float)
    n = vec_norm(v)
    return v / np.where(n > 0, n, 1.0)[..., None, None]


def chordal_distance(v, w) -> np.ndarray:
    """Chordal distance between the lines ``v H`` and ``w H``.

    ``sqrt(1 - |<v, w>|^2)`` on unit representatives; 0 for equal lines and 1
    for orthogonal ones.
    """
    v = normalize_lines(v)
    w = normalize_lines(w)
    # |w - v <v, w>| is the same number but keeps full precision near 0
    v, w = np.broadcast_arrays(v, w)
    return vec_norm(w - vec_scale(v, hermitian(v, w)))


def annihilator(v) -> np.ndarray:
    """Unit representative of the orthogonal line ``(v H)^perp`` under the standard form."""
    v = np.asarray(v, dtype=float)
    ca, cb = qconj(v[..., 0, :]), qconj(v[..., 1, :])
    use_b = qnorm2(cb) >= qnorm2(ca)
    # solve conj(a) w1 + conj(b) w2 = 0 with the better-conditioned component set to 1
    ones = np.broadcast_to(ONE, ca.shape)
    w2 = -qmul(qinv_unchecked(np.where(use_b[..., None], cb, ones)), ca)
    w1 = -qmul(qinv_unchecked(np.where(use_b[..., None], ones, ca)), cb)
    out = np.where(use_b[..., None, None], hvec(ones, w2), hvec(w1, ones))
    return normalize_lines(out)


def hermitian_eigenlines(m):
    """Eigenvalues and eigenlines of a Hermitian 2x2 quaternionic matrix.

    Returns ``(lam_small, v_small, lam_large, v_large)``.  The lines depend
    smoothly on ``m`` away from a double eigenvalue, unlike pivoted
    elimination.
    """
    m = np.asarray(m, dtype=float)
    a = m[..., 0, 0, 0]
    b = m[..., 1, 1, 0]
    q = m[..., 0, 1, :]
    mid = 0.5 * (a + b)
    rad = np.sqrt(0.25 * (a - b) ** 2 + qnorm2(q))
    out = []
    for lam in (mid - rad, mid + rad):
        la = (lam - a)[..., None] * ONE
        lb = (lam - b)[..., None] * ONE
        v1 = hvec(q, la)
        v2 = hvec(lb, qconj(q))
        use1 = np.abs(lam - a) >= np.abs(lam - b)
        v = np.where(use1[..., None, None], v1, v2)
        # a scalar matrix: every line is an eigenline, take (1, 0)
        flat = (rad <= 1e-300)[..., None, None]
        v = np.where(flat, hvec(np.broadcast_to(ONE, q.shape), np.zeros_like(q)), v)
        out += [lam, normalize_lines(v)]
    return tuple(out)


@dataclass(frozen=True, eq=False)
class ProjPoint:
    """A point ``rep H`` of HP^1.

    The stored representative is divided by its larger-magnitude component,
    except when the two magnitudes are within a factor 2 of each other, where
    the unit-norm representative is kept instead.
    """

    rep: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.rep, dtype=float).reshape(2, 4)
        mags = qabs(v)
        if not np.any(mags > 0):
            raise ValueError("ProjPoint representative must be nonzero")
        big, small = max(mags), min(mags)
        if small * 2.0 >= big:
            v = v / np.sqrt(np.sum(v * v))
        else:
            idx = int(np.argmax(mags))
            v = qmul(v, qinv(v[idx]))
        object.__setattr__(self, "rep", v)

    def distance(self, other: "ProjPoint") -> float:
        return float(chordal_distance(self.rep, other.rep))

    def __eq__(self, other):
        if not isinstance(other, ProjPoint):
            return NotImplemented
        return self.distance(other) < 1e-9

    __hash__ = None

    def affine(self) -> np.ndarray:
        """Affine coordinate ``a b^{-1}`` in the chart with infinity at ``(1, 0) H``."""
        return qmul(self.rep[0], qinv(self.rep[1]))
