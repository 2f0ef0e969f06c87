"""Euclidean Willmore energy, computed without any quaternionic machinery.

The map is read as a parametrised surface in R^4 (coefficients of 1, i, j,
k).  Fundamental forms come from local finite differences, and the
integrand ``|H|^2 - K + K_perp`` (normal frame oriented positively) is summed with the area element.  Nothing
here is shared with the quaternionic pipeline, which is the point: the two
energies must agree for the trace normalisation to be right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _deriv(f: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2.0 * h)
    return np.gradient(f, h, axis=axis, edge_order=2)


def _weights(n: int, h: float, periodic: bool, margin: int) -> np.ndarray:
    if periodic:
        return np.full(n, h)
    w = np.zeros(n)
    w[margin:n - margin] = h
    w[margin] = w[n - margin - 1] = 0.5 * h
    return w


@dataclass
class EuclideanEnergy:
    """``W`` integrates ``|H|^2 - K + K_perp`` and ``W_reversed`` flips the sign of ``K_perp``.

    ``K_perp`` is taken in a normal frame completing the tangent frame to a
    positive basis of R^4 = span(1, i, j, k).  With that orientation ``W``
    matches ``2 int <A ^ *A>`` and ``W_reversed`` the backward energy.
    """

    W: float
    W_reversed: float
    area: float
    mean_sq: float
    gauss: float
    normal: float


def _oriented_normal_frame(e1, e2):
    """Orthonormal ``n1, n2`` with ``(e1, e2, n1, n2)`` positively oriented."""
    basis = np.eye(4)
    cands = []
    for k in range(4):
        v = np.broadcast_to(basis[k], e1.shape).copy()
        v -= np.sum(v * e1, -1, keepdims=True) * e1
        v -= np.sum(v * e2, -1, keepdims=True) * e2
        cands.append(v)
    # pick the two candidates with the largest residuals and orthonormalise
    mags = np.stack([np.linalg.norm(c, axis=-1) for c in cands], -1)
    order = np.argsort(-mags, axis=-1)
    stack = np.stack(cands, -2)
    a = np.take_along_axis(stack, order[..., 0, None, None], -2)[..., 0, :]
    b = np.take_along_axis(stack, order[..., 1, None, None], -2)[..., 0, :]
    n1 = a / np.linalg.norm(a, axis=-1, keepdims=True)
    b = b - np.sum(b * n1, -1, keepdims=True) * n1
    n2 = b / np.linalg.norm(b, axis=-1, keepdims=True)
    det = np.linalg.det(np.stack([e1, e2, n1, n2], -2))
    n2 = np.where(det[..., None] < 0, -n2, n2)
    return n1, n2


def _geometry(x: np.ndarray, hx: float, hy: float, periodic=(False, False)) -> dict:
    x = np.asarray(x, dtype=float)
    px, py = periodic
    xu = _deriv(x, hx, 0, px)
    xv = _deriv(x, hy, 1, py)
    xuu = _deriv(xu, hx, 0, px)
    xvv = _deriv(xv, hy, 1, py)
    xuv = 0.5 * (_deriv(xu, hy, 1, py) + _deriv(xv, hx, 0, px))

    E = np.sum(xu * xu, -1)
    F = np.sum(xu * xv, -1)
    G = np.sum(xv * xv, -1)
    det = E * G - F * F
    dA = np.sqrt(det)

    e1 = xu / np.sqrt(E)[..., None]
    t = xv - np.sum(xv * e1, -1, keepdims=True) * e1
    e2 = t / np.linalg.norm(t, axis=-1, keepdims=True)

    def normal_part(w):
        return w - np.sum(w * e1, -1, keepdims=True) * e1 - np.sum(w * e2, -1, keepdims=True) * e2

    Luu, Luv, Lvv = normal_part(xuu), normal_part(xuv), normal_part(xvv)
    Hvec = 0.5 * (G[..., None] * Luu - 2 * F[..., None] * Luv + E[..., None] * Lvv) / det[..., None]
    K = (np.sum(Luu * Lvv, -1) - np.sum(Luv * Luv, -1)) / det

    # second fundamental form in the orthonormal tangent frame: x_u = a e1, x_v = b e1 + c e2
    a = np.sqrt(E)
    b = F / a
    c = dA / a
    h11 = Luu / a[..., None] ** 2
    h12 = (Luv - b[..., None] * h11 * a[..., None]) / (a * c)[..., None]
    h22 = (Lvv - 2 * b[..., None] * c[..., None] * h12 - b[..., None] ** 2 * h11) / c[..., None] ** 2

    n1, n2 = _oriented_normal_frame(e1, e2)
    A = [np.sum(h * n1, -1) for h in (h11, h12, h22)]
    B = [np.sum(h * n2, -1) for h in (h11, h12, h22)]
    # K_perp = <[S_n1, S_n2] e1, e2> for symmetric 2x2 shape operators
    Kperp = A[1] * (B[2] - B[0]) - B[1] * (A[2] - A[0])
    return {"H": Hvec, "K": K, "Kperp": Kperp, "dA": dA}


def mean_curvature_vector(x: np.ndarray, hx: float, hy: float, periodic=(False, False)) -> np.ndarray:
    """Mean curvature vector ``(nx, ny, 4)`` of a sampled immersion into R^4."""
    return _geometry(x, hx, hy, periodic)["H"]


def euclidean_energy(x: np.ndarray, hx: float, hy: float, periodic=(False, False), margin: int = 1) -> EuclideanEnergy:
    """Willmore energy of a sampled immersion ``x: grid -> R^4`` (shape ``(nx, ny, 4)``)."""
    x = np.asarray(x, dtype=float)
    geo = _geometry(x, hx, hy, periodic)
    dA = geo["dA"]
    w = np.outer(_weights(x.shape[0], hx, periodic[0], margin), _weights(x.shape[1], hy, periodic[1], margin))
    H2 = np.sum(geo["H"] ** 2, -1)

    def integ(rho):
        return math.fsum((rho * dA * w).ravel().tolist())

    mean_sq, gauss, normal = integ(H2), integ(geo["K"]), integ(geo["Kperp"])
    return EuclideanEnergy(
        W=mean_sq - gauss + normal,
        W_reversed=mean_sq - gauss - normal,
        area=integ(np.ones_like(H2)),
        mean_sq=mean_sq,
        gauss=gauss,
        normal=normal,
    )


def euclidean_energy_oracle(s) -> EuclideanEnergy:
    """Oracle energy of a :class:`~willmore.mcs.SurfaceChart` from its raw samples only."""
    ch = s.chart
    return euclidean_energy(np.asarray(s.g), ch.hx, ch.hy, ch.periodic, ch.margin)


def torus_of_revolution_energy(a: float, b: float) -> float:
    """Closed form ``int |H|^2 dA = pi^2 a^2 / (b sqrt(a^2 - b^2))`` for radii ``a > b``."""
    return math.pi**2 * a * a / (b * math.sqrt(a * a - b * b))
