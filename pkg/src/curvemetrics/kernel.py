"""
Reproducing kernel of ``A = (1 - Δ)^s`` on ``R^d`` and the curve cometric.

With the unitary Fourier transform ``F f(ξ) = (2π)^{-d/2} ∫ e^{-i<x,ξ>} f(x) dx``
and ``‖f‖²_{H^s} = ∫ (1 + |ξ|²)^s |F f|² dξ``, point evaluation is represented by

    k(r) = (2π)^{-d} ∫ e^{i<x,ξ>} (1 + |ξ|²)^{-s} dξ
         = (2π)^{-d/2} 2^{1-s} / Γ(s) · r^ν K_ν(r),        ν = s - d/2,

with ``k(0) = (4π)^{-d/2} Γ(ν) / Γ(s)``. A length scale λ enters through
``r -> r/λ`` (so ``k(0)`` does not depend on λ).

The cometric of the outer metric at a sampled curve ``q`` is the block
Gram matrix ``B_q[iα, jβ] = k(|q_i - q_j|) δ_αβ``; its inverse is the metric
``A_q``. Only the scalar ``N x N`` block is stored and factorized.
"""
from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np
import scipy.special as sc
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist, pdist, squareform

from .core import Curve
from .exceptions import ConditioningWarning, ConfigError, GramError

__all__ = [
    "SobolevKernel",
    "CometricGram",
    "bessel_k",
    "kernel_eval",
    "gram",
    "cometric_apply",
    "metric_solve",
    "as_points",
]

JITTER = 1e-12
RESIDUAL_WARN = 1e-10
RESIDUAL_FAIL = 1e-6


def _is_integer(x):
    return abs(x - round(x)) < 1e-14


def _bessel_k_ladder(nu, x):
    """Return ``(K_{|nu-1|}(x), K_nu(x))`` using the cheapest stable route."""
    nu = abs(float(nu))
    if _is_integer(nu) or _is_integer(nu - 0.5):
        if _is_integer(nu):
            lo, hi = sc.k0(x), sc.k1(x)
            order = 0.0
        else:
            lo = np.sqrt(pi / (2 * x)) * np.exp(-x)
            hi = lo * (1 + 1 / x)
            order = 0.5
        if nu == 0.0:
            return hi, lo
        if nu == 0.5:
            # |nu - 1| = 1/2
            return lo, lo
        # upward recurrence K_{μ+1} = K_{μ-1} + (2μ/x) K_μ is stable for K
        mu = order + 1
        while mu < nu - 1e-12:
            lo, hi = hi, lo + (2 * mu / x) * hi
            mu += 1
        return lo, hi
    return sc.kv(abs(nu - 1), x), sc.kv(nu, x)


def bessel_k(nu, x):
    """Modified Bessel function of the second kind ``K_nu(x)``.

    Integer and half-integer orders use ``k0``/``k1`` or the closed form
    and upward recurrence; other orders fall back on ``scipy.special.kv``.

    Parameters
    ----------
    nu : float
        Order, ``nu >= 0`` (negative orders are reflected).
    x : float or ndarray
        Argument, strictly positive.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise ValueError("bessel_k requires x > 0")
    out = _bessel_k_ladder(nu, xa)[1]
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class SobolevKernel:
    """Radial reproducing kernel of ``(1 - Δ)^s`` (Matérn profile).

    Parameters
    ----------
    s : float
        Sobolev order; requires ``s > d/2``.
    d : int
        Ambient dimension.
    scale : float
        Length scale λ; the kernel argument is ``|x|/λ``.
    """

    s: float = 3.0
    d: int = 2
    scale: float = 1.0

    def __post_init__(self):
        if not self.s > self.d / 2:
            raise ConfigError(f"kernel order s={self.s} must exceed d/2={self.d / 2}")
        if not self.scale > 0:
            raise ConfigError("kernel scale must be positive")

    @classmethod
    def from_config(cls, cfg):
        return cls(s=cfg.s, d=cfg.d, scale=cfg.kernel_scale)

    @property
    def nu(self):
        return self.s - self.d / 2

    @property
    def k0(self):
        """Closed-form limit ``k(0) = (4π)^{-d/2} Γ(ν)/Γ(s)``."""
        return (4 * pi) ** (-self.d / 2) * gamma(self.nu) / gamma(self.s)

    @property
    def _c(self):
        return (2 * pi) ** (-self.d / 2) * 2 ** (1 - self.s) / gamma(self.s)

    def profile(self, r, with_derivative=False):
        """Kernel values ``k(r)`` and optionally ``k'(r)/r`` for an array of radii.

        ``k'(r)/r = -c λ^{-2} ρ^{ν-1} K_{ν-1}(ρ)`` with ``ρ = r/λ``; its value at
        0 is ``-k(0) / (2 λ² (ν - 1))`` and exists only for ``ν > 1``.
        """
        r = np.asarray(r, dtype=float)
        rho = r / self.scale
        small = rho < 1e-12
        k = np.full(rho.shape, self.k0)
        g = np.empty(rho.shape) if with_derivative else None
        if with_derivative:
            if not self.nu > 1:
                raise ConfigError("kernel derivative needs s > d/2 + 1")
            g[small] = -self.k0 / (2 * self.scale ** 2 * (self.nu - 1))
        big = ~small
        if np.any(big):
            x = rho[big]
            k_lo, k_hi = _bessel_k_ladder(self.nu, x)
            xn1 = x ** (self.nu - 1)
            k[big] = self._c * xn1 * x * k_hi
            if with_derivative:
                g[big] = -self._c / self.scale ** 2 * xn1 * k_lo
        if with_derivative:
            return k, g
        return k

    def __call__(self, r):
        return self.profile(r)

    def matrix(self, x, y=None):
        """Pairwise kernel values between point sets ``x`` (P, d) and ``y`` (Q, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if y is None:
            if len(x) == 1:
                return np.array([[self.k0]])
            return squareform(self.profile(pdist(x)), checks=False) + self.k0 * np.eye(len(x))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return self.profile(cdist(x, y))

    def matrix_and_derivative(self, x):
        """Symmetric kernel matrix of ``x`` and the matrix of ``k'(r)/r``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if len(x) == 1:
            k, g = self.profile(np.zeros(1), with_derivative=True)
            return k.reshape(1, 1), g.reshape(1, 1)
        k, g = self.profile(pdist(x), with_derivative=True)
        kk, gg = self.profile(np.zeros(1), with_derivative=True)
        n = len(x)
        return (squareform(k, checks=False) + kk[0] * np.eye(n),
                squareform(g, checks=False) + gg[0] * np.eye(n))


def kernel_eval(k, r):
    """Radial kernel profile ``k(r)``; scalar in, scalar out."""
    if np.any(np.asarray(r) < 0):
        raise ValueError("kernel radius must be nonnegative")
    out = k.profile(r)
    return float(out) if np.ndim(r) == 0 else out


def as_points(q):
    """Point array (P, d) from a :class:`Curve` or array-like."""
    if isinstance(q, Curve):
        return q.points
    pts = np.atleast_2d(np.asarray(q, dtype=float))
    if pts.ndim != 2:
        raise ValueError(f"expected a (P, d) point array, got shape {pts.shape}")
    return pts


def _closest_pair(pts):
    if len(pts) < 2:
        return None, np.inf
    dist = squareform(pdist(pts))
    np.fill_diagonal(dist, np.inf)
    i, j = np.unravel_index(np.argmin(dist), dist.shape)
    return (int(min(i, j)), int(max(i, j))), float(dist[i, j])


@dataclass(frozen=True, eq=False)
class CometricGram:
    """Factorized cometric ``B_q`` of a point set.

    ``kernel_matrix`` is the scalar block; the full ``N·d x N·d`` matrix is
    ``kron(kernel_matrix, I_d)`` (see :attr:`matrix`), with vector index
    ``i·d + α``.
    """

    kernel: SobolevKernel
    points: np.ndarray
    kernel_matrix: np.ndarray
    factor: tuple = field(repr=False)
    jitter: float = 0.0
    curve_hash: str = ""

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def matrix(self):
        return np.kron(self.kernel_matrix, np.eye(self.dim))

    def apply(self, p):
        return cometric_apply(self, p)

    def solve(self, u):
        return metric_solve(self, u)

    def inner(self, u, v):
        """Metric pairing ``<A_q u, v>`` for fields of shape (N, d) or (N·d,)."""
        return float(np.sum(self._shaped(v) * metric_solve(self, self._shaped(u))))

    def _shaped(self, x):
        x = np.asarray(x, dtype=float)
        if x.size != self.n_points * self.dim:
            raise ValueError(
                f"vector of size {x.size} does not match {self.n_points} points in R^{self.dim}")
        return x.reshape(self.n_points, self.dim)


def gram(k, q):
    """Assemble and factorize the cometric Gram matrix of ``q``.

    Raises
    ------
    GramError
        If two points coincide or the factorization fails even after one
        retry with ``1e-12·k(0)`` added to the diagonal.
    """
    pts = np.array(as_points(q), dtype=float)
    if pts.shape[1] != k.d:
        raise ValueError(f"points live in R^{pts.shape[1]}, kernel in R^{k.d}")
    pair, dmin = _closest_pair(pts)
    if pair is not None and dmin == 0:
        raise GramError(f"coincident points {pair}: Gram matrix is singular", pair=pair)
    K = k.matrix(pts)
    jitter = 0.0
    try:
        factor = cho_factor(K, lower=True)
    except np.linalg.LinAlgError:
        jitter = JITTER * k.k0
        try:
            factor = cho_factor(K + jitter * np.eye(len(K)), lower=True)
        except np.linalg.LinAlgError:
            raise GramError(
                f"Gram matrix not positive definite; closest points {pair} at distance {dmin:.3e}",
                pair=pair) from None
    pts.setflags(write=False)
    digest = hashlib.sha1(pts.tobytes()).hexdigest()[:16]
    return CometricGram(k, pts, K, factor, jitter, digest)


def cometric_apply(B, p):
    """Velocity ``B_q p`` for a momentum of shape (N·d,) or (N, d)."""
    p = np.asarray(p, dtype=float)
    out = B.kernel_matrix @ B._shaped(p)
    return out.reshape(p.shape)


def metric_solve(B, u):
    """Momentum ``A_q u = B_q^{-1} u`` with one step of iterative refinement.

    Warns with :class:`ConditioningWarning` if the relative residual exceeds
    1e-10 and raises :class:`GramError` above 1e-6.
    """
    u = np.asarray(u, dtype=float)
    U = B._shaped(u)
    P = cho_solve(B.factor, U)
    R = U - B.kernel_matrix @ P
    P = P + cho_solve(B.factor, R)
    norm_u = np.linalg.norm(U)
    if norm_u > 0:
        res = np.linalg.norm(U - B.kernel_matrix @ P) / norm_u
        if res > RESIDUAL_FAIL:
            raise GramError(f"metric solve residual {res:.2e} exceeds {RESIDUAL_FAIL}")
        if res > RESIDUAL_WARN:
            warnings.warn(f"metric solve residual {res:.2e}", ConditioningWarning, stacklevel=2)
    return P.reshape(u.shape)
