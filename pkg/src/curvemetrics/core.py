"""
Discrete closed curves, arc-length calculus and Sobolev norms on the circle.

A curve is stored as ``N`` samples ``c(θ_i)`` of an immersion ``S^1 -> R^d``
on the uniform grid ``θ_i = 2πi/N``. Closure is implicit: the sample after
``N - 1`` is sample ``0``.

Fourier convention (used everywhere in the package): the forward transform
carries the factor ``1/N``, ``û_m = (1/N) Σ_i u_i e^{-imθ_i}``, so that
``‖u‖²_{L²(dθ)} = 2π Σ_m |û_m|²``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import circulant

from .exceptions import ConfigError, CurveError, ImmersionError

__all__ = [
    "Curve",
    "MetricConfig",
    "theta_grid",
    "circle",
    "ellipse",
    "resample",
    "fourier_resample",
    "edge_lengths",
    "polygon_length",
    "arc_element",
    "arclength_derivative",
    "sobolev_norm_circle",
    "sobolev_gram_circle",
    "as_field",
]

MIN_SAMPLES = 8


def theta_grid(n):
    """Uniform parameter grid ``2πi/n``, ``i = 0..n-1``."""
    return 2 * np.pi * np.arange(n) / n


@dataclass(frozen=True, eq=False)
class Curve:
    """Uniformly sampled closed curve in ``R^d``.

    Parameters
    ----------
    points : array_like, shape (N, d)
        Samples in parameter order. ``N >= 8``, all entries finite and no
        two consecutive samples (cyclically) may coincide.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2:
            raise CurveError(f"points must be an (N, d) array, got shape {pts.shape}")
        if pts.shape[0] < MIN_SAMPLES:
            raise CurveError(
                f"sample count N={pts.shape[0]} is below the minimum of {MIN_SAMPLES}")
        if pts.shape[1] < 1:
            raise CurveError("ambient dimension d must be >= 1")
        if not np.all(np.isfinite(pts)):
            raise CurveError("curve points must be finite")
        edges = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        if np.any(edges == 0):
            i = int(np.flatnonzero(edges == 0)[0])
            raise ImmersionError(
                f"zero-length edge between samples {i} and {(i + 1) % len(pts)}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_samples(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.n_samples

    def translated(self, w):
        return Curve(self.points + np.asarray(w, dtype=float))

    def scaled(self, factor):
        return Curve(self.points * float(factor))

    def shifted(self, k):
        """Cyclic shift of the starting sample."""
        return Curve(np.roll(self.points, -k, axis=0))

    # -- JSON ---------------------------------------------------------------
    def to_dict(self):
        return {"d": self.dim, "points": self.points.tolist()}

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise CurveError("curve JSON must be an object with keys 'd' and 'points'")
        unknown = set(data) - {"d", "points"}
        if unknown:
            raise CurveError(f"unknown curve keys: {sorted(unknown)}")
        if "d" not in data or "points" not in data:
            raise CurveError("curve JSON requires 'd' and 'points'")
        pts = np.asarray(data["points"], dtype=float)
        if pts.ndim != 2 or pts.shape[1] != int(data["d"]):
            raise CurveError(
                f"points do not match declared dimension d={data['d']}")
        return cls(pts)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())

    def save(self, path):
        Path(path).write_text(self.to_json())


def as_field(curve, u):
    """Validate a tangent field against ``curve`` and return it as (N, d)."""
    u = np.asarray(u, dtype=float)
    if u.shape == (curve.n_samples * curve.dim,):
        u = u.reshape(curve.n_samples, curve.dim)
    if u.shape != curve.points.shape:
        raise CurveError(
            f"tangent field shape {u.shape} does not match curve {curve.points.shape}")
    if not np.all(np.isfinite(u)):
        raise CurveError("tangent field must be finite")
    return u


def circle(n, radius=1.0, center=None, d=2):
    """Circle of given radius in the (x1, x2)-plane, sampled uniformly."""
    th = theta_grid(n)
    pts = np.zeros((n, d))
    pts[:, 0] = radius * np.cos(th)
    pts[:, 1] = radius * np.sin(th)
    if center is not None:
        pts += np.asarray(center, dtype=float)
    return Curve(pts)


def ellipse(n, a, b):
    """Ellipse ``(a cos θ, b sin θ)`` sampled uniformly in θ."""
    th = theta_grid(n)
    return Curve(np.column_stack([a * np.cos(th), b * np.sin(th)]))


def edge_lengths(curve):
    """Chord lengths ``|c_{i+1} - c_i|``."""
    pts = curve.points
    return np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)


def polygon_length(curve):
    return float(edge_lengths(curve).sum())


def resample(curve, n_new):
    """Resample at uniformly spaced arc-length positions.

    Arc length is measured along the closed polyline; coordinates are
    interpolated with a periodic cubic spline in that arc length, so the
    new samples lie on a smooth closed curve through the old ones. The
    first new sample coincides with ``curve.points[0]``.
    """
    if n_new < MIN_SAMPLES:
        raise CurveError(f"N_new={n_new} is below the minimum of {MIN_SAMPLES}")
    pts = curve.points
    closed = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    total = seg.sum()
    if total <= 0:
        raise ImmersionError("cannot resample a curve of zero length")
    s = np.concatenate([[0.0], np.cumsum(seg)])
    targets = total * np.arange(n_new) / n_new
    spline = CubicSpline(s, closed, bc_type="periodic", axis=0)
    return Curve(spline(targets))


def fourier_resample(curve, n_new):
    """Band-limited (trigonometric) interpolation onto ``n_new`` samples.

    Keeps the parametrization, unlike :func:`resample`. Exact for curves
    whose coordinates are trigonometric polynomials of degree < N/2.
    """
    n = curve.n_samples
    coef = np.fft.fft(curve.points, axis=0) / n
    m = np.fft.fftfreq(n) * n
    keep = np.abs(m) < min(n, n_new) / 2
    new = np.zeros((n_new, curve.dim), dtype=complex)
    new_m = np.rint(np.fft.fftfreq(n_new) * n_new).astype(int)
    index = {int(k): i for i, k in enumerate(new_m)}
    for i in np.flatnonzero(keep):
        new[index[int(m[i])]] = coef[i]
    return Curve(np.real(np.fft.ifft(new * n_new, axis=0)))


def arc_element(curve):
    """Speed ``|c'(θ_i)|`` by second-order central differences.

    Raises
    ------
    ImmersionError
        If ``c_{i+1} = c_{i-1}`` for some ``i``.
    """
    pts = curve.points
    h = 2 * np.pi / curve.n_samples
    ds = np.linalg.norm(np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0), axis=1) / (2 * h)
    if np.any(ds == 0):
        i = int(np.flatnonzero(ds == 0)[0])
        raise ImmersionError(f"vanishing central difference at sample {i}")
    return ds


def arclength_derivative(curve, u):
    """``D_s u = u' / |c'|`` with central differences for both factors."""
    u = as_field(curve, u)
    h = 2 * np.pi / curve.n_samples
    du = (np.roll(u, -1, axis=0) - np.roll(u, 1, axis=0)) / (2 * h)
    return du / arc_element(curve)[:, None]


def _mode_weights(n, order):
    m = np.fft.fftfreq(n) * n
    return (1.0 + m ** 2) ** order


def sobolev_norm_circle(u, order):
    """Flat ``H^order(S^1, dθ)`` norm of a sampled field.

    ``‖u‖² = 2π Σ_m (1 + m²)^order |û_m|²`` over the discrete modes
    ``m = -N/2 .. N/2-1``, summed over coordinates. A single mode
    ``e^{imθ}`` therefore has squared norm ``2π (1 + m²)^order``.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    n = u.shape[0]
    coef = np.fft.fft(u, axis=0) / n
    w = _mode_weights(n, order)
    return float(np.sqrt(2 * np.pi * np.sum(w[:, None] * np.abs(coef) ** 2)))


def sobolev_gram_circle(n, order):
    """Scalar ``n x n`` Gram matrix ``H`` with ``uᵀ H u = sobolev_norm_circle(u, order)²``.

    Acts per coordinate; the vector-valued Gram is ``kron(H, I_d)``.
    """
    col = 2 * np.pi / n * np.real(np.fft.ifft(_mode_weights(n, order)))
    return circulant(col)


@dataclass(frozen=True)
class MetricConfig:
    """Parameters of the inner and outer metrics.

    Parameters
    ----------
    d : int
        Ambient dimension.
    n : int
        Order of the inner (Sobolev, constant-coefficient) metric, ``n >= 2``.
    a : tuple of float
        Coefficients ``a_0..a_n``; ``a_0, a_n > 0``, the rest ``>= 0``.
    s : float
        Order of the ambient operator ``(1 - Δ)^s``; requires ``s > d/2 + 1``.
    kernel_scale : float
        Length scale λ of the reproducing kernel, in curve units.
    """

    d: int = 2
    n: int = 2
    a: tuple = (1.0, 0.0, 1.0)
    s: float = 3.0
    kernel_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        self.validate()

    @property
    def s_prime(self):
        """Order of the induced outer metric on curves, ``s - (d - 1)/2``."""
        return self.s - (self.d - 1) / 2

    def validate(self):
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError(f"ambient dimension d must be a positive integer, got {self.d}")
        if int(self.n) != self.n or self.n < 2:
            raise ConfigError(f"inner metric order n must be an integer >= 2, got {self.n}")
        if len(self.a) != self.n + 1:
            raise ConfigError(
                f"coefficients a must have n+1={self.n + 1} entries, got {len(self.a)}")
        if any(x < 0 for x in self.a) or self.a[0] <= 0 or self.a[-1] <= 0:
            raise ConfigError("coefficients require a_0 > 0, a_n > 0 and a_j >= 0")
        if not self.s > self.d / 2 + 1:
            raise ConfigError(
                f"outer operator order s={self.s} must exceed d/2 + 1 = {self.d / 2 + 1}")
        if not self.kernel_scale > 0:
            raise ConfigError("kernel_scale must be positive")

    def check_comparison(self):
        """Hypothesis of the inner/outer comparison: ``s >= n + (d - 1)/2``."""
        if self.s < self.n + (self.d - 1) / 2:
            raise ConfigError(
                f"comparison requires order s >= n + (d-1)/2 = {self.n + (self.d - 1) / 2}, "
                f"got s={self.s}")

    def to_dict(self):
        return {"d": self.d, "n": self.n, "a": list(self.a), "s": self.s,
                "kernel_scale": self.kernel_scale}

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {"d", "n", "a", "s", "kernel_scale"}
        if unknown:
            raise ConfigError(f"unknown metric keys: {sorted(unknown)}")
        return cls(**data)
