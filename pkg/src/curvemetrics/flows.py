"""
Flows of time-dependent vector fields and smoothing operators on a periodic grid.

Fields are any callables ``x (P, d) -> (P, d)``, typically :class:`AmbientField`
kernel fields. A time sequence ``X_0..X_{F-1}`` is placed on the knots
``linspace(0, 1, F)`` (or explicit ``times``) and interpolated linearly in
time; a single field is constant in time. Trajectories are integrated with
classical RK4 on ``t ∈ [0, 1]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import Curve
from .exceptions import CurveError, TrajectoryError

__all__ = [
    "ConstantField",
    "FieldSequence",
    "FlowResult",
    "PeriodicGridField",
    "integrate_flow",
    "inverse_flow_check",
    "act_on_curve",
    "smooth_Sk",
    "bump",
    "grid_sobolev_norm",
]

MIN_STEPS = 8
MAX_FRAMES = 64


@dataclass(frozen=True)
class ConstantField:
    """Spatially constant field ``X ≡ w``."""

    w: tuple

    def __call__(self, x):
        x = np.atleast_2d(x)
        return np.broadcast_to(np.asarray(self.w, dtype=float), x.shape).copy()


class _Scaled:
    def __init__(self, base, factor):
        self.base = base
        self.factor = factor

    def __call__(self, x):
        return self.factor * self.base(x)


class FieldSequence:
    """Fields on time knots with linear interpolation in between."""

    def __init__(self, fields, times=None):
        if callable(fields):
            fields = [fields]
        self.fields = list(fields)
        if not self.fields:
            raise ValueError("need at least one field")
        if times is None:
            times = np.linspace(0.0, 1.0, len(self.fields)) if len(self.fields) > 1 else [0.0]
        self.times = np.asarray(times, dtype=float)
        if len(self.times) != len(self.fields) or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be increasing, one per field")

    def __call__(self, t, x):
        f, ts = self.fields, self.times
        if len(f) == 1 or t <= ts[0]:
            return f[0](x)
        if t >= ts[-1]:
            return f[-1](x)
        j = int(np.searchsorted(ts, t, side="right")) - 1
        a = (t - ts[j]) / (ts[j + 1] - ts[j])
        if a == 0:
            return f[j](x)
        return (1 - a) * f[j](x) + a * f[j + 1](x)

    def reversed(self):
        """The sequence ``v(t) = -u(1 - t)``."""
        return FieldSequence([_Scaled(g, -1.0) for g in self.fields[::-1]],
                             (1.0 - self.times)[::-1])

    def describe(self):
        names = sorted({type(g).__name__ for g in self.fields})
        return f"{len(self.fields)} field(s) [{', '.join(names)}]"


def _as_sequence(fields):
    return fields if isinstance(fields, FieldSequence) else FieldSequence(fields)


@dataclass(eq=False)
class FlowResult:
    """Trajectories ``x(t_k)`` of tracked points, shape (steps+1, P, d)."""

    points: np.ndarray
    steps: int
    source: str = ""
    fields: object = field(default=None, repr=False)
    t_span: tuple = (0.0, 1.0)

    @property
    def times(self):
        return np.linspace(self.t_span[0], self.t_span[1], self.steps + 1)

    @property
    def final(self):
        return self.points[-1]

    def to_dict(self):
        idx = np.unique(np.linspace(0, self.steps, min(self.steps + 1, MAX_FRAMES)).round().astype(int))
        return {"kind": "flow_result", "steps": self.steps, "source": self.source,
                "times": self.times[idx].tolist(), "frames": self.points[idx].tolist()}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def integrate_flow(fields, points, steps, t_span=(0.0, 1.0)):
    """RK4 integration of ``ẋ = X(t, x)`` over ``t_span`` (default ``[0, 1]``).

    Parameters
    ----------
    fields : callable, list of callables or FieldSequence
    points : array_like, shape (P, d)
    steps : int
        Number of RK4 steps, at least 8.
    t_span : (float, float)
        Start and end time; the field sequence is always indexed on [0, 1].

    Raises
    ------
    TrajectoryError
        On the first step that produces a non-finite position.
    """
    if steps < MIN_STEPS:
        raise ValueError(f"steps must be >= {MIN_STEPS}")
    seq = _as_sequence(fields)
    x = np.array(np.atleast_2d(points), dtype=float)
    t0, t1 = map(float, t_span)
    h = (t1 - t0) / steps
    out = np.empty((steps + 1,) + x.shape)
    out[0] = x
    for n in range(steps):
        t = t0 + n * h
        k1 = seq(t, x)
        k2 = seq(t + h / 2, x + h / 2 * k1)
        k3 = seq(t + h / 2, x + h / 2 * k2)
        k4 = seq(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise TrajectoryError(f"non-finite position at step {n}", step=n)
        out[n + 1] = x
    return FlowResult(out, steps, seq.describe(), seq, (t0, t1))


def inverse_flow_check(fields, points, steps):
    """Max displacement after flowing forward with ``u`` and back with ``-u(1-t)``."""
    seq = _as_sequence(fields)
    x0 = np.atleast_2d(np.asarray(points, dtype=float))
    fwd = integrate_flow(seq, x0, steps)
    back = integrate_flow(seq.reversed(), fwd.final, steps)
    return float(np.max(np.linalg.norm(back.final - x0, axis=-1)))


def act_on_curve(fr, q):
    """Transport ``q`` by a flow whose tracked points were ``q.points``."""
    if fr.points.shape[1:] != q.points.shape or not np.array_equal(fr.points[0], q.points):
        raise CurveError("the flow did not track the samples of this curve")
    return Curve(fr.final)


# -- smoothing operators on a periodic grid ----------------------------------

@dataclass(frozen=True, eq=False)
class PeriodicGridField:
    """Samples on the periodic box ``[-L, L)^d`` with ``n`` points per axis."""

    values: np.ndarray
    half_width: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        n = v.shape[0]
        if any(m != n for m in v.shape) or n < 64 or n & (n - 1):
            raise ValueError("grid resolution must be a power of two >= 64 on every axis")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        if not self.half_width > 0:
            raise ValueError("half-width must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self):
        return self.values.ndim

    @property
    def resolution(self):
        return self.values.shape[0]

    @property
    def spacing(self):
        return 2 * self.half_width / self.resolution

    def axis(self):
        return -self.half_width + self.spacing * np.arange(self.resolution)

    def coordinates(self):
        return np.meshgrid(*[self.axis()] * self.dim, indexing="ij")

    def frequencies(self):
        xi = 2 * np.pi * np.fft.fftfreq(self.resolution, d=self.spacing)
        return np.meshgrid(*[xi] * self.dim, indexing="ij")

    @property
    def nyquist(self):
        return np.pi / self.spacing

    @classmethod
    def sample(cls, func, half_width, resolution, d=1):
        axis = -half_width + 2 * half_width / resolution * np.arange(resolution)
        grids = np.meshgrid(*[axis] * d, indexing="ij")
        return cls(func(*grids), half_width)


def bump(r):
    """Smooth radial cutoff: 1 on ``r <= 1``, 0 on ``r >= 2``, C^∞ in between.

    Built as ``ψ(2 - r) / (ψ(2 - r) + ψ(r - 1))`` with ``ψ(t) = exp(-1/t)`` for
    ``t > 0``.
    """
    r = np.asarray(r, dtype=float)

    def psi(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    a = psi(2.0 - r)
    b = psi(r - 1.0)
    return a / (a + b)


def smooth_Sk(f, k):
    """``S_k f = η(x/k) · χ_k(D) f`` with a sharp cutoff ``|ξ| <= k``."""
    if k < 1:
        raise ValueError("cutoff k must be >= 1")
    if k > f.nyquist:
        raise ValueError(f"cutoff k={k} exceeds the grid Nyquist frequency {f.nyquist:.3g}")
    xi = f.frequencies()
    mag2 = sum(x ** 2 for x in xi)
    spec = np.fft.fftn(f.values)
    spec[mag2 > k * k] = 0
    low = np.real(np.fft.ifftn(spec))
    r = np.sqrt(sum(x ** 2 for x in f.coordinates()))
    return PeriodicGridField(bump(r / k) * low, f.half_width)


def grid_sobolev_norm(f, s):
    """``(∫ (1 + |ξ|²)^s |F f(ξ)|² dξ)^{1/2}`` by the grid transform.

    ``F f(ξ_m) ≈ (2π)^{-d/2} Δx^d Σ_j f_j e^{-i ξ_m x_j}`` on the dual grid with
    spacing ``Δξ = π/L``.
    """
    d = f.dim
    xi = f.frequencies()
    mag2 = sum(x ** 2 for x in xi)
    fhat = np.fft.fftn(f.values) * f.spacing ** d / (2 * np.pi) ** (d / 2)
    dxi = np.pi / f.half_width
    return float(np.sqrt(np.sum((1 + mag2) ** s * np.abs(fhat) ** 2) * dxi ** d))
