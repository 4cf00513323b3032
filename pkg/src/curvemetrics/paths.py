"""
Discrete curve paths, distance reports and the shared path-energy minimizer.

Both geodesic distances are estimated the same way: the interior curves of a
path with fixed endpoints are moved to minimize a discrete Riemannian energy,
starting from linear interpolation. The optimizer works in preconditioned
coordinates ``Y``::

    Q_t = Q_lin,t + F · Σ_k Y_k sin(π t k / T) / sqrt(λ_k)

where ``F`` whitens the metric at a reference curve (``F Fᵀ`` ≈ cometric)
and the discrete sine transform diagonalizes the time second difference
(eigenvalues ``λ_k``). In these coordinates the energy is close to ``|Y|²``,
which keeps L-BFGS iteration counts low even though the metrics are
stiff in space.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.fft import dst
from scipy.optimize import minimize

from .core import Curve
from .exceptions import ConfigError, ImmersionError

__all__ = ["CurvePath", "DistanceOptions", "DistanceReport", "minimize_path_energy", "optimize_path",
           "refine_in_time"]


@dataclass(frozen=True, eq=False)
class CurvePath:
    """Curves ``c_0..c_T`` on the uniform time grid ``t_k = k/T``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 3 or pts.shape[0] < 2:
            raise ValueError("a curve path needs an array of shape (T+1, N, d) with T >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("curve path contains non-finite values")
        edges = np.linalg.norm(np.roll(pts, -1, axis=1) - pts, axis=2)
        bad = np.flatnonzero(np.any(edges == 0, axis=1))
        if bad.size:
            raise ImmersionError(f"curve {int(bad[0])} of the path has a zero-length edge")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_curves(cls, curves):
        return cls(np.stack([c.points for c in curves]))

    @classmethod
    def linear(cls, c1, c2, steps):
        t = np.linspace(0.0, 1.0, steps + 1)[:, None, None]
        return cls(c1.points + t * (c2.points - c1.points))

    @property
    def steps(self):
        return self.points.shape[0] - 1

    @property
    def times(self):
        return np.linspace(0.0, 1.0, self.steps + 1)

    @property
    def curves(self):
        return [Curve(p) for p in self.points]

    def to_dict(self):
        return {"kind": "curve_path", "points": self.points.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["points"], dtype=float))


@dataclass(frozen=True)
class DistanceOptions:
    """Settings for geodesic-distance optimization.

    ``tol`` is relative: the run counts as converged when the preconditioned
    gradient satisfies ``‖∇_Y E‖_∞ <= tol · sqrt(E_linear)``. With
    ``continuation = c`` the optimum at ``T`` steps seeds a run at ``2T``,
    ``c`` times over.
    """

    steps: int = 16
    tol: float = 1e-4
    max_iters: int = 1000
    memory: int = 20
    keep_path: bool = True
    match_tol: float = 1e-8
    continuation: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError("T (time steps) must be >= 1")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.continuation < 0:
            raise ConfigError("continuation_stages must be >= 0")

    @property
    def final_steps(self):
        return self.steps * 2 ** self.continuation

    def to_dict(self):
        return {"T": self.steps, "tol": self.tol, "max_iters": self.max_iters,
                "continuation_stages": self.continuation}

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {"T", "tol", "max_iters", "continuation_stages"}
        if unknown:
            raise ConfigError(f"unknown optimizer keys: {sorted(unknown)}")
        kw = {}
        if "continuation_stages" in data:
            kw["continuation"] = int(data["continuation_stages"])
        if "T" in data:
            kw["steps"] = int(data["T"])
        if "tol" in data:
            kw["tol"] = float(data["tol"])
        if "max_iters" in data:
            kw["max_iters"] = int(data["max_iters"])
        return cls(**kw)


@dataclass
class DistanceReport:
    """Result of a geodesic-distance estimate.

    ``value`` is the length of the stored path (an upper bound on the
    geodesic distance up to time discretization); for outer distances the
    terminal-gap correction from ``diagnostics`` is included.
    """

    value: float
    energy_trace: list
    converged: bool
    path: object = None
    config: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "value": float(self.value),
            "energy_trace": [float(e) for e in self.energy_trace],
            "converged": bool(self.converged),
            "path": None if self.path is None else self.path.to_dict(),
            "config": self.config,
            "diagnostics": self.diagnostics,
        }

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), sort_keys=True, indent=indent)

    @classmethod
    def from_dict(cls, data):
        path = data.get("path")
        if path is not None:
            if path.get("kind") == "momentum_path":
                from .outer import MomentumPath
                path = MomentumPath.from_dict(path)
            else:
                path = CurvePath.from_dict(path)
        return cls(value=data["value"], energy_trace=list(data["energy_trace"]),
                   converged=data["converged"], path=path, config=data.get("config", {}),
                   diagnostics=data.get("diagnostics", {}))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _time_eigenvalues(steps):
    k = np.arange(1, steps)
    return (2 - 2 * np.cos(np.pi * k / steps)) * steps


def minimize_path_energy(energy_grad, c1, c2, opts, factor, factor_t, factor_inv=None,
                         init=None):
    """Minimize a path energy over interior curves with fixed endpoints.

    Parameters
    ----------
    energy_grad : callable
        ``Q -> (E, dE/dQ)`` for a full path array of shape (T+1, N, d).
    c1, c2 : ndarray, shape (N, d)
        Endpoint curves.
    opts : DistanceOptions
    factor, factor_t : callable
        Spatial preconditioner ``Z -> F Z`` and its transpose, acting on
        arrays of shape (..., N, d).
    factor_inv : callable, optional
        Inverse of ``factor``; needed only with ``init``.
    init : ndarray, shape (T+1, N, d), optional
        Starting path; linear interpolation when omitted.

    Returns
    -------
    dict with keys ``path`` (T+1, N, d), ``energy``, ``linear_energy``,
    ``trace``, ``converged``, ``iterations``, ``grad_norm``, ``status``.
    """
    steps = opts.steps
    t = np.linspace(0.0, 1.0, steps + 1)[:, None, None]
    q_lin = c1 + t * (c2 - c1)
    e_lin, _ = energy_grad(q_lin)
    result = {"linear_energy": float(e_lin), "iterations": 0, "status": "linear"}
    if steps == 1 or e_lin == 0:
        result.update(path=q_lin, energy=float(e_lin), trace=[float(e_lin)],
                      converged=True, grad_norm=0.0)
        return result

    shape = (steps - 1,) + c1.shape
    scale = 1.0 / np.sqrt(_time_eigenvalues(steps))[:, None, None]

    def to_path(y):
        z = dst(y.reshape(shape) * scale, type=1, axis=0, norm="ortho")
        q = q_lin.copy()
        q[1:-1] += factor(z)
        return q

    def fun(y):
        q = to_path(y)
        try:
            e, g = energy_grad(q)
        except (ImmersionError, ArithmeticError):
            return np.inf, np.zeros_like(y)
        gy = dst(factor_t(g[1:-1]), type=1, axis=0, norm="ortho") * scale
        return e, gy.ravel()

    y0 = np.zeros(int(np.prod(shape)))
    if init is not None:
        z = factor_inv(np.asarray(init, dtype=float)[1:-1] - q_lin[1:-1])
        y0 = (dst(z, type=1, axis=0, norm="ortho") / scale).ravel()
        e0 = fun(y0)[0]
        if not np.isfinite(e0) or e0 > e_lin:
            y0[:] = 0.0
    trace = [float(fun(y0)[0])]
    last = {"x": None, "e": None}

    def fun_cached(y):
        e, g = fun(y)
        last["x"], last["e"] = y.copy(), e
        return e, g

    def callback(xk):
        e = last["e"] if np.array_equal(xk, last["x"]) else fun(xk)[0]
        trace.append(float(e))

    gtol = opts.tol * np.sqrt(e_lin)
    res = minimize(fun_cached, y0, jac=True, method="L-BFGS-B",
                   callback=callback,
                   options={"maxiter": opts.max_iters, "gtol": gtol, "ftol": 1e-15,
                            "maxcor": opts.memory})
    e_opt, g_opt = fun(res.x)
    grad_norm = float(np.max(np.abs(g_opt))) if np.isfinite(e_opt) else np.inf
    if not np.isfinite(e_opt) or e_opt > e_lin:
        q_best, e_best = q_lin, float(e_lin)
    else:
        q_best, e_best = to_path(res.x), float(e_opt)
    result.update(path=q_best, energy=e_best, trace=trace,
                  converged=bool(grad_norm <= gtol), grad_norm=grad_norm,
                  gtol=float(gtol), iterations=int(res.nit), status=str(res.message))
    return result


def refine_in_time(path):
    """Double the time resolution of a path by inserting segment midpoints."""
    path = np.asarray(path, dtype=float)
    out = np.empty((2 * path.shape[0] - 1,) + path.shape[1:])
    out[::2] = path
    out[1::2] = 0.5 * (path[1:] + path[:-1])
    return out


def optimize_path(energy_grad, c1, c2, opts, factor, factor_t, factor_inv):
    """:func:`minimize_path_energy` with ``opts.continuation`` T-doubling stages."""
    stage_opts = opts
    res = minimize_path_energy(energy_grad, c1, c2, stage_opts, factor, factor_t)
    trace = list(res["trace"])
    iterations = res["iterations"]
    for _ in range(opts.continuation):
        stage_opts = replace(stage_opts, steps=2 * stage_opts.steps)
        res = minimize_path_energy(energy_grad, c1, c2, stage_opts, factor, factor_t,
                                   factor_inv, init=refine_in_time(res["path"]))
        trace.extend(res["trace"])
        iterations += res["iterations"]
    res.update(trace=trace, iterations=iterations, steps=stage_opts.steps)
    return res
