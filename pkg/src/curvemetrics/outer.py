"""
Outer metrics on curves induced by a right-invariant kernel metric.

For a sampled curve ``q`` the outer metric is ``G^O_q(u, v) = <A_q u, v>`` with
``A_q = B_q^{-1}`` the inverse of the kernel Gram matrix (see :mod:`.kernel`).
The minimal-norm ambient field with trace ``u`` on ``q`` (horizontal lift) is
the kernel field centred on the samples with weights ``A_q u``.

Orbit paths are parametrized by momenta ``p_t`` living at the implicit
midpoints ``m_t = (q_t + q_{t+1})/2``::

    q_{t+1} = q_t + Δt · B_{m_t} p_t,        m_t = q_t + (Δt/2) · B_{m_t} p_t,

with energy ``Σ_t Δt · p_tᵀ B_{m_t} p_t``. The scheme is symmetric in time,
and it is a bijection between momentum sequences and curve paths, which
lets :func:`outer_distance` optimize over curves with exact endpoints.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.sparse.linalg import spsolve

from .core import Curve, sobolev_gram_circle
from .exceptions import ConfigError, GramError, TrajectoryError
from .kernel import SobolevKernel, as_points, gram, metric_solve
from .paths import DistanceOptions, DistanceReport, optimize_path

__all__ = [
    "AmbientField",
    "MomentumPath",
    "OuterPathResult",
    "ProjectionReport",
    "Demo1DConfig",
    "outer_eval",
    "lift_field",
    "projection_identities_check",
    "outer_path_energy",
    "outer_distance",
    "outer_equivalence_probe",
    "outer_equivalence_spectrum",
    "momenta_from_curves",
    "demo_discontinuity_1d",
    "discrete_outer_norm_1d",
    "demo_sweep",
    "write_demo_csv",
]

COLLAPSE = 1e-8


@dataclass(frozen=True, eq=False)
class AmbientField:
    """Kernel vector field ``X(x) = Σ_i k(|x - c_i|) w_i`` on ``R^d``."""

    centers: np.ndarray
    weights: np.ndarray
    kernel: SobolevKernel

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        w = np.atleast_2d(np.asarray(self.weights, dtype=float))
        if c.shape != w.shape:
            raise ValueError(f"centers {c.shape} and weights {w.shape} differ in shape")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "weights", w)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.kernel.matrix(x, self.centers) @ self.weights

    def scaled(self, factor):
        return AmbientField(self.centers, factor * self.weights, self.kernel)

    def inner(self, other):
        """``<A X, Y>`` between two kernel fields (exact, via the cross Gram)."""
        K = self.kernel.matrix(self.centers, other.centers)
        return float(np.sum(self.weights * (K @ other.weights)))

    def norm_sq(self):
        """``‖X‖²_A = wᵀ G w`` with ``G`` the Gram matrix of the centres."""
        return float(np.sum(self.weights * (self.kernel.matrix(self.centers) @ self.weights)))

    def stacked(self, other, sign=1.0):
        """Field ``X + sign·Y`` on the union of centres."""
        return AmbientField(np.vstack([self.centers, other.centers]),
                            np.vstack([self.weights, sign * other.weights]), self.kernel)


def outer_eval(k, q, u, v):
    """Outer metric ``G^O_q(u, v) = uᵀ A_q v``.

    ``q`` may be a :class:`Curve` or any array of distinct points (e.g. a
    single landmark).
    """
    B = gram(k, q)
    u = B._shaped(u)
    v = B._shaped(v)
    return float(np.sum(u * metric_solve(B, v)))


def lift_field(k, q, u):
    """Horizontal lift: the minimal ``‖·‖_A`` field with ``X ∘ q = u``."""
    B = gram(k, q)
    p = metric_solve(B, B._shaped(u))
    return AmbientField(B.points, p, k)


@dataclass(frozen=True)
class ProjectionReport:
    """Defects of the discrete projection ``P_q X = lift(q, X ∘ q)``."""

    idempotence: float
    trace: float
    orthogonality: float
    norm_sq: float
    trace_norm: float

    @property
    def relative_idempotence(self):
        return self.idempotence / np.sqrt(self.norm_sq) if self.norm_sq > 0 else self.idempotence

    @property
    def relative_trace(self):
        return self.trace / self.trace_norm if self.trace_norm > 0 else self.trace

    @property
    def relative_orthogonality(self):
        return abs(self.orthogonality) / self.norm_sq if self.norm_sq > 0 else abs(self.orthogonality)


def projection_identities_check(k, q, X):
    """Check ``P² = P``, ``Tr P = Tr`` and A-orthogonality of ``X - PX``.

    All pairings are computed with cross Gram matrices on the stacked
    centres, not with the representer shortcut.
    """
    pts = as_points(q)
    trace = X(pts)
    PX = lift_field(k, pts, trace)
    PPX = lift_field(k, pts, PX(pts))
    diff = PPX.stacked(PX, -1.0)
    idem = np.sqrt(max(diff.norm_sq(), 0.0))
    tr = float(np.linalg.norm(PX(pts) - trace))
    ortho = PX.inner(X) - PX.norm_sq()
    return ProjectionReport(float(idem), tr, float(ortho), X.norm_sq(),
                            float(np.linalg.norm(trace)))


@dataclass(frozen=True, eq=False)
class MomentumPath:
    """Momenta ``p_0..p_{T-1}`` (each P x d) driving an orbit path from ``base``.

    ``base`` is a :class:`Curve` or, for landmark experiments, any array of
    distinct points.
    """

    base: object
    momenta: np.ndarray

    def __post_init__(self):
        base = self.base
        if not isinstance(base, Curve):
            base = np.array(as_points(base), dtype=float)
            base.setflags(write=False)
            object.__setattr__(self, "base", base)
        shape = self.base_points.shape
        p = np.array(self.momenta, dtype=float)
        if p.ndim != 3 or p.shape[1:] != shape:
            raise ValueError(f"momenta must have shape (T, {shape[0]}, {shape[1]})")
        if not np.all(np.isfinite(p)):
            raise ValueError("momenta must be finite")
        p.setflags(write=False)
        object.__setattr__(self, "momenta", p)

    @property
    def base_points(self):
        return self.base.points if isinstance(self.base, Curve) else self.base

    @property
    def steps(self):
        return self.momenta.shape[0]

    @property
    def times(self):
        return np.linspace(0.0, 1.0, self.steps + 1)

    def fields(self, k, result=None):
        """Piecewise-constant ambient fields ``B_{m_t} p_t`` (one per step)."""
        result = result or outer_path_energy(k, self)
        return [AmbientField(m, p, k) for m, p in zip(result.midpoints, self.momenta)]

    def reversed(self, k, result=None):
        """Momentum path running the same trajectory backwards."""
        result = result or outer_path_energy(k, self)
        end = result.curves[-1]
        return MomentumPath(Curve(end) if isinstance(self.base, Curve) else end,
                            -self.momenta[::-1])

    def to_dict(self):
        pts = self.base_points
        return {"kind": "momentum_path", "base": {"d": pts.shape[1], "points": pts.tolist()},
                "momenta": self.momenta.tolist()}

    @classmethod
    def from_dict(cls, data):
        pts = np.asarray(data["base"]["points"], dtype=float)
        base = Curve.from_dict(data["base"]) if len(pts) >= 8 else pts
        return cls(base, np.asarray(data["momenta"], dtype=float))


@dataclass(frozen=True, eq=False)
class OuterPathResult:
    energy: float
    length: float
    curves: np.ndarray
    midpoints: np.ndarray
    speeds: np.ndarray = field(repr=False)


def _swept_min_distance(a, b):
    """Smallest pairwise distance while every sample moves linearly from a to b."""
    if len(a) < 2:
        return np.inf
    r0 = a[:, None, :] - a[None, :, :]
    dr = (b[:, None, :] - b[None, :, :]) - r0
    den = np.sum(dr * dr, axis=-1)
    s = np.clip(-np.sum(r0 * dr, axis=-1) / np.where(den > 0, den, 1.0), 0.0, 1.0)
    dist = np.linalg.norm(r0 + s[..., None] * dr, axis=-1)
    np.fill_diagonal(dist, np.inf)
    return float(dist.min())


def _implicit_midpoint(k, q, p, dt, step, tol=1e-13, max_iter=100):
    m = q + 0.5 * dt * (k.matrix(q) @ p)
    scale = 1.0 + np.max(np.abs(q))
    for _ in range(max_iter):
        m_new = q + 0.5 * dt * (k.matrix(m) @ p)
        if not np.all(np.isfinite(m_new)):
            raise TrajectoryError(f"non-finite midpoint at step {step}", step=step)
        if np.max(np.abs(m_new - m)) <= tol * scale:
            return m_new
        m = m_new
    raise TrajectoryError(
        f"implicit midpoint did not converge at step {step}; momenta too large for T",
        step=step)


def outer_path_energy(k, mp):
    """Integrate a momentum path and return its energy, length and curves.

    Raises
    ------
    TrajectoryError
        If the fixed-point step fails or two samples come closer than
        ``1e-8·scale`` at any point of a step (a discrete step that carries
        samples through each other counts as a collapse).
    """
    dt = 1.0 / mp.steps
    q = np.array(mp.base_points, dtype=float)
    curves = [q]
    mids = []
    speeds = []
    for t, p in enumerate(mp.momenta):
        m = _implicit_midpoint(k, q, p, dt, t)
        v = k.matrix(m) @ p
        speeds.append(max(float(np.sum(p * v)), 0.0))
        q_next = q + dt * v
        # samples move on straight segments within a step, so check the sweep
        if _swept_min_distance(q, q_next) < COLLAPSE * k.scale:
            raise TrajectoryError(f"trajectory collapsed at step {t}", step=t)
        q = q_next
        mids.append(m)
        curves.append(q)
    speeds = np.array(speeds)
    return OuterPathResult(float(np.sum(speeds) * dt), float(np.sum(np.sqrt(speeds)) * dt),
                           np.array(curves), np.array(mids), speeds)


def _path_energy_grad(k, q):
    steps = q.shape[0] - 1
    diff = q[1:] - q[:-1]
    mid = 0.5 * (q[1:] + q[:-1])
    energy = 0.0
    g_diff = np.empty_like(diff)
    g_mid = np.empty_like(mid)
    for t in range(steps):
        K, G = k.matrix_and_derivative(mid[t])
        try:
            fac = cho_factor(K, lower=True)
        except np.linalg.LinAlgError:
            raise GramError(f"Gram matrix not positive definite at step {t}") from None
        P = cho_solve(fac, diff[t])
        energy += np.sum(diff[t] * P)
        g_diff[t] = 2 * P
        W = (P @ P.T) * G
        g_mid[t] = -2 * (W.sum(axis=1)[:, None] * mid[t] - W @ mid[t])
    grad = np.zeros_like(q)
    grad[1:] += g_diff + 0.5 * g_mid
    grad[:-1] += -g_diff + 0.5 * g_mid
    return float(steps * energy), steps * grad


def momenta_from_curves(k, curves):
    """Momenta that reproduce a curve path under the implicit-midpoint scheme."""
    curves = np.asarray(curves, dtype=float)
    steps = curves.shape[0] - 1
    out = []
    for t in range(steps):
        B = gram(k, 0.5 * (curves[t] + curves[t + 1]))
        out.append(metric_solve(B, (curves[t + 1] - curves[t]) * steps))
    return MomentumPath(Curve(curves[0]), np.array(out))


def outer_distance(k, q1, q2, opts=None):
    """Upper bound on ``dist^O(q1, q2)`` over orbit paths.

    Interior curves (equivalently, midpoint momenta) are optimized with the
    endpoints held fixed. The optimized curves are converted to a
    :class:`MomentumPath` and re-integrated; the terminal gap ``δ`` of that
    integration is closed by a straight segment whose first-order length
    ``sqrt(G^O_{q(1)}(δ, δ))`` is added to the reported value.
    """
    opts = opts or DistanceOptions()
    if q1.points.shape != q2.points.shape:
        raise ValueError(
            f"sample count/dimension mismatch: {q1.points.shape} vs {q2.points.shape}")
    ref = 0.5 * (q1.points + q2.points)
    try:
        C = np.linalg.cholesky(k.matrix(ref))
    except np.linalg.LinAlgError:
        C = np.linalg.cholesky(k.matrix(q1.points))

    def factor(z):
        return np.einsum("ij,...jd->...id", C, z)

    def factor_t(g):
        return np.einsum("ji,...jd->...id", C, g)

    def factor_inv(q):
        flat = np.moveaxis(q, -2, 0).reshape(C.shape[0], -1)
        out = solve_triangular(C, flat, lower=True)
        return np.moveaxis(out.reshape(np.moveaxis(q, -2, 0).shape), 0, -2)

    res = optimize_path(lambda q: _path_energy_grad(k, q),
                        q1.points, q2.points, opts, factor, factor_t, factor_inv)
    steps = res["steps"]

    def realize(curves):
        mp = momenta_from_curves(k, curves)
        out = outer_path_energy(k, mp)
        gap = q2.points - out.curves[-1]
        corr = 0.0
        if np.any(gap != 0):
            # ‖δ‖_A = ‖L^{-1} δ‖ with B = L Lᵀ; δ is often at rounding level,
            # where the residual test of metric_solve is not meaningful
            fac, lower = gram(k, out.curves[-1]).factor
            corr = float(np.linalg.norm(solve_triangular(fac, gap, lower=lower)))
        return mp, out, gap, corr

    t = np.linspace(0.0, 1.0, steps + 1)[:, None, None]
    lin_curves = q1.points + t * (q2.points - q1.points)
    mp, out, gap, corr = realize(res["path"])
    lin = realize(lin_curves)
    if out.length + corr > lin[1].length + lin[3]:
        mp, out, gap, corr = lin
    mismatch = float(np.max(np.abs(gap)))
    diagnostics = {
        "energy": out.energy,
        "path_length": out.length,
        "linear_length": lin[1].length,
        "endpoint_mismatch": mismatch,
        "mismatch_correction": float(corr),
        "iterations": res["iterations"],
        "grad_norm": res["grad_norm"],
        "status": res["status"],
    }
    converged = res["converged"] and mismatch < opts.match_tol * (1 + np.max(np.abs(q2.points)))
    return DistanceReport(
        value=out.length + corr,
        energy_trace=res["trace"],
        converged=bool(converged),
        path=mp if opts.keep_path else None,
        config={"kernel": {"s": k.s, "d": k.d, "scale": k.scale},
                "optimizer": opts.to_dict(), "kind": "outer"},
        diagnostics=diagnostics,
    )


def outer_equivalence_spectrum(k, q, order=None):
    """Generalized eigenvalues of ``A_q`` against flat ``H^{order}(S^1)``, ascending.

    ``order`` defaults to ``s' = s - (d - 1)/2``. Computed as reciprocals of
    the eigenvalues of ``H^{1/2} B_q H^{1/2}``, which avoids inverting the
    ill-conditioned Gram matrix. Each value has multiplicity ``d`` in the
    vector-valued problem; the scalar spectrum is returned.
    """
    if not isinstance(q, Curve):
        q = Curve(q)
    order = k.s - (k.d - 1) / 2 if order is None else order
    n = q.n_samples
    h_half = np.sqrt(n / (2 * np.pi)) * sobolev_gram_circle(n, order / 2)
    K = k.matrix(q.points)
    mu = np.linalg.eigvalsh(h_half @ K @ h_half)
    if mu[0] <= 0:
        raise GramError("cometric not positive definite in the probe")
    return np.sort(1 / mu)


def outer_equivalence_probe(k, q, order=None):
    """Extremal generalized eigenvalues ``(lower, upper)`` of ``A_q`` against flat ``H^{s'}``."""
    ev = outer_equivalence_spectrum(k, q, order)
    return float(ev[0]), float(ev[-1])


# -- one-dimensional discontinuity example -----------------------------------

@dataclass(frozen=True)
class Demo1DConfig:
    """Grid on ``[-L, L]`` with spacing ``h``; the H^1 part acts on ``[-1, 1]``."""

    x: float = 0.0
    half_width: float = 3.0
    spacing: float = 1e-3

    def __post_init__(self):
        if self.half_width < 3:
            raise ConfigError("demo grid half-width L must be >= 3")
        if not 0 < self.spacing <= 1e-2:
            raise ConfigError("demo grid spacing h must lie in (0, 1e-2]")
        if abs(self.x) > self.half_width:
            raise ConfigError("evaluation point lies outside the grid")


def _demo_system(half_width, spacing):
    cells = int(round(2 * half_width / spacing))
    y = np.linspace(-half_width, half_width, cells + 1)
    h = y[1] - y[0]
    mass = np.full(cells + 1, h)
    mass[[0, -1]] = h / 2
    inside = (y[:-1] >= -1 - 1e-9 * h) & (y[1:] <= 1 + 1e-9 * h)
    idx = np.flatnonzero(inside)
    stiff = np.zeros(cells + 1)
    np.add.at(stiff, idx, 1 / h)
    np.add.at(stiff, idx + 1, 1 / h)
    off = np.zeros(cells)
    off[idx] = -1 / h
    Q = sps.diags([off, mass + stiff, off], [-1, 0, 1], format="csc")
    return y, Q


def discrete_outer_norm_1d(cfg):
    """Minimum of ``∫ X² + ∫_I X'²`` subject to ``X(x) = 1`` on the grid.

    Returns ``(value, x_node)``: the constrained minimum ``1/(Q^{-1})_{ii}``
    and the grid node the evaluation point was snapped to.
    """
    y, Q = _demo_system(cfg.half_width, cfg.spacing)
    i = int(np.argmin(np.abs(y - cfg.x)))
    e = np.zeros(len(y))
    e[i] = 1.0
    z = spsolve(Q, e)
    return float(1.0 / z[i]), float(y[i])


def demo_discontinuity_1d(cfg):
    """Discrete ``G^O_x(1, 1)`` for the metric ``∫ X Y + 1_I X' Y'``."""
    return discrete_outer_norm_1d(cfg)[0]


def demo_sweep(xs, half_width=3.0, spacing=1e-3):
    """Rows ``(x, x_node, value)`` over a sweep of evaluation points."""
    xs = list(xs)
    if not xs:
        raise ValueError("empty sweep")
    y, Q = _demo_system(half_width, spacing)
    from scipy.sparse.linalg import splu
    lu = splu(Q)
    rows = []
    for x in xs:
        cfg = Demo1DConfig(x, half_width, spacing)
        i = int(np.argmin(np.abs(y - cfg.x)))
        e = np.zeros(len(y))
        e[i] = 1.0
        rows.append((float(x), float(y[i]), float(1.0 / lu.solve(e)[i])))
    return rows


def write_demo_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "x_node", "value"])
        for row in rows:
            writer.writerow([repr(v) for v in row])
