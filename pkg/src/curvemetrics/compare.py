"""
Experiments comparing inner and outer distances on balls around a base curve.

Perturbations are defined analytically in the curve parameter θ from seeded
coefficients, so the same family can be resampled at any N: refining an
experiment (``spec.refined(2 * N)``) compares the same continuum curves on a
finer grid.

All distances are upper bounds from path optimization, so ratio statements
are checked for stability under refinement rather than as exact inequalities.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import Curve, MetricConfig, circle, fourier_resample, sobolev_norm_circle, theta_grid
from .exceptions import ConfigError, SamplingError
from .inner import InnerMetric, inner_distance
from .kernel import SobolevKernel
from .outer import momenta_from_curves, outer_distance, outer_equivalence_probe, outer_eval, outer_path_energy
from .paths import DistanceOptions

__all__ = [
    "FAMILIES",
    "ExperimentSpec",
    "BallSample",
    "PairResult",
    "ComparisonReport",
    "perturbation",
    "sample_ball",
    "run_comparison",
    "bilipschitz_probe",
    "amplitude_sweep",
]

FAMILIES = ("fourier-random", "translation", "bending")
MAX_MODE = 4
MIN_ACCEPTANCE = 0.1
REFINE_FLAG = 0.2
_SUP_GRID = 1024


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    """Seeded family of perturbed curves inside an outer ball.

    Parameters
    ----------
    base : Curve
        Ball centre ``c_0``.
    radius : float
        Ball radius ``R`` in outer distance.
    sample_count : int
        Number of accepted curves (and of cyclic pairs), at least 5.
    family : str
        One of ``fourier-random``, ``translation``, ``bending``.
    amplitude : float
        Largest sup-norm displacement of a candidate; each candidate draws a
        factor in ``[1/4, 1]`` of it.
    """

    base: Curve = field(default_factory=lambda: circle(64))
    radius: float = 0.5
    sample_count: int = 20
    family: str = "fourier-random"
    amplitude: float = 0.015
    metric: MetricConfig = field(default_factory=MetricConfig)
    seed: int = 0
    optimizer: DistanceOptions = field(default_factory=lambda: DistanceOptions(keep_path=False))

    def __post_init__(self):
        if self.sample_count < 5:
            raise ConfigError(f"sample_count must be >= 5, got {self.sample_count}")
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown perturbation family {self.family!r}; expected one of {FAMILIES}")
        if not self.radius > 0:
            raise ConfigError("ball radius R must be positive")
        if self.amplitude < 0:
            raise ConfigError("amplitude must be nonnegative")
        if self.base.dim != self.metric.d:
            raise ConfigError(f"base curve lives in R^{self.base.dim}, metric in R^{self.metric.d}")

    @property
    def kernel(self):
        return SobolevKernel.from_config(self.metric)

    def refined(self, n_new):
        """Same experiment with the base resampled to ``n_new`` points."""
        return replace(self, base=fourier_resample(self.base, n_new))

    def with_tol(self, tol):
        return replace(self, optimizer=replace(self.optimizer, tol=tol))

    def to_dict(self):
        return {"base": self.base.to_dict(), "radius": self.radius,
                "sample_count": self.sample_count, "family": self.family,
                "amplitude": self.amplitude, "metric": self.metric.to_dict(),
                "seed": self.seed, "optimizer": self.optimizer.to_dict()}

    @classmethod
    def from_dict(cls, data):
        allowed = {"base", "radius", "sample_count", "family", "amplitude", "metric",
                   "seed", "optimizer", "base_circle_n"}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        kw = {k: data[k] for k in ("radius", "sample_count", "family", "amplitude", "seed") if k in data}
        if "base" in data:
            kw["base"] = Curve.from_dict(data["base"])
        elif "base_circle_n" in data:
            kw["base"] = circle(int(data["base_circle_n"]))
        if "metric" in data:
            kw["metric"] = MetricConfig.from_dict(data["metric"])
        if "optimizer" in data:
            kw["optimizer"] = replace(DistanceOptions.from_dict(data["optimizer"]), keep_path=False)
        return cls(**kw)


def _spectral_tangent(points):
    n = points.shape[0]
    m = np.fft.fftfreq(n) * n
    if n % 2 == 0:
        m[n // 2] = 0
    return np.real(np.fft.ifft(1j * m[:, None] * np.fft.fft(points, axis=0), axis=0))


def _draw(rng, family, d):
    """Coefficients of one candidate perturbation."""
    scale = rng.uniform(0.25, 1.0)
    if family == "fourier-random":
        return {"scale": scale, "cos": rng.standard_normal((MAX_MODE, d)),
                "sin": rng.standard_normal((MAX_MODE, d))}
    if family == "translation":
        w = rng.standard_normal(d)
        return {"scale": scale, "w": w / np.linalg.norm(w)}
    return {"scale": scale, "theta0": rng.uniform(0, 2 * np.pi), "kappa": rng.uniform(2.0, 6.0),
            "sign": rng.choice([-1.0, 1.0])}


def _shape(coef, family, th, base_points=None):
    if family == "fourier-random":
        m = np.arange(1, MAX_MODE + 1)[:, None]
        c = np.cos(m * th) / m ** 2
        s = np.sin(m * th) / m ** 2
        return c.T @ coef["cos"] + s.T @ coef["sin"]
    if family == "translation":
        return np.tile(coef["w"], (len(th), 1))
    tangent = _spectral_tangent(base_points)
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    normal = np.column_stack([tangent[:, 1], -tangent[:, 0]])
    if base_points.shape[1] > 2:
        normal = np.column_stack([normal, np.zeros((len(th), base_points.shape[1] - 2))])
    prof = np.exp(coef["kappa"] * (np.cos(th - coef["theta0"]) - 1))
    return coef["sign"] * prof[:, None] * normal


def perturbation(spec, coef):
    """Displacement field of one candidate on ``spec.base``, sup-normalized.

    The sup norm is taken on a fixed fine grid, so the field is the same
    continuum object at every N.
    """
    th = theta_grid(spec.base.n_samples)
    if spec.family == "bending":
        fine = fourier_resample(spec.base, _SUP_GRID).points
        sup = np.max(np.linalg.norm(_shape(coef, spec.family, theta_grid(_SUP_GRID), fine), axis=1))
    else:
        sup = np.max(np.linalg.norm(_shape(coef, spec.family, theta_grid(_SUP_GRID)), axis=1))
    delta = _shape(coef, spec.family, th, spec.base.points)
    return spec.amplitude * coef["scale"] * delta / sup


def _linear_outer_length(k, c1, c2, steps):
    t = np.linspace(0.0, 1.0, steps + 1)[:, None, None]
    curves = c1.points + t * (c2.points - c1.points)
    return outer_path_energy(k, momenta_from_curves(k, curves)).length


@dataclass
class BallSample:
    curves: list
    distances: list
    candidates: int

    @property
    def acceptance(self):
        return len(self.curves) / self.candidates if self.candidates else 0.0


def sample_ball(spec):
    """Draw perturbed curves until ``sample_count`` lie inside ``B^O(c_0, R)``.

    Membership is certified with the outer length of the linear path from
    the base, an upper bound on the outer distance.

    Raises
    ------
    SamplingError
        If fewer than 10% of the candidates are accepted.
    """
    rng = np.random.default_rng(spec.seed)
    k = spec.kernel
    steps = spec.optimizer.steps
    limit = int(np.ceil(spec.sample_count / MIN_ACCEPTANCE))
    curves, dists = [], []
    tried = 0
    while len(curves) < spec.sample_count and tried < limit:
        coef = _draw(rng, spec.family, spec.base.dim)
        tried += 1
        delta = perturbation(spec, coef)
        if not np.any(delta):
            curves.append(spec.base)
            dists.append(0.0)
            continue
        cand = Curve(spec.base.points + delta)
        dist = _linear_outer_length(k, spec.base, cand, steps)
        if dist < spec.radius:
            curves.append(cand)
            dists.append(float(dist))
    if len(curves) < spec.sample_count:
        raise SamplingError(
            f"only {len(curves)} of {tried} candidates fell inside the ball of radius "
            f"{spec.radius}; reduce the perturbation amplitude")
    return BallSample(curves, dists, tried)


@dataclass
class PairResult:
    id1: int
    id2: int
    dist_inner: float
    dist_outer: float
    flat_diff: float
    flat_diff_n: float
    converged: bool
    flagged: bool = False
    excluded: bool = False
    refined_ratio_io: float = float("nan")

    @property
    def ratio_io(self):
        return self.dist_inner / self.dist_outer if self.dist_outer > 0 else float("nan")

    @property
    def ratio_flat_outer(self):
        return self.flat_diff / self.dist_outer if self.dist_outer > 0 else float("nan")

    @property
    def ratio_outer_flat(self):
        return self.dist_outer / self.flat_diff if self.flat_diff > 0 else float("nan")

    def to_dict(self):
        out = asdict(self)
        out.update(ratio_io=self.ratio_io, ratio_flat_outer=self.ratio_flat_outer,
                   ratio_outer_flat=self.ratio_outer_flat)
        return out


CSV_COLUMNS = ["id1", "id2", "dist_inner", "dist_outer", "flat_diff", "flat_diff_n",
               "ratio_io", "ratio_flat_outer", "ratio_outer_flat", "converged", "flagged",
               "excluded", "refined_ratio_io"]


def _finite_max(values):
    vals = [v for v in values if np.isfinite(v)]
    return max(vals) if vals else float("nan")


def _finite_min(values):
    vals = [v for v in values if np.isfinite(v)]
    return min(vals) if vals else float("nan")


@dataclass
class ComparisonReport:
    pairs: list
    max_ratio_io: float
    max_flat_over_outer: float
    max_outer_over_flat: float
    bilipschitz: tuple
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def from_pairs(cls, pairs, diagnostics=None):
        good = [p for p in pairs if not (p.flagged or p.excluded or not p.converged)]
        lo = _finite_min([p.ratio_outer_flat for p in good])
        hi = _finite_max([p.ratio_outer_flat for p in good])
        diag = {
            "pairs_total": len(pairs),
            "pairs_used": len(good),
            "excluded": sum(p.excluded for p in pairs),
            "unconverged": sum((not p.converged) and not p.excluded for p in pairs),
            "flagged": sum(p.flagged for p in pairs),
        }
        diag.update(diagnostics or {})
        return cls(pairs, _finite_max([p.ratio_io for p in good]),
                   _finite_max([p.ratio_flat_outer for p in good]), hi, (lo, hi), diag)

    def to_dict(self):
        return {"pairs": [p.to_dict() for p in self.pairs],
                "max_ratio_io": self.max_ratio_io,
                "max_flat_over_outer": self.max_flat_over_outer,
                "max_outer_over_flat": self.max_outer_over_flat,
                "bilipschitz": list(self.bilipschitz),
                "diagnostics": self.diagnostics}

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), sort_keys=True, indent=indent)

    @classmethod
    def from_dict(cls, data):
        fields = set(PairResult.__dataclass_fields__)
        pairs = [PairResult(**{k: v for k, v in p.items() if k in fields}) for p in data["pairs"]]
        return cls(pairs, data["max_ratio_io"], data["max_flat_over_outer"],
                   data["max_outer_over_flat"], tuple(data["bilipschitz"]), data["diagnostics"])

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for p in self.pairs:
            row = p.to_dict()
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in CSV_COLUMNS])
        return buf.getvalue()


def _pair_distances(metric, c1, c2, opts):
    k = SobolevKernel.from_config(metric)
    di = inner_distance(InnerMetric(metric), c1, c2, opts)
    do = outer_distance(k, c1, c2, opts)
    return di.value, do.value, di.converged and do.converged


def _pair_job(args):
    i, j, metric, c1, c2, opts, refine = args
    delta = c2.points - c1.points
    flat = sobolev_norm_circle(delta, metric.s_prime)
    flat_n = sobolev_norm_circle(delta, metric.n)
    if not np.any(delta):
        return PairResult(i, j, 0.0, 0.0, 0.0, 0.0, True, excluded=True)
    dI, dO, conv = _pair_distances(metric, c1, c2, opts)
    res = PairResult(i, j, dI, dO, flat, flat_n, conv)
    if refine:
        rI, rO, rconv = _pair_distances(metric, c1, c2, replace(opts, tol=opts.tol / 2))
        res.refined_ratio_io = rI / rO
        res.flagged = abs(res.refined_ratio_io - res.ratio_io) > REFINE_FLAG * abs(res.ratio_io)
        res.converged = conv and rconv
    return res


def _map(jobs, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_pair_job, jobs))
    return [_pair_job(j) for j in jobs]


def _cyclic_pairs(n):
    return [(i, (i + 1) % n) for i in range(n)]


def run_comparison(spec, workers=1, refine=True, sample=None):
    """Inner and outer distances over cyclic pairs of ball samples.

    Parameters
    ----------
    spec : ExperimentSpec
    workers : int
        Process count for the pair loop; results do not depend on it.
    refine : bool
        Recompute each pair at half the tolerance and flag pairs whose
        ``dist^I/dist^O`` ratio moves by more than 20%.
    sample : BallSample, optional
        Reuse an existing draw instead of sampling.

    Raises
    ------
    ConfigError
        If ``s < n + (d-1)/2`` or all pairs are identical.
    """
    spec.metric.check_comparison()
    sample = sample or sample_ball(spec)
    jobs = [(i, j, spec.metric, sample.curves[i], sample.curves[j], spec.optimizer, refine)
            for i, j in _cyclic_pairs(len(sample.curves))]
    pairs = _map(jobs, workers)
    if all(p.excluded for p in pairs):
        raise ConfigError("no distinct pairs: every sampled curve equals its neighbour")
    return ComparisonReport.from_pairs(pairs, {
        "acceptance": sample.acceptance,
        "candidates": sample.candidates,
        "n_samples": spec.base.n_samples,
        "tol": spec.optimizer.tol,
        "seed": spec.seed,
    })


@dataclass
class ProbeResult:
    lower: float
    upper: float
    ratios: list
    predicted: list
    eigen_bounds: tuple

    def __iter__(self):
        return iter((self.lower, self.upper))


def bilipschitz_probe(spec, workers=1):
    """Extremal ratios ``dist^O(c_0, c)/‖c - c_0‖_{H^{s'}}`` over ball samples.

    Also returns, per sample, the first-order prediction
    ``sqrt(G^O_{c_0}(δ, δ))/‖δ‖_{H^{s'}}`` and the extremal generalized
    eigenvalue bounds ``(sqrt(λ_min), sqrt(λ_max))`` of the outer metric
    against flat ``H^{s'}`` at the base.

    Raises
    ------
    ConfigError
        If the amplitude is zero (no distinct pairs).
    """
    if spec.amplitude == 0:
        raise ConfigError("no distinct pairs: zero perturbation amplitude")
    sample = sample_ball(spec)
    k = spec.kernel
    order = spec.metric.s_prime
    opts = spec.optimizer
    ratios, predicted = [], []
    for c in sample.curves:
        delta = c.points - spec.base.points
        flat = sobolev_norm_circle(delta, order)
        if flat == 0:
            continue
        d = outer_distance(k, spec.base, c, opts).value
        ratios.append(d / flat)
        predicted.append(np.sqrt(outer_eval(k, spec.base, delta, delta)) / flat)
    if not ratios:
        raise ConfigError("no distinct pairs")
    lo, hi = outer_equivalence_probe(k, spec.base, order)
    return ProbeResult(min(ratios), max(ratios), ratios, predicted, (np.sqrt(lo), np.sqrt(hi)))


def amplitude_sweep(spec, amplitudes=(1e-1, 3e-2, 1e-2)):
    """Probe ratios along a shrinking amplitude sequence (same seed).

    The ball radius is lifted to infinity so every candidate is accepted
    and the same directions are reused at each amplitude.
    """
    out = []
    for a in amplitudes:
        probe = bilipschitz_probe(replace(spec, amplitude=a, radius=np.inf))
        out.append((a, probe))
    return out
