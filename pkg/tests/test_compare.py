import csv
import io
import json
from dataclasses import replace

import numpy as np
import pytest

from curvemetrics.core import MetricConfig, circle
from curvemetrics.exceptions import ConfigError, SamplingError
from curvemetrics.compare import (
    CSV_COLUMNS,
    _draw,
    ComparisonReport,
    ExperimentSpec,
    PairResult,
    amplitude_sweep,
    bilipschitz_probe,
    perturbation,
    run_comparison,
    sample_ball,
)
from curvemetrics.paths import DistanceOptions


def small_spec(**kw):
    base = dict(base=circle(32), sample_count=5, amplitude=0.015,
                optimizer=DistanceOptions(steps=6, keep_path=False))
    base.update(kw)
    return ExperimentSpec(**base)


def test_spec_validation():
    with pytest.raises(ConfigError):
        small_spec(sample_count=4)
    with pytest.raises(ConfigError):
        small_spec(family="twist")
    with pytest.raises(ConfigError):
        small_spec(radius=0.0)
    with pytest.raises(ConfigError):
        small_spec(amplitude=-1.0)


def test_spec_round_trip():
    spec = small_spec(family="bending", seed=4)
    back = ExperimentSpec.from_dict(spec.to_dict())
    assert back.to_dict() == spec.to_dict()
    assert ExperimentSpec.from_dict({"base_circle_n": 16}).base.n_samples == 16
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict({"bogus": 1})


def test_zero_amplitude_samples_are_the_base():
    spec = small_spec(amplitude=0.0)
    sample = sample_ball(spec)
    assert all(np.array_equal(c.points, spec.base.points) for c in sample.curves)
    assert sample.distances == [0.0] * 5
    with pytest.raises(ConfigError, match="no distinct pairs"):
        run_comparison(spec)
    with pytest.raises(ConfigError, match="no distinct pairs"):
        bilipschitz_probe(spec)


def test_perturbation_sup_norm_and_refinement():
    rng = np.random.default_rng(0)
    spec = small_spec()
    for family in ("fourier-random", "translation", "bending"):
        fam = replace(spec, family=family)
        coef = _draw(rng, family, 2)
        delta = perturbation(fam, coef)
        assert np.max(np.linalg.norm(delta, axis=1)) <= fam.amplitude * coef["scale"] * (1 + 1e-12)
        fine = perturbation(fam.refined(64), coef)
        # the same continuum field sampled on the finer grid
        assert np.allclose(fine[::2], delta, atol=1e-12)


def test_translation_family_accepts_all():
    spec = small_spec(family="translation", sample_count=6)
    sample = sample_ball(spec)
    assert len(sample.curves) == 6
    for c in sample.curves:
        d = c.points - spec.base.points
        assert np.allclose(d, d[0], atol=1e-15)


def test_acceptance_is_reproducible():
    a = sample_ball(small_spec(seed=3))
    b = sample_ball(small_spec(seed=3))
    assert a.acceptance == b.acceptance
    assert a.distances == b.distances
    assert all(np.array_equal(x.points, y.points) for x, y in zip(a.curves, b.curves))


def test_sampling_error_when_ball_too_small():
    with pytest.raises(SamplingError):
        sample_ball(small_spec(radius=1e-6))


def test_comparison_small_run():
    rep = run_comparison(small_spec(), refine=False)
    assert len(rep.pairs) == 5
    assert rep.diagnostics["pairs_used"] == 5
    assert rep.diagnostics["acceptance"] == 1.0
    for p in rep.pairs:
        assert p.converged and not p.excluded
        assert p.dist_inner > 0 and p.dist_outer > 0
    assert rep.max_ratio_io == max(p.ratio_io for p in rep.pairs)
    lo, hi = rep.bilipschitz
    assert 0 < lo <= hi


def test_identical_pairs_are_excluded():
    spec = small_spec()
    sample = sample_ball(spec)
    sample.curves[1] = sample.curves[0]
    rep = run_comparison(spec, refine=False, sample=sample)
    ex = [p for p in rep.pairs if p.excluded]
    assert [(p.id1, p.id2) for p in ex] == [(0, 1)]
    assert rep.diagnostics["excluded"] == 1 and rep.diagnostics["pairs_used"] == 4


def test_workers_do_not_change_results():
    spec = small_spec()
    a = run_comparison(spec, workers=1, refine=False)
    b = run_comparison(spec, workers=2, refine=False)
    assert a.to_json() == b.to_json()


def test_report_round_trip_and_csv():
    rep = run_comparison(small_spec(), refine=True)
    text = rep.to_json()
    assert ComparisonReport.from_dict(json.loads(text)).to_json() == text
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert list(rows[0]) == CSV_COLUMNS
    assert len(rows) == 5
    assert float(rows[0]["dist_outer"]) == rep.pairs[0].dist_outer
    # same seed, same bytes
    assert run_comparison(small_spec(), refine=True).to_csv() == rep.to_csv()


def test_refinement_does_not_move_ratios():
    rep = run_comparison(small_spec(), refine=True)
    for p in rep.pairs:
        assert not p.flagged
        assert abs(p.refined_ratio_io - p.ratio_io) <= 0.2 * p.ratio_io


def test_tighter_tolerance_lowers_distances():
    spec = small_spec()
    sample = sample_ball(spec)
    loose = run_comparison(spec, refine=False, sample=sample)
    tight = run_comparison(spec.with_tol(1e-6), refine=False, sample=sample)
    for a, b in zip(loose.pairs, tight.pairs):
        # optimized path lengths are upper bounds; tightening can only help,
        # up to the stopping tolerance of the looser run
        assert b.dist_outer <= a.dist_outer * (1 + 1e-4)
        assert b.dist_inner <= a.dist_inner * (1 + 1e-4)


def test_comparison_rejects_low_order():
    spec = small_spec(metric=MetricConfig(s=3.0, n=3, a=(1.0, 0.0, 0.0, 1.0)))
    with pytest.raises(ConfigError, match="order"):
        run_comparison(spec)


def test_pair_ratios_handle_zero():
    p = PairResult(0, 1, 0.0, 0.0, 0.0, 0.0, True)
    assert np.isnan(p.ratio_io) and np.isnan(p.ratio_outer_flat)


def test_translation_probe_matches_first_order_prediction():
    spec = small_spec(family="translation", amplitude=1e-2)
    probe = bilipschitz_probe(spec)
    assert len(probe.ratios) == 5
    for r, pred in zip(probe.ratios, probe.predicted):
        assert abs(r / pred - 1) < 1e-3
    lo, hi = probe.eigen_bounds
    assert lo * (1 - 1e-6) <= min(probe.predicted) and max(probe.predicted) <= hi * (1 + 1e-6)


def test_amplitude_sweep_translation_ratio_stable():
    spec = small_spec(family="translation")
    sweep = amplitude_sweep(spec, (3e-2, 1e-2))
    r = [np.mean(p.ratios) for _, p in sweep]
    assert abs(r[0] / r[1] - 1) < 0.05
