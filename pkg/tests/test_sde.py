import math

import numpy as np
import pytest
from scipy import stats

from surfdiff.geometry import drift_at, metric_at
from surfdiff.sde import (SimulationError, SimulationPlan, coarsen_noise, em_step,
                          increment_stats, sample_path, simulate)
from surfdiff.fields import ridge_field
from surfdiff.rng import step_normals

from conftest import ridge_Z


class TestPlan:
    def test_counts(self):
        p = SimulationPlan(dt=1e-3, T=2.0, delta=0.5)
        assert p.steps_per_sample == 500 and p.num_samples == 4 and p.num_steps == 2000

    @pytest.mark.parametrize("kw", [dict(dt=0.0), dict(dt=-1e-3), dict(delta=0.25e-4),
                                    dict(delta=200.0), dict(dt=3e-4, delta=0.5)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SimulationPlan(**kw)


def test_zero_noise_step_follows_drift(ridge):
    x = np.array([0.1, 0.3])
    y = em_step(ridge, x, 1e-3, (0.0, 0.0))
    np.testing.assert_allclose(y, x + 1e-3 * drift_at(ridge, x), rtol=1e-15)
    with pytest.raises(ValueError):
        em_step(ridge, x, 0.0, (0.0, 0.0))


def test_single_step_moments(ridge):
    x = np.array([0.1, 0.3])
    dt = 1e-2
    z = step_normals(9, 0, 20000)
    steps = np.array([em_step(ridge, x, dt, w) for w in z]) - x
    mean = dt * drift_at(ridge, x)
    cov = 2 * dt * metric_at(ridge, x).inv_g
    se = np.sqrt(np.diag(cov) / len(z))
    assert np.all(np.abs(steps.mean(0) - mean) <= 4 * se)
    # sample covariance entries have standard error sqrt((c_ii c_jj + c_ij^2) / n)
    d = np.sqrt(np.diag(cov))
    tol = 4 * np.sqrt((np.outer(d, d) ** 2 + cov**2) / len(z))
    assert np.all(np.abs(np.cov(steps.T) - cov) <= tol)


def test_flat_increments_are_gaussian(flat):
    plan = SimulationPlan(dt=1e-3, T=100.0, delta=1.0, seed=4)
    inc = np.diff(sample_path(flat, plan), axis=0)
    q = (inc**2).sum() / 2.0  # chi2 with 2m degrees of freedom
    dof = inc.size
    assert stats.chi2.sf(q, dof) > 1e-3 and stats.chi2.cdf(q, dof) > 1e-3
    assert stats.kstest(inc.ravel() / math.sqrt(2.0), "norm").pvalue > 1e-3


def test_flat_diffusion_is_identity(flat):
    st = simulate(flat, SimulationPlan(dt=1e-4, T=100.0, delta=1.0, seed=1))
    assert np.all(np.abs(st.D - np.eye(2)) <= 3 * st.se)
    assert st.count == 100


def test_drift_free_spreading(ridge):
    # without drift on a flat surface, mean square displacement is 4t
    from surfdiff.fields import flat_field

    st = simulate(flat_field(1.0), SimulationPlan(dt=1e-3, T=400.0, delta=0.5, seed=2),
                  drift=False)
    lag, msd = st.msd[1:11].T
    np.testing.assert_allclose(msd, 4 * lag, rtol=0.15)


def test_ridge_long_time_tensor():
    a = 0.25
    st = simulate(ridge_field(a, 1.0), SimulationPlan(dt=1e-3, T=2000.0, delta=5.0, seed=3))
    expect = np.diag([1 / ridge_Z(a) ** 2, 1.0])
    assert np.all(np.abs(st.D - expect) <= 3 * st.se + 1e-12)


def test_reproducible_and_block_independent(poisson20, monkeypatch):
    plan = SimulationPlan(dt=1e-3, T=5.0, delta=0.5, x0=(3.0, 4.0), seed=8)
    a = sample_path(poisson20, plan)
    import surfdiff.sde as sde

    monkeypatch.setattr(sde, "_BLOCK", 700)
    b = sample_path(poisson20, plan)
    assert np.array_equal(a, b)
    c = sample_path(poisson20, plan, noise=step_normals(8, 0, plan.num_steps))
    assert np.array_equal(a, c)


def test_time_step_refinement():
    # coupled paths driven by one Brownian path; differences shrink with dt
    f = ridge_field(0.25, 1.0)
    T, dt = 1.0, 1e-3
    diffs = np.zeros((64, 3))
    for seed in range(len(diffs)):
        noise = step_normals(seed, 0, int(round(T / dt)))
        ends = []
        for k in range(4):
            plan = SimulationPlan(dt=dt * 2**k, T=T, delta=T, x0=(0.1, 0.0))
            ends.append(sample_path(f, plan, noise=noise)[-1])
            noise = coarsen_noise(noise)
        diffs[seed] = [np.linalg.norm(ends[k] - ends[k + 1]) for k in range(3)]
    err = diffs.mean(axis=0)
    assert err[0] < err[1] < err[2]
    assert err[0] < 0.6 * err[2]


def test_coarsen_noise_is_standard():
    z = coarsen_noise(step_normals(1, 0, 100_000))
    assert z.shape == (50_000, 2)
    assert abs(z.std() - 1) < 0.01


def test_non_finite_noise_reports_step(ridge):
    plan = SimulationPlan(dt=1e-3, T=0.1, delta=0.01)
    z = np.zeros((plan.num_steps, 2))
    z[37, 0] = np.inf
    with pytest.raises(SimulationError) as info:
        sample_path(ridge, plan, noise=z)
    assert info.value.step == 37


def test_short_noise_rejected(ridge):
    plan = SimulationPlan(dt=1e-3, T=0.1, delta=0.01)
    with pytest.raises(ValueError):
        sample_path(ridge, plan, noise=np.zeros((10, 2)))


def test_increment_estimator():
    rng = np.random.default_rng(0)
    pos = np.cumsum(rng.normal(0, math.sqrt(2 * 0.5), (4001, 2)), axis=0)
    st = increment_stats(pos, 0.5)
    assert np.all(np.abs(st.D - np.eye(2)) <= 4 * st.se)
    assert st.batches.shape == (20, 3)
    with pytest.raises(ValueError):
        increment_stats(pos[:1], 0.5)


def _stats(seed):
    rng = np.random.default_rng(seed)
    return increment_stats(np.cumsum(rng.normal(size=(201, 2)), axis=0), 0.5)


def test_merge_associative_and_commutative():
    a, b, c = _stats(1), _stats(2), _stats(3)
    left = a.merge(b).merge(c)
    right = a.merge(b.merge(c))
    np.testing.assert_allclose(left.D, right.D, rtol=1e-14)
    np.testing.assert_allclose(a.merge(b).D, b.merge(a).D, rtol=1e-14)
    assert left.count == 600 and len(left.batches) == 60
    # pooled estimate is the count-weighted mean
    np.testing.assert_allclose(left.D, (a.D + b.D + c.D) / 3, rtol=1e-14)


def test_merge_rejects_different_delta():
    a = _stats(1)
    b = increment_stats(np.zeros((10, 2)), 1.0)
    with pytest.raises(ValueError):
        a.merge(b)


def test_halving_dt_within_standard_error():
    f = ridge_field(0.25, 1.0)
    plan = SimulationPlan(dt=1e-3, T=400.0, delta=1.0, seed=6)
    z = step_normals(6, 0, plan.num_steps)
    fine = simulate(f, plan, noise=z)
    coarse = simulate(f, SimulationPlan(dt=2e-3, T=400.0, delta=1.0, seed=6),
                      noise=coarsen_noise(z))
    assert np.all(np.abs(fine.D - coarse.D) <= fine.se)
