import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cycleews import (DetectorConfig, FeatureConfig, TrendFeatureExtractor,
                      circular_std, cycle_stats, detect_jumps, extract_features,
                      jump_phases, label_breakdown, ols_slope, rolling_circ_std,
                      truncate_at_onset, wrap_angle)
from cycleews.features import (assign_extremum, circular_mean, detrend_segment,
                               lag1_autocorrelation, mean_resultant_length,
                               sample_variance)
from cycleews.rng import RunStream, derive_seed, generator
from conftest import make_trajectory

OMEGA = 2.0 * math.pi / 225.0
angles = st.floats(-50.0, 50.0, allow_nan=False)


# --------------------------------------------------------------------------
# wrap_angle
# --------------------------------------------------------------------------

def test_wrap_examples():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3.0 * math.pi) == pytest.approx(math.pi, abs=1e-12)
    assert wrap_angle(5.0 * math.pi / 2.0) == pytest.approx(math.pi / 2.0)
    assert wrap_angle(0.0) == 0.0


@given(angles)
def test_wrap_range_and_equivalence(theta):
    w = wrap_angle(theta)
    assert -math.pi < w <= math.pi
    assert cmath.exp(1j * w) == pytest.approx(cmath.exp(1j * theta), abs=1e-9)


@given(angles)
def test_wrap_idempotent_and_periodic(theta):
    w = wrap_angle(theta)
    assert wrap_angle(w) == pytest.approx(w, abs=1e-12)
    assert wrap_angle(theta + 2.0 * math.pi) == pytest.approx(w, abs=1e-9)


def test_assign_extremum():
    delta, eta = assign_extremum(math.pi / 4.0)
    assert float(delta) == pytest.approx(math.pi / 4.0)
    assert int(eta) == 1
    # jump an eighth period past the minimum: distance pi/4 to pi
    delta, eta = assign_extremum(math.pi + math.pi / 4.0)
    assert float(delta) == pytest.approx(math.pi / 4.0)
    assert int(eta) == -1
    # exact ties resolve toward the extremum behind the jump
    delta, eta = assign_extremum(math.pi / 2.0)
    assert float(delta) == math.pi / 2.0 and int(eta) == 1
    delta, eta = assign_extremum(3.0 * math.pi / 2.0)
    assert float(delta) == math.pi / 2.0 and int(eta) == -1


# --------------------------------------------------------------------------
# detrending
# --------------------------------------------------------------------------

def test_detrend_reproduces_cubic():
    idx = np.linspace(-1.0, 1.0, 400)
    samples = 0.3 - 0.7 * idx + 0.25 * idx ** 2 + 1.1 * idx ** 3
    resid = detrend_segment(samples, FeatureConfig(p_buf=0.0))
    assert np.abs(resid).max() < 1e-9


def test_detrend_buffer_arithmetic():
    fcfg = FeatureConfig(p_buf=0.05)
    samples = np.zeros(100)
    samples[4] = 1e6   # inside the dropped buffer
    samples[95] = 1e6  # inside the dropped buffer
    resid = detrend_segment(samples, fcfg)
    assert len(resid) == 90  # indices 5..94 inclusive
    assert np.abs(resid).max() < 1e-6


def test_detrend_skips_short_segments():
    assert detrend_segment(np.arange(4.0), FeatureConfig(detrend_degree=3)) is None


def test_detrend_noise_variance():
    rng = generator(derive_seed(1, "detrend"))
    idx = np.linspace(0.0, 1.0, 2000)
    samples = 2.0 * idx ** 3 - idx + rng.standard_normal(2000)
    resid = detrend_segment(samples, FeatureConfig(p_buf=0.0))
    assert np.var(resid) == pytest.approx(1.0, rel=0.05)


# --------------------------------------------------------------------------
# variance / AC1 estimators
# --------------------------------------------------------------------------

def test_ac1_alternating_series():
    y = np.tile([1.0, -1.0], 500)
    assert lag1_autocorrelation(y) < -0.99


def test_ac1_iid_noise():
    rng = generator(derive_seed(1, "iid"))
    y = rng.standard_normal(10_000)
    assert abs(lag1_autocorrelation(y)) < 0.03


def test_ac1_ou_oracle():
    # AR(1) recursion with the package noise stream: the sampled process
    # has lag-1 autocorrelation exp(-kappa dt) and variance sigma^2/(2 kappa).
    kappa, sigma, dt, n = 1.0, 0.3, 0.01, 100_000
    stream = RunStream(derive_seed(1, "ou"))
    xi = stream.normals(n + 5000)
    y = np.empty(n + 5000)
    y[0] = 0.0
    coeff = 1.0 - kappa * dt
    scale = sigma * math.sqrt(dt)
    for i in range(1, len(y)):
        y[i] = coeff * y[i - 1] + scale * xi[i]
    y = y[5000:]
    assert lag1_autocorrelation(y) == pytest.approx(math.exp(-kappa * dt), abs=0.02)
    assert sample_variance(y) == pytest.approx(sigma ** 2 / (2.0 * kappa), rel=0.10)


@given(st.lists(st.floats(-100.0, 100.0), min_size=5, max_size=60),
       st.floats(0.1, 7.0), st.floats(-5.0, 5.0))
def test_ac1_affine_invariance(values, a, b):
    y = np.asarray(values)
    if sample_variance(y) < 1e-6:
        return
    base = lag1_autocorrelation(y)
    assert lag1_autocorrelation(a * y + b) == pytest.approx(base, abs=1e-8)
    assert sample_variance(a * y + b) == pytest.approx(a * a * sample_variance(y),
                                                       rel=1e-9)
    assert -1.0 <= base <= 1.0


# --------------------------------------------------------------------------
# OLS slope
# --------------------------------------------------------------------------

def test_ols_slope_examples():
    assert ols_slope([0.0, 1.0, 2.0, 3.0]) == pytest.approx(1.0)
    assert ols_slope([5.0, 5.0, 5.0]) == 0.0
    assert ols_slope([0.0, 2.0, 1.0, 3.0]) == pytest.approx(0.8)
    with pytest.raises(ValueError):
        ols_slope([1.0])


@given(st.lists(st.floats(-50.0, 50.0), min_size=2, max_size=40),
       st.floats(-3.0, 3.0), st.floats(-5.0, 5.0))
def test_ols_slope_equivariance(values, a, b):
    y = np.asarray(values)
    assert ols_slope(a * y + b) == pytest.approx(a * ols_slope(y), abs=1e-7)


# --------------------------------------------------------------------------
# circular statistics
# --------------------------------------------------------------------------

def test_circular_std_examples():
    assert circular_std([0.7, 0.7, 0.7]) == pytest.approx(0.0, abs=1e-7)
    assert circular_std([0.0, math.pi]) == pytest.approx(7.4338443777, abs=1e-6)
    assert circular_std([0.0, math.pi / 2.0]) == pytest.approx(0.8325546, abs=1e-6)


def circ_std_direct(deltas):
    z = sum(cmath.exp(1j * d) for d in deltas) / len(deltas)
    r = min(max(abs(z), 1e-12), 1.0)
    return math.sqrt(-2.0 * math.log(r))


@given(st.lists(angles, min_size=1, max_size=30), st.floats(-10.0, 10.0))
def test_circular_std_invariances(deltas, rotation):
    base = circular_std(deltas)
    assert base >= 0.0
    assert 0.0 <= mean_resultant_length(deltas) <= 1.0 + 1e-12
    rotated = circular_std([d + rotation for d in deltas])
    assert rotated == pytest.approx(base, abs=1e-6)
    assert circular_std(list(reversed(deltas))) == pytest.approx(base, abs=1e-12)
    # compare -2 log R, which stays well conditioned at R -> 1
    assert base ** 2 == pytest.approx(circ_std_direct(deltas) ** 2,
                                      abs=5e-16, rel=1e-9)


def test_rolling_circ_std():
    values = rolling_circ_std(np.full(10, 0.3), 4)
    assert len(values) == 7
    assert np.allclose(values, 0.0, atol=1e-7)
    assert len(rolling_circ_std(np.arange(6, dtype=float) * 0.01, 6)) == 1
    assert len(rolling_circ_std(np.zeros(3), 16)) == 0


def test_rolling_circ_std_recovers_dispersion():
    rng = generator(derive_seed(1, "roll"))
    deltas = wrap_angle(rng.standard_normal(200) * 0.2)
    values = rolling_circ_std(deltas, 16)
    assert len(values) == 200 - 16 + 1
    assert abs(values.mean() - 0.2) < 0.05


# --------------------------------------------------------------------------
# cycle stats and per-run features
# --------------------------------------------------------------------------

def square_wave(dwells, level0=1.0):
    parts, level = [], level0
    for d in dwells:
        parts.append(np.full(d, level))
        level = -level
    return np.concatenate(parts)


def test_cycle_pairing_and_skips():
    det = DetectorConfig(x_up=0.4, x_low=-0.4, n_min=4, breakdown_factor=0.75)
    rng = generator(derive_seed(1, "pair"))
    x = square_wave([40, 40, 40, 40, 40]) + 0.05 * rng.standard_normal(200)
    traj = make_trajectory(x)
    segset = detect_jumps(traj, det)
    assert segset.n_segments == 5
    cycles = cycle_stats(segset, traj, FeatureConfig(p_buf=0.0, detrend_degree=1,
                                                     window_w=2, min_cycles=1,
                                                     min_jumps=1))
    assert [c.cycle_index for c in cycles] == [0, 1]  # trailing segment dropped
    assert all(c.var > 0.0 for c in cycles)
    assert all(-1.0 <= c.ac1 <= 1.0 for c in cycles)


def test_cycle_skips_zero_variance():
    # identically zero segments detrend to exactly zero residuals, where
    # the lag-1 autocorrelation is undefined and the cycle is dropped
    from cycleews import SegmentSet
    traj = make_trajectory(np.zeros(81))
    segset = SegmentSet(boundaries=np.array([0, 40, 80]),
                        artificial=np.array([True, False, True]),
                        wells=np.array([1, -1], dtype=np.int8), dt=1.0)
    cycles = cycle_stats(segset, traj, FeatureConfig(p_buf=0.0, detrend_degree=0,
                                                     window_w=2))
    assert cycles == []
    assert math.isnan(lag1_autocorrelation(np.zeros(50)))


def test_jump_phases_excludes_endpoints(relaxation_run, detector):
    config, traj = relaxation_run
    segset = detect_jumps(traj, detector)
    phases = jump_phases(segset, config.omega)
    assert phases.n_jumps == segset.n_jumps
    assert len(phases.delta) == len(phases.phi) == len(phases.eta)
    assert np.all((phases.phi >= 0.0) & (phases.phi < 2.0 * math.pi))
    assert np.all((phases.delta > -math.pi) & (phases.delta <= math.pi))
    # down jumps associate with forcing minima, up jumps with maxima
    directions = segset.jump_directions()
    for direction, eta in zip(directions, phases.eta):
        assert eta == (-1 if direction == "down" else 1)


def test_deterministic_jump_phase_slope_is_flat(relaxation_run, detector):
    config, traj = relaxation_run
    segset = detect_jumps(traj, detector)
    phases = jump_phases(segset, config.omega)
    post = phases.delta[phases.jump_index * config.dt > 2.0 * config.forcing_period]
    assert abs(ols_slope(post)) < 1e-3


def test_extract_features_requires_minimum_history(detector):
    from cycleews import ConstantAmplitude, SimConfig, simulate
    config = SimConfig(dt=0.01, t_total=225.0 * 2, omega=OMEGA,
                       amplitude_schedule=ConstantAmplitude(1.2), sigma=0.0, x0=1.0)
    traj = simulate(config, 0)
    segset = truncate_at_onset(label_breakdown(detect_jumps(traj, detector),
                                               225.0, detector))
    fv = extract_features(traj, segset, FeatureConfig(), config.omega)
    assert not fv.valid
    assert fv.exclusion_reason == "too_few_cycles"
    assert math.isnan(fv.slope_var)


def test_extract_features_valid_run(relaxation_run, detector):
    config, traj = relaxation_run
    segset = truncate_at_onset(label_breakdown(detect_jumps(traj, detector),
                                               config.forcing_period, detector))
    fv = extract_features(traj, segset, FeatureConfig(), config.omega)
    assert fv.valid and not fv.label
    assert np.isfinite([fv.slope_var, fv.slope_ac1, fv.slope_jump_phase,
                        fv.slope_phase_std]).all()
    ext = TrendFeatureExtractor()
    fv2 = ext.transform(traj, segset, config.omega)
    assert fv2 == fv


def test_decomposition_consistent_with_jump_phases(detector):
    from cycleews import LinearRampAmplitude, SimConfig, simulate
    from cycleews.geometry import jump_phase_decomposition
    config = SimConfig(dt=0.01, t_total=2500.0, omega=OMEGA,
                       amplitude_schedule=LinearRampAmplitude(1.2, 0.25),
                       sigma=0.3, x0=1.0, master_seed=8)
    traj = simulate(config, 42)
    segset = detect_jumps(traj, detector)
    phases = jump_phases(segset, config.omega)
    for t_j, delta in zip(segset.jump_times, phases.delta):
        d_a = 1.2 - (1.2 - 0.25) * t_j / 2500.0
        if d_a <= 2.0 / 3.0:
            continue
        dec = jump_phase_decomposition(t_j, d_a, config.omega)
        assert dec.psi == pytest.approx(float(delta), abs=1e-12)
        assert abs(dec.psi - (dec.theta + dec.phi_delay)) < 1e-12


def test_circular_mean_range():
    assert circular_mean([0.1, -0.1]) == pytest.approx(0.0, abs=1e-12)
    assert abs(circular_mean([math.pi - 0.05, -math.pi + 0.05])) == pytest.approx(
        math.pi, abs=1e-9)
