import numpy as np
import pytest
from scipy import stats

from blisscam.errors import ConfigError, ContractError
from blisscam.roi import Roi
from blisscam.sampler import (
    CELLS_PER_PIXEL,
    CalibrationLut,
    calibrate,
    make_bias_array,
    popcounts,
    power_up,
    sample_gate,
    uniform_bias_array,
)


def test_extreme_bias_all_ones():
    biases = uniform_bias_array(8, 8, p=1 - 1e-12)
    words = power_up(biases, seed=0)
    assert np.all(words == 0b1111111111)


def test_extreme_bias_all_zeros():
    biases = uniform_bias_array(8, 8, p=1e-12)
    assert np.all(power_up(biases, seed=0) == 0)


def test_popcount_distribution_binomial_chi2():
    biases = uniform_bias_array(640, 400, p=0.5)
    counts = popcounts(power_up(biases, seed=3))
    observed = np.bincount(counts.reshape(-1), minlength=11)
    expected = stats.binom.pmf(np.arange(11), CELLS_PER_PIXEL, 0.5) * counts.size
    chi2 = ((observed - expected) ** 2 / expected).sum()
    # 11 bins -> 10 dof; accept at the 1% level
    assert chi2 < stats.chi2.ppf(0.99, df=10)


def test_repeated_power_up_passes_runs_test():
    biases = uniform_bias_array(1, 1, p=0.5)
    seeds = np.random.SeedSequence(99).generate_state(2000)
    bits = np.array([power_up(biases, int(s))[0, 0] & 1 for s in seeds])
    n1, n0 = int(bits.sum()), int((1 - bits).sum())
    runs = 1 + int(np.count_nonzero(np.diff(bits)))
    mean = 2 * n1 * n0 / (n1 + n0) + 1
    var = (mean - 1) * (mean - 2) / (n1 + n0 - 1)
    z = (runs - mean) / np.sqrt(var)
    assert abs(z) < 2.576  # 1% two-sided


def test_power_up_deterministic_and_seed_sensitive():
    biases = make_bias_array(32, 24, seed=1)
    a = power_up(biases, seed=5)
    b = power_up(biases, seed=5)
    c = power_up(biases, seed=6)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# --- calibration ---------------------------------------------------------------


def test_calibrate_uniform_half_targets():
    biases = uniform_bias_array(200, 150, p=0.5)
    lut = calibrate(biases, n_cycles=150, seed=0)
    # exact binomial oracle: P(s > 6) = P(s >= 7) = 176/1024
    assert lut.rate(6) == pytest.approx(176 / 1024, abs=0.005)
    assert lut.rate(5) == pytest.approx(386 / 1024, abs=0.005)
    assert lut.theta_for_rate(0.20) == 6


def test_calibrate_rate_zero_at_theta_10_and_above():
    biases = uniform_bias_array(64, 64, p=0.5)
    lut = calibrate(biases, n_cycles=100, seed=1)
    for theta in range(10, 16):
        assert lut.rate(theta) == 0.0
    assert lut.theta_for_rate(0.0) == 10  # smallest theta achieving rate 0


def test_target_full_rate_picks_theta_zero():
    biases = uniform_bias_array(64, 64, p=0.5)
    lut = calibrate(biases, n_cycles=100, seed=1)
    assert lut.theta_for_rate(1.0) == 0
    assert lut.rate(0) == pytest.approx(1 - 2.0**-10, abs=0.002)


def test_lut_rates_non_increasing():
    biases = make_bias_array(128, 96, seed=3)
    lut = calibrate(biases, n_cycles=120, seed=4)
    assert all(a >= b for a, b in zip(lut.rates, lut.rates[1:]))


def test_lut_tie_breaks_to_smaller_theta():
    rates = tuple([1.0, 0.8, 0.6, 0.3, 0.1] + [0.0] * 11)
    lut = CalibrationLut(rates=rates)
    # target 0.45 is equidistant from 0.6 (theta 2) and 0.3 (theta 3)
    assert lut.theta_for_rate(0.45) == 2


def test_lut_serialization_roundtrip(tmp_path):
    biases = make_bias_array(64, 48, seed=5)
    lut = calibrate(biases, n_cycles=110, seed=6)
    path = tmp_path / "lut.txt"
    lut.save(path)
    text = path.read_text()
    assert len(text.strip().splitlines()) == 16
    assert CalibrationLut.load(path).rates == pytest.approx(lut.rates, abs=1e-9)


def test_calibrate_requires_100_cycles():
    with pytest.raises(ContractError, match="100"):
        calibrate(uniform_bias_array(8, 8), n_cycles=10, seed=0)


def test_lut_must_have_16_entries():
    with pytest.raises(ConfigError, match="16"):
        CalibrationLut(rates=(1.0, 0.0))


# --- gating ---------------------------------------------------------------------


def test_theta_10_empty_mask():
    biases = uniform_bias_array(64, 48, p=0.5)
    words = power_up(biases, seed=7)
    mask = sample_gate(words, theta=10, roi=Roi(0, 0, 63, 47))
    assert mask.sampled == 0


def test_theta_0_samples_pixels_with_any_set_bit():
    biases = uniform_bias_array(64, 48, p=0.5)
    words = power_up(biases, seed=8)
    mask = sample_gate(words, theta=0, roi=Roi(0, 0, 63, 47))
    assert np.array_equal(mask.bits, popcounts(words) >= 1)


def test_no_samples_outside_roi():
    biases = uniform_bias_array(64, 48, p=0.5)
    words = power_up(biases, seed=9)
    roi = Roi(8, 8, 22, 32)
    mask = sample_gate(words, theta=4, roi=roi)
    outside = mask.bits.copy()
    outside[roi.y1 : roi.y2 + 1, roi.x1 : roi.x2 + 1] = False
    assert not outside.any()
    inside = mask.bits[roi.y1 : roi.y2 + 1, roi.x1 : roi.x2 + 1]
    assert inside.any()


def test_theta_must_be_4_bit():
    words = power_up(uniform_bias_array(4, 4), seed=0)
    with pytest.raises(ContractError, match="4-bit"):
        sample_gate(words, theta=16, roi=Roi(0, 0, 3, 3))


def test_masks_differ_across_power_up_seeds():
    biases = make_bias_array(64, 48, seed=1)
    roi = Roi(0, 0, 63, 47)
    m1 = sample_gate(power_up(biases, seed=1), 6, roi)
    m2 = sample_gate(power_up(biases, seed=2), 6, roi)
    assert not np.array_equal(m1.bits, m2.bits)


def test_achieved_rates_track_lut_within_2pp():
    biases = make_bias_array(640, 400, seed=2)
    lut = calibrate(biases, n_cycles=120, seed=3)
    roi = Roi(0, 0, 639, 399)
    words = power_up(biases, seed=11)
    for target in (0.05, 0.10, 0.20, 0.50):
        theta = lut.theta_for_rate(target)
        mask = sample_gate(words, theta, roi, target_rate=target)
        assert abs(mask.achieved_rate - lut.rate(theta)) < 0.02


def test_adjacent_pixel_correlation_tiny():
    biases = make_bias_array(640, 400, seed=4)
    lut = calibrate(biases, n_cycles=100, seed=5)
    words = power_up(biases, seed=12)
    mask = sample_gate(words, lut.theta_for_rate(0.2), Roi(0, 0, 639, 399))
    flat = mask.bits.astype(np.float64)
    left = flat[:, :-1].reshape(-1)[:100_000]
    right = flat[:, 1:].reshape(-1)[:100_000]
    r = np.corrcoef(left, right)[0, 1]
    assert abs(r) < 0.02
