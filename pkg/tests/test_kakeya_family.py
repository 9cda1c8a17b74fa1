from fractions import Fraction

import numpy as np
import pytest

from errors import UsageError
from models import LeakStrategy
from processors import kakeya_family as kakeya
from processors.kakeya_family import BitString, KakeyaProfile


def test_prefix_values():
    b = BitString.parse("1010")
    assert kakeya.prefix_value(b, 1) == Fraction(1, 8)
    assert kakeya.prefix_value(b, 4) == Fraction(5, 32)
    assert kakeya.prefix_value(b, 9) == Fraction(5, 32)
    zero = BitString.parse("0000")
    assert all(kakeya.prefix_value(zero, ell) == 0 for ell in range(6))


def test_bitstring_helpers():
    assert str(BitString.from_int(5, 4)) == "0101"
    assert BitString.parse("1100").common_prefix(BitString.parse("1110")) == 2
    assert len(kakeya.all_bitstrings(3)) == 8
    with pytest.raises(UsageError):
        BitString.parse("102")
    with pytest.raises(UsageError):
        kakeya.prefix_value(BitString.parse("1"), -1)


def test_phi_hand_value():
    assert kakeya.phi(1, BitString.parse("10"), 1.0, 1.0) == pytest.approx(0.34375)
    with pytest.raises(UsageError):
        kakeya.phi(3, BitString.parse("10"), 1.0, 1.0)


def test_potential_vanishes_at_origin():
    for text in ("0000", "1011"):
        b = BitString.parse(text)
        assert np.all(kakeya.KakeyaPotential(b).phi_all(0.0, 0.0) == 0)
        assert kakeya.v_tilde(b, 0.0, 0.0) == 0
        assert kakeya.v_full(b, 0.0, 0.0) == 0


def test_zero_on_the_direction_ray():
    b = BitString.parse("0110")
    slope = float(kakeya.prefix_value(b, b.N))
    x = np.linspace(0.0, 2.0, 50)
    assert np.all(kakeya.v_tilde(b, x, slope * x) == 0)


def test_oracle_counts_queries():
    oracle = kakeya.KakeyaPotential(BitString.parse("01")).as_oracle(record=True)
    value, gradient = oracle.evaluate(np.zeros(2))
    assert value == 0
    assert gradient.shape == (2,)
    assert oracle.query_count == 1


def test_distance_to_zero_set():
    b = BitString.parse("0000")
    assert kakeya.distance_to_zero_set(b, 1.0, 0.0) == 0
    assert kakeya.distance_to_zero_set(b, -1.0, 0.0) == pytest.approx(1.0)


def test_omega_sectors_are_disjoint(rng):
    strings = kakeya.all_bitstrings(3)
    x = rng.uniform(0, 1, 20_000)
    y = rng.uniform(-0.1, 0.35, 20_000) * x
    hits = sum(kakeya.in_omega(b, x, y).astype(int) for b in strings)
    assert hits.max() <= 1


def test_min_distance_estimate_recovers_string():
    for b in kakeya.all_bitstrings(4):
        slope = float(kakeya.prefix_value(b, 4))
        assert kakeya.min_distance_estimate((1.0, slope), kakeya.slope_candidates(slope, 4)) == b
    with pytest.raises(UsageError):
        kakeya.min_distance_estimate((1.0, 0.0), [])


def test_bit_leak_capped_response():
    response = kakeya.bit_leak_oracle(BitString.parse("1010"), 1.0, 3.0)
    assert response.revealed == 4
    assert response.capped
    assert response.prefix == Fraction(5, 32)


def test_bit_leak_on_ray_reveals_everything():
    b = BitString.parse("1010")
    response = kakeya.bit_leak_oracle(b, 1.0, 5 / 32)
    assert response.revealed == b.N
    assert not response.floored


def test_bit_leak_floor_and_no_information():
    b = BitString.parse("1010")
    far = kakeya.bit_leak_oracle(b, 1.0, 1e6)
    assert far.floored
    assert far.revealed == 1
    assert far.prefix == Fraction(1, 8)
    near = kakeya.bit_leak_oracle(b, 1e-6, 0.0)
    assert not near.informative
    assert near.revealed == 0


def test_leakage_zero_queries(rng):
    report = kakeya.leakage_experiment(4, 0, LeakStrategy.RANDOM, 10, rng)
    assert report.avg_bits_per_query == 0.0


def test_leakage_bisection_identifies(rng):
    report = kakeya.leakage_experiment(5, 7, LeakStrategy.BISECTION, 50, rng)
    assert report.identified_fraction == 1.0
    assert sum(report.histogram) == 50 * 7


def test_leakage_random_is_bounded(rng):
    report = kakeya.leakage_experiment(4, 10, LeakStrategy.RANDOM, 50, rng)
    assert 0 <= report.avg_bits_per_query <= 4
    assert sum(report.histogram) == 500
    assert len(report.per_query_mean) == 10


def test_induction_check_not_applicable():
    b = BitString.parse("0110")
    assert kakeya.induction_check(b, 2, 2, 0.5, 0.5) is None
    assert kakeya.induction_check(b, 0, 1, 0.5, 0.5) is None


def test_structure_has_no_violations(rng):
    for text in ("000000", "101101"):
        counts = kakeya.check_structure(BitString.parse(text), rng, 2000)
        assert counts == {"convexity": 0, "flat_near_zero_set": 0, "growth": 0, "induction": 0}


@pytest.mark.parametrize("N", [2, 3])
def test_shared_prefix_coincidence(rng, N):
    counts = kakeya.check_coincidence(N, rng, 500)
    assert counts["pairs_points"] > 0
    assert counts["mismatches"] == 0


def test_render_zero_sets():
    svg = kakeya.render_zero_sets(2, ["00", "11"], radii=[0.25, 0.5], resolution=40)
    assert svg.startswith("<?xml")
    assert 'id="b00"' in svg and 'id="b11"' in svg
    assert svg.count("<circle") == 2
    with pytest.raises(UsageError):
        kakeya.render_zero_sets(7, ["0000000"], radii=[0.5])
    with pytest.raises(UsageError):
        kakeya.render_zero_sets(3, ["00"], radii=[0.5])


def test_omega_mass_requires_reduced_profile():
    with pytest.raises(UsageError):
        kakeya.omega_mass(BitString.parse("01"), KakeyaProfile.full())
