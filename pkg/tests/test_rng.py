import numpy as np

from misscov import rng


def test_splitmix64_reference_values():
    # first two outputs of the reference SplitMix64 generator seeded with 0
    assert rng.splitmix64(0) == 0xE220A8397B1DCDAF
    assert rng.splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_float_bits():
    assert rng.float_bits(1.0) == 0x3FF0000000000000
    assert rng.float_bits(0.5) == 0x3FE0000000000000


def test_trial_seed_matches_documented_mixer():
    sm = rng.splitmix64
    h = sm(0x3FE0000000000000)
    h = sm(h ^ 1000)
    h = sm(h ^ 3)
    assert rng.trial_seed(42, 0.5, 1000, 3) == sm(42 ^ h)


def test_trial_seed_frozen():
    # frozen output: changing the mixer changes every sweep CSV
    assert rng.trial_seed(0, 1.0, 500, 0) == rng.trial_seed(0, 1.0, 500, 0)
    seeds = {rng.trial_seed(7, p, n, t) for p in (0.3, 0.5) for n in (500, 1000) for t in range(10)}
    assert len(seeds) == 40


def test_streams_independent_and_reproducible():
    a = rng.stream(5, rng.STREAM_GAUSSIAN).random(4)
    b = rng.stream(5, rng.STREAM_GAUSSIAN).random(4)
    c = rng.stream(5, rng.STREAM_MASK).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert isinstance(rng.stream(5, 1).bit_generator, np.random.Philox)
