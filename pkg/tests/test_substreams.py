import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from teleportsim.substreams import (Substream, column_bit, column_random, column_u64,
                                    party_id, stream_key)

seeds = st.integers(0, 2**64 - 1)
trials = st.integers(0, 2**40)
parties = st.sampled_from(["source", "charlie", "device", "session", "x"])


@given(seeds, st.lists(trials, min_size=1, max_size=20), parties, st.integers(0, 5))
def test_column_draws_match_scalar_draws(seed, indices, party, draw):
    idx = np.array(indices, dtype=np.uint64)
    u64 = column_u64(seed, idx, party, draw)
    rnd = column_random(seed, idx, party, draw)
    bit = column_bit(seed, idx, party, draw)
    for i, t in enumerate(indices):
        s = Substream(seed, t, party)
        for _ in range(draw):
            s.next_u64()
        value = s.next_u64()
        assert int(u64[i]) == value
        assert rnd[i] == (value >> 11) * 2.0 ** -53
        assert int(bit[i]) == value >> 63


@given(seeds, trials, parties)
def test_substream_replays_identically(seed, t, party):
    a, b = Substream(seed, t, party), Substream(seed, t, party)
    assert [a.next_u64() for _ in range(4)] == [b.next_u64() for _ in range(4)]


@given(seeds, trials, parties)
def test_random_in_unit_interval_and_integers_in_range(seed, t, party):
    s = Substream(seed, t, party)
    for _ in range(8):
        assert 0.0 <= s.random() < 1.0
        assert 0 <= s.integers(7) < 7


def test_keys_differ_across_parties_trials_and_seeds():
    keys = {stream_key(s, t, p) for s in (0, 1) for t in (0, 1, 2)
            for p in ("source", "charlie", "device")}
    assert len(keys) == 18
    assert party_id("charlie") != party_id("device")


def test_generator_ignores_draw_counter():
    s = Substream(42, 3, "charlie")
    first = s.generator().integers(0, 1 << 30, 5)
    s.next_u64()
    assert (s.generator().integers(0, 1 << 30, 5) == first).all()


def test_bits_are_balanced():
    bits = column_bit(42, np.arange(100_000, dtype=np.uint64), "source")
    assert abs(bits.mean() - 0.5) < 3 * 0.5 / np.sqrt(100_000)
