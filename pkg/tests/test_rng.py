import numpy as np
from hypothesis import given, strategies as st

from seedbank.rng import Purpose, Stream, as_stream, normals, stream_key, stream_keys, uniforms

seeds = st.integers(min_value=0, max_value=2**64 - 1)


@given(seeds, st.integers(0, 10_000), st.integers(0, 50))
def test_vector_keys_match_scalar(seed, start, n):
    keys = stream_keys(seed, Purpose.DUAL, n, start)
    assert [int(k) for k in keys] == [stream_key(seed, Purpose.DUAL, start + i) for i in range(n)]


@given(seeds, st.integers(0, 1000))
def test_stream_matches_counter_access(seed, rep):
    s = Stream(seed, Purpose.FORWARD, rep)
    seq = [s.uniform() for _ in range(8)]
    direct = uniforms(np.uint64(stream_key(seed, Purpose.FORWARD, rep)), np.arange(8, dtype=np.uint64))
    assert seq == direct.tolist()


@given(seeds)
def test_uniforms_in_open_interval(seed):
    u = Stream(seed).uniforms(256)
    assert np.all(u > 0.0) and np.all(u < 1.0)


def test_purposes_give_distinct_streams():
    a = Stream(5, Purpose.FORWARD).uniforms(4)
    b = Stream(5, Purpose.DUAL).uniforms(4)
    assert not np.array_equal(a, b)


def test_normal_moments():
    key = np.uint64(stream_key(1, Purpose.FORWARD, 0))
    z = normals(key, np.arange(200_000, dtype=np.uint64))
    assert abs(z.mean()) < 3 / np.sqrt(z.size)
    assert abs(z.var() - 1.0) < 3 * np.sqrt(2 / z.size)


def test_choice_skips_zero_weights():
    s = Stream(3)
    picks = {s.choice([0.0, 1.0, 0.0, 2.0]) for _ in range(200)}
    assert picks == {1, 3}


def test_as_stream_accepts_seed_and_stream():
    s = Stream(9, Purpose.WF)
    assert as_stream(s) is s
    assert as_stream(9, Purpose.WF).uniform() == Stream(9, Purpose.WF).uniform()
    assert as_stream(None).seed == 0
