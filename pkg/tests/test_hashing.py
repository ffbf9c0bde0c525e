import pytest
from hypothesis import given, strategies as st

from cotforge.hashing import SplitMix64, digest_hex, fnv1a64
from oracles import fnv1a64 as ref_fnv


@pytest.mark.parametrize("data, expected", [
    (b"", 0xCBF29CE484222325),
    (b"a", 0xAF63DC4C8601EC8C),
    (b"foobar", 0x85944171F73967E8),
])
def test_fnv_vectors(data, expected):
    assert fnv1a64(data) == expected


@given(st.text(max_size=40))
def test_fnv_matches_oracle(s):
    assert fnv1a64(s) == ref_fnv(s)


def test_splitmix_vectors():
    rng = SplitMix64(0)
    assert [rng.next_u64() for _ in range(3)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


@given(st.integers(0, 2**64 - 1), st.integers(-5, 5), st.integers(0, 10))
def test_randint_in_range(seed, lo, width):
    rng = SplitMix64(seed)
    for _ in range(20):
        assert lo <= rng.randint(lo, lo + width) <= lo + width


def test_randint_covers_range():
    rng = SplitMix64(42)
    assert {rng.randint(2, 4) for _ in range(200)} == {2, 3, 4}


def test_randint_empty_range():
    with pytest.raises(ValueError):
        SplitMix64(1).randint(3, 2)


def test_digest_hex_is_16_chars():
    assert digest_hex(b"abc") == f"{fnv1a64(b'abc'):016x}"
    assert len(digest_hex(b"")) == 16
