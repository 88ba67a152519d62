import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from duotok import tokens
from duotok.errors import BadMagicError, DataError, FormatError, TruncatedError
from duotok.simvq import Route
from duotok.tokens import TrackTokens


def track(route, K, rate, idx):
    return TrackTokens(route, K, rate, np.asarray(idx))


def pair(K=16, rate=25.0, n=10, seed=0):
    rng = np.random.default_rng(seed)
    return tokens.align(track(Route.VOCAL, K, rate, rng.integers(0, K, n)),
                        track(Route.ACCOMP, K, rate, rng.integers(0, K, n)))


@pytest.mark.parametrize("rate, sizes, kbps", [
    (75, [1024] * 8, 6.00),
    (25, [32768, 32768], 0.75),
    (40, [4096], 0.48),
    (25, [16384, 16384], 0.70),
    (50, [1024] * 8, 4.00),
])
def test_bitrate_examples(rate, sizes, kbps):
    assert round(tokens.bitrate_kbps(rate, sizes), 2) == kbps


def test_bitrate_rejects_tiny_codebook():
    with pytest.raises(ValueError):
        tokens.bitrate_kbps(25, [1])


def test_track_validation():
    with pytest.raises(DataError):
        track(Route.VOCAL, 8, 25.0, [0, 8])
    with pytest.raises(DataError):
        track(Route.VOCAL, 8, 0.0, [0])
    with pytest.raises(DataError):
        track(Route.VOCAL, 1, 25.0, [0])


def test_align_errors_name_lengths():
    v = track(Route.VOCAL, 8, 25.0, np.zeros(100, int))
    with pytest.raises(DataError, match="100.*99"):
        tokens.align(v, track(Route.ACCOMP, 8, 25.0, np.zeros(99, int)))
    with pytest.raises(DataError, match="rate"):
        tokens.align(v, track(Route.ACCOMP, 8, 50.0, np.zeros(100, int)))
    with pytest.raises(DataError):
        tokens.align(v, track(Route.VOCAL, 8, 25.0, np.zeros(100, int)))
    assert len(tokens.align(v, track(Route.ACCOMP, 8, 25.0, np.zeros(100, int)))) == 100


def test_empty_sequence_roundtrip():
    seq = pair(n=0)
    assert tokens.deserialize(tokens.serialize(seq)) == seq


def test_header_layout():
    seq = pair(K=300, rate=25.0, n=3)
    raw = tokens.serialize(seq)
    assert raw[:4] == b"DTOK"
    assert int.from_bytes(raw[4:6], "little") == 1
    assert raw[6] == 2
    assert raw[7] == 0
    assert int.from_bytes(raw[8:12], "little") == 300
    assert len(raw) == 7 + 2 * (1 + 4 + 4 + 8 + 3 * 4)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), K=st.integers(2, 2**20), n=st.integers(0, 300),
       rate=st.sampled_from([12.5, 25.0, 50.0, 75.0, 100.0]))
def test_roundtrip_property(seed, K, n, rate):
    seq = pair(K, rate, n, seed)
    assert tokens.deserialize(tokens.serialize(seq)) == seq


def test_corruption_rejected():
    raw = tokens.serialize(pair())
    with pytest.raises(BadMagicError):
        tokens.deserialize(b"DTOX" + raw[4:])
    with pytest.raises(TruncatedError):
        tokens.deserialize(raw[:-1])
    with pytest.raises(FormatError):
        tokens.deserialize(raw + b"\x00")
    bad = bytearray(raw)
    bad[-4:] = (10**6).to_bytes(4, "little")
    with pytest.raises(FormatError, match="K"):
        tokens.deserialize(bytes(bad))
    assert issubclass(FormatError, DataError)


def test_file_roundtrip_and_csv(tmp_path):
    seq = tokens.align(track(Route.VOCAL, 8, 25.0, [1, 2, 3]), track(Route.ACCOMP, 8, 25.0, [7, 0, 5]))
    p = tmp_path / "song.dtok"
    tokens.save(p, seq)
    back = tokens.load(p)
    assert back == seq and back.name == "song"
    assert tokens.to_csv(seq) == "frame,vocal_idx,accomp_idx\n0,1,7\n1,2,0\n2,3,5\n"


def test_single_track_file_is_not_a_pair(tmp_path):
    p = tmp_path / "v.dtok"
    tokens.save(p, [track(Route.VOCAL, 8, 25.0, [1, 2])])
    assert len(tokens.tracks_from_bytes(p.read_bytes())) == 1
    with pytest.raises(FormatError):
        tokens.load(p)


def test_reference_table_is_self_consistent():
    names = [c.name for c in tokens.REFERENCE_CODECS]
    assert len(names) == 8 and names[-1] == "Duo-Tok"
    duo = tokens.REFERENCE_CODECS[-1]
    assert round(tokens.bitrate_kbps(duo.token_rate, duo.codebook_sizes), 2) == duo.bitrate_kbps
