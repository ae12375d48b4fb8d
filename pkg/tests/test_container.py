import struct

import numpy as np
import pytest

from specjoint import FeatureKind, FeatureMatrix, read_features, write_features


@pytest.mark.parametrize("kind", list(FeatureKind))
def test_roundtrip_all_kinds(tmp_path, rng, kind):
    data = rng.standard_normal((7, 5)).astype(np.float32).astype(np.float64)
    path = tmp_path / "f.sjfm"
    write_features(path, FeatureMatrix(data, kind))
    back = read_features(path)
    assert back.kind == kind
    assert back.n_frames == 7 and back.dims == 5
    assert np.array_equal(back.data, data)


def test_payload_is_f32(tmp_path):
    # Values beyond f32 precision are rounded on write; the read-back value
    # is the f32 representation, not the original f64.
    value = 1.0 + 1e-12
    path = tmp_path / "f.sjfm"
    write_features(path, FeatureMatrix(np.array([[value]]), FeatureKind.LPS))
    back = read_features(path)
    assert back.data[0, 0] != value
    assert back.data[0, 0] == np.float32(value)


def test_header_layout(tmp_path):
    path = tmp_path / "f.sjfm"
    write_features(path, FeatureMatrix(np.zeros((2, 3)), FeatureKind.MFCC))
    blob = path.read_bytes()
    magic, version, kind, n_frames, dims = struct.unpack("<4sIBII", blob[:17])
    assert magic == b"SJFM"
    assert version == 1
    assert kind == int(FeatureKind.MFCC)
    assert (n_frames, dims) == (2, 3)
    assert len(blob) == 17 + 2 * 3 * 4


def test_bad_magic(tmp_path):
    path = tmp_path / "f.sjfm"
    write_features(path, FeatureMatrix(np.zeros((1, 1)), FeatureKind.LPS))
    blob = bytearray(path.read_bytes())
    blob[:4] = b"XXXX"
    path.write_bytes(bytes(blob))
    with pytest.raises(ValueError, match="bad magic"):
        read_features(path)


def test_bad_version(tmp_path):
    path = tmp_path / "f.sjfm"
    write_features(path, FeatureMatrix(np.zeros((1, 1)), FeatureKind.LPS))
    blob = bytearray(path.read_bytes())
    blob[4:8] = struct.pack("<I", 99)
    path.write_bytes(bytes(blob))
    with pytest.raises(ValueError, match="version"):
        read_features(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "f.sjfm"
    write_features(path, FeatureMatrix(np.zeros((4, 4)), FeatureKind.IBM))
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(ValueError, match="payload size"):
        read_features(path)


def test_truncated_header(tmp_path):
    path = tmp_path / "f.sjfm"
    path.write_bytes(b"SJFM\x01")
    with pytest.raises(ValueError, match="truncated"):
        read_features(path)
