import json
import struct

import numpy as np
import pytest

from semidict import dlmio
from semidict.sampling import SampleBatch, SemirandomSpec, SupportModel, ValueModel, sample_batch
from semidict.model import gen_dictionary

MAGIC = b"DLMATRX1"


def test_golden_bytes(tmp_path):
    # The byte layout is the format contract: magic, u64 rows, u64 cols,
    # row-major float64 payload, nothing else.
    p = tmp_path / "m.dlm"
    mat = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    dlmio.write_matrix(p, mat)
    raw = p.read_bytes()
    expect = MAGIC + struct.pack("<QQ", 3, 2) + mat.tobytes(order="C")
    assert raw == expect


def test_round_trip(tmp_path):
    p = tmp_path / "m.dlm"
    mat = np.arange(12, dtype=np.float64).reshape(4, 3) / 7.0
    dlmio.write_matrix(p, mat)
    out = dlmio.read_matrix(p)
    np.testing.assert_array_equal(out, mat)
    assert out.dtype == np.float64


def test_bad_magic(tmp_path):
    p = tmp_path / "m.dlm"
    p.write_bytes(b"NOTMAGIC" + struct.pack("<QQ", 1, 1) + b"\x00" * 8)
    with pytest.raises(ValueError, match="magic"):
        dlmio.read_matrix(p)


def test_truncated(tmp_path):
    p = tmp_path / "m.dlm"
    dlmio.write_matrix(p, np.ones((2, 2)))
    p.write_bytes(p.read_bytes()[:-5])
    with pytest.raises(ValueError, match="truncated"):
        dlmio.read_matrix(p)


def test_trailing_bytes(tmp_path):
    p = tmp_path / "m.dlm"
    dlmio.write_matrix(p, np.ones((2, 2)))
    p.write_bytes(p.read_bytes() + b"junk")
    with pytest.raises(ValueError):
        dlmio.read_matrix(p)


def test_supports_csv_round_trip(tmp_path):
    p = tmp_path / "s.csv"
    support = np.array([[0, 3, -1], [1, 2, 5]], dtype=np.int32)
    values = np.array([[1.0, -1.0, 0.0], [2.0, -0.5, 1.0]])
    dlmio.write_supports_csv(p, support, values)
    s2, v2 = dlmio.read_supports_csv(p, 2, 3)
    np.testing.assert_array_equal(s2, support)
    np.testing.assert_array_equal(v2 [s2 >= 0], values[support >= 0])


def test_supports_csv_repr_precision(tmp_path):
    # repr round-trips doubles exactly; a truncating format would not
    p = tmp_path / "s.csv"
    x = 1.0 / 3.0
    dlmio.write_supports_csv(p, np.array([[2]], dtype=np.int32), np.array([[x]]))
    _, v = dlmio.read_supports_csv(p, 1, 1)
    assert v[0, 0] == x


def test_provenance_csv(tmp_path):
    p = tmp_path / "p.csv"
    prov = np.array([0, 1, 1, 0], dtype=np.int8)
    dlmio.write_provenance_csv(p, prov)
    text = p.read_text()
    assert "random" in text and "adversarial" in text
    np.testing.assert_array_equal(dlmio.read_provenance_csv(p), prov)


def test_manifest_round_trip(tmp_path):
    p = tmp_path / "manifest.json"
    man = {"n": 4, "m": 8, "k": 2, "beta": 0.5, "seed": 3, "files": {"samples": "samples.dlm"}}
    dlmio.write_manifest(p, man)
    assert dlmio.read_manifest(p) == man
    # keys sorted on disk for diff-stable artifacts
    assert json.loads(p.read_text()) == man
    assert p.read_text() == json.dumps(man, indent=2, sort_keys=True) + "\n"


def test_batch_dir_round_trip(tmp_path):
    A = gen_dictionary(8, 6, "gaussian-normalized", 0)
    spec = SemirandomSpec(
        support_random=SupportModel(kind="uniform-k-sparse", m=6, k=2),
        value=ValueModel(kind="rademacher"), N=50, seed=1,
    )
    batch = sample_batch(A, spec)
    man = {"n": 8, "m": 6, "k": 2, "beta": 1.0, "N": 50, "seed": 1,
           "value_model": spec.value.as_dict(),
           "support_models": {"random": spec.support_random.as_dict(), "adversarial": None}}
    written = dlmio.write_batch_dir(tmp_path / "b", batch, man, dictionary=A.columns)
    assert set(written["files"]) >= {"samples", "supports", "provenance"}

    batch2, man2, D = dlmio.read_batch_dir(tmp_path / "b")
    np.testing.assert_array_equal(batch2.samples, batch.samples)
    np.testing.assert_array_equal(batch2.support, batch.support)
    np.testing.assert_array_equal(batch2.provenance, batch.provenance)
    np.testing.assert_array_equal(D, A.columns)
    assert man2["N"] == 50 and man2["m"] == 6


def test_batch_dir_without_dictionary(tmp_path):
    batch = SampleBatch(samples=np.ones((3, 4)), m=5)
    dlmio.write_batch_dir(tmp_path / "b", batch, {"N": 3, "m": 5})
    b2, man, D = dlmio.read_batch_dir(tmp_path / "b")
    assert D is None
    assert b2.support is None
    np.testing.assert_array_equal(b2.samples, batch.samples)
