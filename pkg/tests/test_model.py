import math

import numpy as np
import pytest

from semidict.model import (
    HADAMARD_MIX,
    Dictionary,
    ambiguous_pair,
    dictionary_quality,
    gen_dictionary,
    signed_permutation_distance,
)

# mutual coherence of n x 2n gaussian-normalized dictionaries stays below
# 6/sqrt(n) with huge margin at n=64; a regression here means the column
# normalization or the generator stream broke
COHERENCE_CAP = 6.0 / math.sqrt(64)


@pytest.mark.parametrize("kind", ["gaussian-normalized", "orthonormal-subset", "hadamard-pair-base"])
def test_unit_columns(kind):
    m = 16 if kind != "orthonormal-subset" else 12
    A = gen_dictionary(16, m, kind, seed=3)
    np.testing.assert_allclose(np.linalg.norm(A.columns, axis=0), 1.0, atol=1e-9)
    assert A.n == 16 and A.m == m and A.kind == kind


def test_same_seed_same_dictionary():
    a = gen_dictionary(8, 12, "gaussian-normalized", 9)
    b = gen_dictionary(8, 12, "gaussian-normalized", 9)
    np.testing.assert_array_equal(a.columns, b.columns)
    c = gen_dictionary(8, 12, "gaussian-normalized", 10)
    assert not np.array_equal(a.columns, c.columns)


def test_gram_cached_and_correct():
    A = gen_dictionary(8, 5, "gaussian-normalized", 0)
    G = A.gram
    np.testing.assert_allclose(G, A.columns.T @ A.columns)
    assert A.gram is G  # cached, not recomputed


def test_gaussian_coherence_bound():
    A = gen_dictionary(64, 128, "gaussian-normalized", 1)
    assert A.coherence() < COHERENCE_CAP


def test_orthonormal_subset_is_orthonormal():
    A = gen_dictionary(16, 10, "orthonormal-subset", 2)
    np.testing.assert_allclose(A.columns.T @ A.columns, np.eye(10), atol=1e-12)


def test_orthonormal_subset_requires_m_le_n():
    with pytest.raises(ValueError):
        gen_dictionary(8, 9, "orthonormal-subset", 0)


def test_unknown_kind():
    with pytest.raises(ValueError):
        gen_dictionary(8, 8, "diagonal-magic", 0)


def test_hadamard_pair_base_geometry():
    A = gen_dictionary(9, 7, "hadamard-pair-base", 4)
    cols = A.columns
    np.testing.assert_array_equal(cols[:4, :4], np.eye(4))
    # extra columns live in the complement of e1..e4 exactly
    np.testing.assert_array_equal(cols[:4, 4:], 0.0)
    np.testing.assert_allclose(np.linalg.norm(cols[:, 4:], axis=0), 1.0, atol=1e-9)


def test_hadamard_mix_involution():
    # the mixing matrix is symmetric and its own inverse: applying it twice
    # restores the block, which is what makes the two bases sample-equivalent
    np.testing.assert_allclose(HADAMARD_MIX @ HADAMARD_MIX, np.eye(4), atol=1e-15)
    np.testing.assert_array_equal(HADAMARD_MIX, HADAMARD_MIX.T)
    np.testing.assert_allclose(np.abs(HADAMARD_MIX), 0.5)


def test_dictionary_quality_identity():
    cols = np.eye(6)
    A = Dictionary(n=6, m=6, columns=cols, kind="identity")
    q = dictionary_quality(A, k=2)
    assert q.coherence == 0.0
    assert q.rip_delta == pytest.approx(0.0, abs=1e-12)
    assert q.rip_exact  # C(6,2)=15 subsets enumerated exactly
    assert q.spectral_norm == pytest.approx(1.0)


def test_dictionary_quality_spectral_lower_bound():
    # ||A||_2^2 >= m/n for any unit-column dictionary (trace argument)
    A = gen_dictionary(16, 48, "gaussian-normalized", 5)
    q = dictionary_quality(A, k=3, subset_trials=200, seed=0)
    assert q.spectral_norm >= math.sqrt(48 / 16) - 1e-6
    assert 0.0 < q.rip_delta < 1.5
    assert not q.rip_exact or q.rip_subsets == math.comb(48, 3)


def test_dictionary_quality_sampled_path():
    A = gen_dictionary(24, 40, "gaussian-normalized", 6)
    # comb(40, 6) is far beyond the exact cap -> sampled
    q = dictionary_quality(A, k=6, subset_trials=64, seed=1)
    assert not q.rip_exact
    assert q.rip_subsets == 64


def test_ambiguous_pair_distance_exactly_four():
    A, B, sa, sb = ambiguous_pair(12, 12, 3, seed=0)
    # every |<A_i, B_j>| on the mixed block is 1/2, so the best signed
    # permutation still pays ||a-b||^2 = 2 - 2*(1/2) = 1 per column, 4 total
    d = signed_permutation_distance(A, B)
    assert d == pytest.approx(4.0, abs=1e-9)
    assert d >= 1.0


def test_ambiguous_pair_block_is_hadamard_mix():
    A, B, sa, sb = ambiguous_pair(10, 8, 2, seed=1)
    np.testing.assert_allclose(B.columns[:, :4], A.columns[:, :4] @ HADAMARD_MIX, atol=1e-12)
    # outside the block the dictionaries agree
    np.testing.assert_array_equal(B.columns[:, 4:], A.columns[:, 4:])
    assert sa.kind == sb.kind == "hadamard-pairs"
    assert sa.params["basis"] == "A" and sb.params["basis"] == "B"


def test_signed_permutation_distance_identity_and_perm():
    A = gen_dictionary(8, 6, "gaussian-normalized", 7)
    assert signed_permutation_distance(A, A) == pytest.approx(0.0, abs=1e-12)
    perm = [3, 0, 5, 1, 4, 2]
    signs = np.array([1, -1, 1, 1, -1, -1], dtype=float)
    B = Dictionary(n=8, m=6, columns=A.columns[:, perm] * signs, kind="perm")
    assert signed_permutation_distance(A, B) == pytest.approx(0.0, abs=1e-12)


def test_signed_permutation_distance_orthogonal():
    A = Dictionary(n=4, m=2, columns=np.eye(4)[:, :2], kind="id")
    B = Dictionary(n=4, m=2, columns=np.eye(4)[:, 2:4], kind="id")
    # disjoint supports: no overlap at all, each column pays 2
    assert signed_permutation_distance(A, B) == pytest.approx(4.0)
