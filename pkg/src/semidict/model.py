"""Dictionaries: generation, quality measurement, and the ambiguous pair.

A dictionary is an n x m matrix of unit columns.  Three generators:

* ``gaussian-normalized`` — i.i.d. Gaussian columns scaled to unit norm;
  the generic incoherent overcomplete case.
* ``orthonormal-subset`` — m <= n columns of a Haar-random orthogonal
  matrix; cross terms are exactly zero, which makes it the reference
  geometry for mechanism tests.
* ``hadamard-pair-base`` — columns 1..4 are e1..e4, remaining columns are
  random unit vectors supported on coordinates 5..n, so the first block is
  exactly orthogonal to everything else.

``ambiguous_pair`` builds two dictionaries A != B that generate identical
data under matched two-of-four support models: B's first block mixes A's
through the symmetric involution H (all |entries| = 1/2), and every
two-coordinate +-1 code on one side maps to one on the other.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .streams import stream

DICTIONARY_KINDS = ("gaussian-normalized", "orthonormal-subset", "hadamard-pair-base")

# Symmetric involution mixing the four-column block (H @ H = I, |H_ij| = 1/2).
HADAMARD_MIX = 0.5 * np.array(
    [
        [1.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, -1.0, -1.0],
        [1.0, -1.0, -1.0, 1.0],
        [1.0, -1.0, 1.0, -1.0],
    ]
)


@dataclass(frozen=True)
class Dictionary:
    """Unit-column matrix with cached Gram matrix."""

    n: int
    m: int
    columns: np.ndarray  # (n, m), unit columns
    kind: str = "unknown"
    gram: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=np.float64)
        if cols.shape != (self.n, self.m):
            raise ValueError(f"columns shape {cols.shape} != ({self.n}, {self.m})")
        norms = np.linalg.norm(cols, axis=0)
        if not np.allclose(norms, 1.0, atol=1e-9):
            raise ValueError("dictionary columns must have unit norm")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "gram", cols.T @ cols)

    def coherence(self) -> float:
        off = self.gram - np.eye(self.m)
        return float(np.abs(off).max())


def gen_dictionary(n: int, m: int, kind: str, seed: int) -> Dictionary:
    rng = stream(seed, f"dictionary-{kind}")
    if kind == "gaussian-normalized":
        cols = rng.standard_normal((n, m))
        cols /= np.linalg.norm(cols, axis=0)
    elif kind == "orthonormal-subset":
        if m > n:
            raise ValueError(f"orthonormal-subset needs m <= n, got m={m} > n={n}")
        g = rng.standard_normal((n, n))
        q, r = np.linalg.qr(g)
        q *= np.sign(np.diag(r))  # fix the QR sign ambiguity
        cols = q[:, :m].copy()
    elif kind == "hadamard-pair-base":
        if n < 4 or m < 4:
            raise ValueError(f"hadamard-pair-base needs n >= 4 and m >= 4, got n={n}, m={m}")
        if m > 4 and n < 5:
            raise ValueError("hadamard-pair-base with m > 4 needs n >= 5 for the tail columns")
        cols = np.zeros((n, m))
        cols[:4, :4] = np.eye(4)
        if m > 4:
            tail = rng.standard_normal((n - 4, m - 4))
            tail /= np.linalg.norm(tail, axis=0)
            cols[4:, 4:] = tail
    else:
        raise ValueError(f"unknown dictionary kind {kind!r}; expected one of {DICTIONARY_KINDS}")
    return Dictionary(n=n, m=m, columns=cols, kind=kind)


@dataclass(frozen=True)
class DictionaryQuality:
    coherence: float          # max |<Ai, Aj>|, i != j
    mu_normalized: float      # coherence * sqrt(n)
    spectral_norm: float
    rip_delta: float          # max over tested k-subsets of max |sigma^2 - 1|
    rip_k: int
    rip_subsets: int          # number of subsets actually examined
    rip_exact: bool           # True when all C(m, k) subsets were enumerated

    def as_dict(self) -> dict:
        return {
            "coherence": self.coherence,
            "mu_normalized": self.mu_normalized,
            "spectral_norm": self.spectral_norm,
            "rip_delta": self.rip_delta,
            "rip_k": self.rip_k,
            "rip_subsets": self.rip_subsets,
            "rip_exact": self.rip_exact,
        }


# Enumerate all k-subsets exactly when there are at most this many.
RIP_EXACT_LIMIT = 100_000


def dictionary_quality(
    A: Dictionary, k: int, subset_trials: int = 2000, seed: int = 0
) -> DictionaryQuality:
    """Coherence, spectral norm, and a sampled RIP constant for sparsity k.

    When C(m, k) <= RIP_EXACT_LIMIT every subset is enumerated and the RIP
    estimate is exact; otherwise ``subset_trials`` random subsets are drawn.
    """
    coherence = A.coherence()
    spectral = float(np.linalg.norm(A.columns, 2))
    total = math.comb(A.m, k)
    exact = total <= RIP_EXACT_LIMIT
    if exact:
        subsets = itertools.combinations(range(A.m), k)
        n_sub = total
    else:
        rng = stream(seed, "rip-subsets")
        subsets = (rng.choice(A.m, size=k, replace=False) for _ in range(subset_trials))
        n_sub = subset_trials
    delta = 0.0
    for s in subsets:
        sv = np.linalg.svd(A.columns[:, list(s)], compute_uv=False)
        delta = max(delta, float(np.abs(sv**2 - 1.0).max()))
    return DictionaryQuality(
        coherence=coherence,
        mu_normalized=coherence * math.sqrt(A.n),
        spectral_norm=spectral,
        rip_delta=delta,
        rip_k=k,
        rip_subsets=n_sub,
        rip_exact=exact,
    )


def ambiguous_pair(n: int, m: int, k: int, seed: int):
    """Two dictionaries plus matched support models that generate identical data.

    Returns ``(A, B, support_A, support_B)``.  A's first four columns are
    e1..e4; B's are their HADAMARD_MIX combinations; the remaining m - 4
    columns are shared.  Under the paired support models (exactly two block
    columns with +-1 values, plus k - 2 tail columns), each side's draws are
    the image of the other's under the involution, so the observed sample
    streams coincide.
    """
    from .sampling import SupportModel  # sampling imports model only for types

    A = gen_dictionary(n, m, "hadamard-pair-base", seed)
    cols_b = A.columns.copy()
    cols_b[:, :4] = A.columns[:, :4] @ HADAMARD_MIX
    B = Dictionary(n=n, m=m, columns=cols_b, kind="hadamard-pair-base-mixed")
    support_A = SupportModel(kind="hadamard-pairs", m=m, k=k, params={"basis": "A"})
    support_B = SupportModel(kind="hadamard-pairs", m=m, k=k, params={"basis": "B"})
    return A, B, support_A, support_B


def signed_permutation_distance(A: Dictionary, B: Dictionary) -> float:
    """min over signed permutations pi of sum_i ||A_i - s_i B_pi(i)||^2.

    Exact: the optimal assignment maximizes sum |<A_i, B_j>| over
    permutations (each term's best sign is sign(<A_i, B_j>)), solved with
    the Hungarian method.
    """
    from scipy.optimize import linear_sum_assignment

    if A.m != B.m:
        raise ValueError("dictionaries must have the same number of columns")
    G = np.abs(A.columns.T @ B.columns)
    rows, cols = linear_sum_assignment(-G)
    return float(2.0 * A.m - 2.0 * G[rows, cols].sum())
