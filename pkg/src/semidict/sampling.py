"""Sample generation for the semirandom sparse-coding model.

A batch of samples is ``y = A x`` where x has at most k nonzeros.  A
``beta`` fraction of supports come from a benign random model; the rest come
from a second, adversarially chosen support model (the adversary picks
supports but never touches the value distribution).  Values are i.i.d.
symmetric with magnitudes in [1, C].

Generation is blocked (streams.BLOCK rows per block, one child stream per
block and purpose), so any slice of a batch can be regenerated without
replaying the rest and thread-parallel generation is bit-identical to
sequential.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .streams import BLOCK, block_ranges, stream

SUPPORT_KINDS = (
    "uniform-k-sparse",
    "iid-bernoulli",
    "fixed-blocks",
    "planted-cooccurrence",
    "hadamard-pairs",
)
VALUE_KINDS = ("rademacher", "uniform-spike-slab", "discrete-symmetric")

PROV_RANDOM = 0
PROV_ADVERSARIAL = 1

# The six unordered pairs inside the four-column block, in draw order.
_BLOCK_PAIRS = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
# Leave-one-out triples inside the block.
_BLOCK_TRIPLES = [(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)]


def _hadamard_pair_lut():
    """Map (pair_choice, sign_bits) on basis A to (pair_choice', signs') on basis B.

    A two-nonzero +-1 code c on the block satisfies Hc = c' where c' is again
    a two-nonzero +-1 code (H columns are pairwise orthogonal +-1/2 vectors),
    so the 24 codes biject.  Computed once, exactly, in integers.
    """
    from .model import HADAMARD_MIX

    H2 = (2.0 * HADAMARD_MIX).astype(np.int64)  # +-1 entries, H = H2 / 2
    pair_of = {frozenset(p): i for i, p in enumerate(_BLOCK_PAIRS)}
    lut_pair = np.zeros((6, 4), dtype=np.int64)
    lut_signs = np.zeros((6, 4, 2), dtype=np.int64)
    for pi, (a, b) in enumerate(_BLOCK_PAIRS):
        for bits in range(4):
            s0 = 1 - 2 * (bits & 1)
            s1 = 1 - 2 * ((bits >> 1) & 1)
            c = np.zeros(4, dtype=np.int64)
            c[a], c[b] = s0, s1
            c2 = H2 @ c  # = 2 * H c, entries in {-2, 0, 2}
            nz = np.nonzero(c2)[0]
            assert len(nz) == 2
            lut_pair[pi, bits] = pair_of[frozenset(nz.tolist())]
            pa, pb = _BLOCK_PAIRS[lut_pair[pi, bits]]
            lut_signs[pi, bits, 0] = c2[pa] // 2
            lut_signs[pi, bits, 1] = c2[pb] // 2
    return lut_pair, lut_signs


_LUT_PAIR, _LUT_SIGNS = None, None


def _pair_lut():
    global _LUT_PAIR, _LUT_SIGNS
    if _LUT_PAIR is None:
        _LUT_PAIR, _LUT_SIGNS = _hadamard_pair_lut()
    return _LUT_PAIR, _LUT_SIGNS


@dataclass(frozen=True)
class SupportModel:
    """Distribution over supports of size <= k on [0, m).

    kinds and their params:

    * ``uniform-k-sparse`` — uniform k-subset (tau = 1 negatively correlated).
    * ``iid-bernoulli`` — include each index w.p. ``p`` (default k/m); rows
      exceeding k keep the k smallest selection keys, so |support| <= k holds
      by construction (the law is the conditioned one).
    * ``fixed-blocks`` — ``blocks``: list of index lists; pick a block
      uniformly, then k of its members (or all of them plus uniform fill
      when the block is smaller than k).
    * ``planted-cooccurrence`` — ``pairs``: list of index pairs; one pair is
      planted per sample, the remaining k - 2 indices are uniform outside
      every planted index (planted triples cannot occur).
    * ``hadamard-pairs`` — exactly two of columns {0,1,2,3} with +-1 pinned
      values plus k - 2 tail indices from [4, m); ``basis`` "A" or "B"
      (basis B re-expresses each draw through the block involution);
      ``triple_rate`` upgrades that fraction of samples to three block
      columns (basis A only).
    """

    kind: str
    m: int
    k: int
    tau: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SUPPORT_KINDS:
            raise ValueError(f"unknown support kind {self.kind!r}")
        if not (0 < self.k <= self.m):
            raise ValueError(f"need 0 < k <= m, got k={self.k}, m={self.m}")
        if self.kind == "hadamard-pairs":
            if self.m < 4 or self.k < 2:
                raise ValueError("hadamard-pairs needs m >= 4 and k >= 2")
            if self.k > 2 and self.m - 4 < self.k - 2:
                raise ValueError("hadamard-pairs tail needs m - 4 >= k - 2")
            rate = float(self.params.get("triple_rate", 0.0))
            if rate > 0 and self.params.get("basis", "A") == "B":
                raise ValueError("triple injection is defined on basis A only")
            if rate > 0 and self.k < 3:
                raise ValueError("triple injection needs k >= 3")
        if self.kind == "planted-cooccurrence":
            pairs = self.params.get("pairs")
            if not pairs:
                raise ValueError("planted-cooccurrence needs a nonempty 'pairs' param")
            planted = {i for p in pairs for i in p}
            if self.m - len(planted) < self.k - 2:
                raise ValueError("not enough unplanted indices for the tail")
        if self.kind == "fixed-blocks" and not self.params.get("blocks"):
            raise ValueError("fixed-blocks needs a nonempty 'blocks' param")

    def as_dict(self) -> dict:
        return {"kind": self.kind, "m": self.m, "k": self.k, "tau": self.tau,
                "params": self.params}

    @staticmethod
    def from_dict(d: dict) -> "SupportModel":
        return SupportModel(kind=d["kind"], m=d["m"], k=d["k"],
                            tau=d.get("tau", 1.0), params=dict(d.get("params", {})))

    # -- block draw ---------------------------------------------------------
    # Every kind draws a fixed number of variates per sample, so sample j of
    # block b is a pure function of (seed, purpose, b, j) regardless of the
    # other samples.  Returns (idx, pins): idx is (count, k) int32 with -1
    # padding; pins is (count, k) float64, NaN where the value model decides.

    def draw_block(
        self,
        rng: np.random.Generator,
        count: int,
        rand_supports: np.ndarray | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        # ``rand_supports`` exposes the realized random-part supports to
        # adversarial kinds (the adversary is allowed to see them); the
        # built-in kinds are oblivious and ignore it.
        m, k = self.m, self.k
        pins = np.full((count, k), np.nan)
        if self.kind == "uniform-k-sparse":
            keys = rng.random((count, m))
            idx = np.argpartition(keys, min(k, m - 1), axis=1)[:, :k].astype(np.int32)
            return idx, pins

        if self.kind == "iid-bernoulli":
            p = float(self.params.get("p", k / m))
            keys = rng.random((count, m))
            masked = np.where(keys < p, keys, 2.0)
            idx = np.argpartition(masked, min(k, m - 1), axis=1)[:, :k].astype(np.int32)
            chosen = np.take_along_axis(masked, idx.astype(np.int64), axis=1)
            idx[chosen >= 2.0] = -1
            return idx, pins

        if self.kind == "fixed-blocks":
            blocks = [np.asarray(b, dtype=np.int64) for b in self.params["blocks"]]
            choice = rng.integers(0, len(blocks), count)
            keys = rng.random((count, m))
            idx = np.full((count, k), -1, dtype=np.int32)
            for bi, blk in enumerate(blocks):
                rows = np.nonzero(choice == bi)[0]
                if rows.size == 0:
                    continue
                if len(blk) >= k:
                    sub = keys[rows][:, blk]
                    order = np.argpartition(sub, min(k, len(blk) - 1), axis=1)[:, :k]
                    idx[rows] = blk[order]
                else:
                    fill = k - len(blk)
                    masked = keys[rows].copy()
                    masked[:, blk] = 2.0
                    extra = np.argpartition(masked, fill, axis=1)[:, :fill]
                    idx[rows, : len(blk)] = blk
                    idx[rows, len(blk):] = extra
            return idx, pins

        if self.kind == "planted-cooccurrence":
            pairs = np.asarray(self.params["pairs"], dtype=np.int64)
            planted = np.unique(pairs)
            choice = rng.integers(0, len(pairs), count)
            keys = rng.random((count, m))
            idx = np.full((count, k), -1, dtype=np.int32)
            idx[:, :2] = pairs[choice]
            if k > 2:
                keys[:, planted] = 2.0
                extra = np.argpartition(keys, k - 2, axis=1)[:, : k - 2]
                idx[:, 2:] = extra
            return idx, pins

        # hadamard-pairs
        rate = float(self.params.get("triple_rate", 0.0))
        basis = self.params.get("basis", "A")
        pair_choice = rng.integers(0, 6, count)
        sign_bits = rng.integers(0, 4, count)
        # Triple stream is always drawn so alignment never depends on the rate.
        triple_u = rng.random(count)
        triple_choice = rng.integers(0, 4, count)
        triple_bits = rng.integers(0, 8, count)
        tail_sorted = None
        if k > 2:
            tail_keys = rng.random((count, m - 4))
            tail = np.argpartition(tail_keys, min(k - 2, m - 5), axis=1)[:, : k - 2]
            order = np.argsort(np.take_along_axis(tail_keys, tail, axis=1), axis=1)
            tail_sorted = np.take_along_axis(tail, order, axis=1) + 4

        if basis == "B":
            lut_pair, lut_signs = _pair_lut()
            mapped_signs = lut_signs[pair_choice, sign_bits]
            pair_choice = lut_pair[pair_choice, sign_bits]
            s0, s1 = mapped_signs[:, 0], mapped_signs[:, 1]
        else:
            s0 = 1 - 2 * (sign_bits & 1)
            s1 = 1 - 2 * ((sign_bits >> 1) & 1)

        idx = np.full((count, k), -1, dtype=np.int32)
        block_pairs = np.asarray(_BLOCK_PAIRS, dtype=np.int32)
        idx[:, :2] = block_pairs[pair_choice]
        pins[:, 0] = s0
        pins[:, 1] = s1
        if k > 2 and tail_sorted is not None:
            idx[:, 2:] = tail_sorted

        if rate > 0.0:
            is_triple = triple_u < rate
            rows = np.nonzero(is_triple)[0]
            if rows.size:
                triples = np.asarray(_BLOCK_TRIPLES, dtype=np.int32)
                idx[rows, :3] = triples[triple_choice[rows]]
                bits = triple_bits[rows]
                pins[rows, 0] = 1 - 2 * (bits & 1)
                pins[rows, 1] = 1 - 2 * ((bits >> 1) & 1)
                pins[rows, 2] = 1 - 2 * ((bits >> 2) & 1)
                if k > 3 and tail_sorted is not None:
                    idx[rows, 3:] = tail_sorted[rows, : k - 3]
                elif k == 3:
                    pass  # triple fills the row exactly
        return idx, pins


@dataclass(frozen=True)
class ValueModel:
    """Law of the nonzero coefficients: i.i.d., symmetric, magnitude in [1, C]."""

    kind: str
    C: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in VALUE_KINDS:
            raise ValueError(f"unknown value kind {self.kind!r}")
        if self.C < 1.0:
            raise ValueError(f"need C >= 1, got {self.C}")
        if self.kind == "rademacher" and self.C != 1.0:
            raise ValueError("rademacher values have C = 1")

    def as_dict(self) -> dict:
        return {"kind": self.kind, "C": self.C, "params": self.params}

    @staticmethod
    def from_dict(d: dict) -> "ValueModel":
        return ValueModel(kind=d["kind"], C=d.get("C", 1.0), params=dict(d.get("params", {})))

    def draw_block(self, rng: np.random.Generator, count: int, k: int) -> np.ndarray:
        sign = rng.integers(0, 2, (count, k)) * 2.0 - 1.0
        if self.kind == "rademacher":
            return sign
        if self.kind == "uniform-spike-slab":
            u_spike = rng.random((count, k))
            u_mag = rng.random((count, k))
            mag = np.where(u_spike < 0.5, 1.0, 1.0 + (self.C - 1.0) * u_mag)
            return sign * mag
        # discrete-symmetric: magnitudes 1 or C equiprobable
        u = rng.random((count, k))
        return sign * np.where(u < 0.5, 1.0, self.C)

    def lower_band_mass(self, eta: float) -> float:
        """gamma0: probability that a magnitude lands in [1, 1 + eta]."""
        if self.kind == "rademacher":
            return 1.0
        if self.kind == "uniform-spike-slab":
            if self.C == 1.0:
                return 1.0
            return 0.5 + 0.5 * min(eta, self.C - 1.0) / (self.C - 1.0)
        return 0.5 + 0.5 * (self.C <= 1.0 + eta)


@dataclass(frozen=True)
class SemirandomSpec:
    """Mixture description for one batch: beta random + (1 - beta) adversarial."""

    support_random: SupportModel
    value: ValueModel
    N: int
    seed: int
    beta: float = 1.0
    support_adversarial: SupportModel | None = None

    def __post_init__(self):
        if not (0.0 < self.beta <= 1.0):
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")
        if self.beta < 1.0 and self.support_adversarial is None:
            raise ValueError("beta < 1 requires an adversarial support model")
        if self.support_adversarial is not None:
            if self.support_adversarial.m != self.support_random.m:
                raise ValueError("support models disagree on m")

    @property
    def k(self) -> int:
        k = self.support_random.k
        if self.support_adversarial is not None:
            k = max(k, self.support_adversarial.k)
        return k

    def as_dict(self) -> dict:
        return {
            "support_random": self.support_random.as_dict(),
            "support_adversarial": (
                self.support_adversarial.as_dict() if self.support_adversarial else None
            ),
            "value": self.value.as_dict(),
            "N": self.N,
            "seed": self.seed,
            "beta": self.beta,
        }

    @staticmethod
    def from_dict(d: dict) -> "SemirandomSpec":
        adv = d.get("support_adversarial")
        return SemirandomSpec(
            support_random=SupportModel.from_dict(d["support_random"]),
            support_adversarial=SupportModel.from_dict(adv) if adv else None,
            value=ValueModel.from_dict(d["value"]),
            N=d["N"],
            seed=d["seed"],
            beta=d.get("beta", 1.0),
        )


@dataclass
class SampleBatch:
    """Padded arrays for N samples.

    support rows are sorted ascending with -1 padding at the end; values are
    0 at pads.  provenance is PROV_RANDOM / PROV_ADVERSARIAL per sample.
    """

    samples: np.ndarray                 # (N, n)
    m: int
    support: np.ndarray | None = None   # (N, k) int32
    values: np.ndarray | None = None    # (N, k) float64
    provenance: np.ndarray | None = None  # (N,) uint8

    @property
    def N(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    def indicator(self) -> np.ndarray:
        """Boolean (N, m) support-membership matrix."""
        if self.support is None:
            raise ValueError("batch carries no support labels")
        Z = np.zeros((self.N, self.m), dtype=bool)
        valid = self.support >= 0
        rows = np.repeat(np.arange(self.N), self.support.shape[1])[valid.ravel()]
        Z[rows, self.support[valid]] = True
        return Z

    def subset(self, rows: np.ndarray) -> "SampleBatch":
        return SampleBatch(
            samples=self.samples[rows],
            m=self.m,
            support=None if self.support is None else self.support[rows],
            values=None if self.values is None else self.values[rows],
            provenance=None if self.provenance is None else self.provenance[rows],
        )

    def code(self, i: int) -> "SparseCode":
        if self.support is None:
            raise ValueError("batch carries no support labels")
        valid = self.support[i] >= 0
        return SparseCode(
            indices=tuple(int(j) for j in self.support[i][valid]),
            values=tuple(float(v) for v in self.values[i][valid]),
            m=self.m,
        )


@dataclass(frozen=True)
class SparseCode:
    """One coefficient vector: strictly increasing indices, nonzero values."""

    indices: tuple[int, ...]
    values: tuple[float, ...]
    m: int

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices/values length mismatch")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("indices must be strictly increasing")
        if self.indices and not (0 <= self.indices[0] and self.indices[-1] < self.m):
            raise ValueError("indices out of range")

    def dense(self) -> np.ndarray:
        x = np.zeros(self.m)
        x[list(self.indices)] = self.values
        return x


def _draw_supports(
    model: SupportModel, seed: int, purpose: str, total: int,
    rand_supports: np.ndarray | None = None,
):
    k = model.k
    idx = np.empty((total, k), dtype=np.int32)
    pins = np.empty((total, k))
    for b, s, e in block_ranges(total):
        rng = stream(seed, purpose, b)
        idx[s:e], pins[s:e] = model.draw_block(rng, e - s, rand_supports=rand_supports)
    return idx, pins


def sample_batch(A, spec: SemirandomSpec) -> SampleBatch:
    """Generate spec.N samples y = A x under the semirandom mixture."""
    cols = A.columns if hasattr(A, "columns") else np.asarray(A, dtype=np.float64)
    n, m = cols.shape
    if m != spec.support_random.m:
        raise ValueError(f"dictionary has m={m} but support model has m={spec.support_random.m}")
    N = spec.N
    N_rand = int(round(spec.beta * N))
    N_adv = N - N_rand
    k = spec.k

    def padded(idx, pins, k_to):
        if idx.shape[1] == k_to:
            return idx, pins
        pad_i = np.full((idx.shape[0], k_to - idx.shape[1]), -1, dtype=np.int32)
        pad_p = np.full((idx.shape[0], k_to - idx.shape[1]), np.nan)
        return np.hstack([idx, pad_i]), np.hstack([pins, pad_p])

    idx_r, pins_r = _draw_supports(spec.support_random, spec.seed, "supports-random", N_rand)
    idx_r, pins_r = padded(idx_r, pins_r, k)
    if N_adv > 0:
        idx_a, pins_a = _draw_supports(
            spec.support_adversarial, spec.seed, "supports-adversarial", N_adv,
            rand_supports=idx_r,
        )
        idx_a, pins_a = padded(idx_a, pins_a, k)
        idx = np.vstack([idx_r, idx_a])
        pins = np.vstack([pins_r, pins_a])
    else:
        idx, pins = idx_r, pins_r
    provenance = np.r_[
        np.full(N_rand, PROV_RANDOM, dtype=np.uint8),
        np.full(N_adv, PROV_ADVERSARIAL, dtype=np.uint8),
    ]

    values = np.empty((N, k))
    for b, s, e in block_ranges(N):
        rng = stream(spec.seed, "values", b)
        values[s:e] = spec.value.draw_block(rng, e - s, k)
    pinned = ~np.isnan(pins)
    values[pinned] = pins[pinned]
    values[idx < 0] = 0.0

    # Sort each row ascending, pads last.
    order = np.argsort(np.where(idx < 0, m, idx), axis=1, kind="stable")
    idx = np.take_along_axis(idx, order, axis=1)
    values = np.take_along_axis(values, order, axis=1)

    samples = np.empty((N, n))
    for _b, s, e in block_ranges(N):
        gather = cols[:, np.clip(idx[s:e], 0, m - 1)]  # (n, rows, k); pads carry value 0
        samples[s:e] = np.einsum("nbk,bk->bn", gather, values[s:e])

    perm = stream(spec.seed, "shuffle").permutation(N)
    return SampleBatch(
        samples=samples[perm],
        m=m,
        support=idx[perm],
        values=values[perm],
        provenance=provenance[perm],
    )


def marginal_estimates(batch: SampleBatch, max_order: int = 2) -> dict[int, np.ndarray]:
    """Empirical support marginals up to order 3.

    q[1][i] = P(i in S); q[2][i, j] = P({i, j} <= S) with q[2][i, i] = q[1][i];
    q[3] analogous (repeated indices collapse, e.g. q[3][i, i, j] = q[2][i, j]).
    """
    if batch.support is None:
        raise ValueError("batch carries no support labels")
    if not (1 <= max_order <= 3):
        raise ValueError("max_order must be 1, 2, or 3")
    m, N = batch.m, batch.N
    idx = batch.support.astype(np.int64)
    valid = idx >= 0
    out: dict[int, np.ndarray] = {}
    flat1 = idx[valid]
    out[1] = np.bincount(flat1, minlength=m) / N
    if max_order >= 2:
        counts2 = np.zeros(m * m, dtype=np.int64)
        for _b, s, e in block_ranges(N, 4096):
            I = idx[s:e, :, None]
            J = idx[s:e, None, :]
            ok = (I >= 0) & (J >= 0)
            counts2 += np.bincount((I * m + J)[ok], minlength=m * m)
        out[2] = counts2.reshape(m, m) / N
    if max_order >= 3:
        if m > 256:
            raise ValueError(f"order-3 marginals need m <= 256, got m={m}")
        counts3 = np.zeros(m * m * m, dtype=np.int64)
        for _b, s, e in block_ranges(N, 2048):
            I = idx[s:e, :, None, None]
            J = idx[s:e, None, :, None]
            L = idx[s:e, None, None, :]
            ok = (I >= 0) & (J >= 0) & (L >= 0)
            counts3 += np.bincount(((I * m + J) * m + L)[ok], minlength=m * m * m)
        out[3] = counts3.reshape(m, m, m) / N
    return out


def conditional_inclusion(batch: SampleBatch, i: int, given: tuple[int, ...]) -> float:
    """P(i in S | given <= S), empirically.  Returns NaN if the condition never holds."""
    Z = batch.indicator()
    mask = Z[:, list(given)].all(axis=1) if given else np.ones(batch.N, dtype=bool)
    if not mask.any():
        return float("nan")
    return float(Z[mask, i].mean())


class FreshSource:
    """Anchor/test-batch supplier that draws fresh samples from a model.

    Each request derives an independent child seed from (seed, purpose,
    index), so repeated calls with the same index reproduce the same batch.
    """

    def __init__(self, A, spec: SemirandomSpec, test_size: int, tag: int = 0):
        self.A = A
        self.spec = spec
        self.test_size = test_size
        self.tag = tag

    def _derived(self, purpose: str, index: int, size: int) -> SampleBatch:
        from .streams import child_sequence

        child = int(child_sequence(self.spec.seed, purpose, index).generate_state(1, np.uint64)[0])
        return sample_batch(self.A, dataclasses.replace(self.spec, N=size, seed=child))

    def anchor_batch(self, size: int) -> SampleBatch:
        return self._derived("anchor-pool", self.tag, size)

    def test_batch(self, index: int) -> SampleBatch:
        return self._derived("test-batch", (self.tag << 20) + index, self.test_size)

    def draw_pool(self, iteration: int) -> SampleBatch:
        """Full-size batch for one outer-loop iteration (spec.N samples)."""
        return self._derived("recover-pool", iteration, self.spec.N)
