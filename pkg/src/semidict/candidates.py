"""Candidate directions from sample tuples, and the propose/test/refine loop.

The statistic: given 2L - 1 anchor samples u_1..u_{2L-1} and a batch T1,

    v = (1/|T1|) sum_{y in T1} <u_1, y> ... <u_{2L-1}, y> * y

concentrates toward a dictionary column when the anchors share one.  Products
of many inner products span a huge dynamic range, so the batch average uses
blocked compensated (Kahan) summation rather than a naive accumulator.

recover_columns evaluates the statistic for every proposed tuple over a
shared T1, then band-tests each normalized candidate on a fresh test batch,
refines, and de-duplicates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .coltest import TestOutcome, TestParams, test_column, test_column_rad
from .sampling import SampleBatch
from .streams import stream

STRATEGY_KINDS = ("exhaustive", "oracle-planted", "correlation-greedy", "random")


@dataclass(frozen=True)
class TupleStrategy:
    """How anchor tuples are proposed from the anchor pool T0.

    * ``exhaustive`` — all ordered (2L-1)-tuples of pool indices; only legal
      when |T0|^(2L-1) <= budget.
    * ``oracle-planted`` — uses support labels: tuples of pool samples
      sharing a coordinate with identical value sign and otherwise pairwise
      disjoint supports.  Diagnostic upper-bound strategy; needs ground
      truth.  Disjointness matters: two anchors sharing a *second*
      coordinate j bias the statistic toward column j by a relative
      (k-1)/(m-1) per extra shared pair, which does not shrink with |T1|.
    * ``correlation-greedy`` — seeds a tuple at each pool sample, greedily
      adds the sample maximizing the minimum absolute correlation with the
      tuple so far, keeps tuples whose min pairwise |corr| >=
      ``min_correlation``; de-duplicates by index set.
    * ``random`` — uniform index tuples without replacement.

    ``budget`` caps how many tuples are emitted; ``anchor_pool_size`` is the
    |T0| that recover_columns requests from its source.
    """

    kind: str
    L: int
    budget: int
    anchor_pool_size: int = 512
    min_correlation: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.anchor_pool_size < 1:
            raise ValueError("anchor_pool_size must be >= 1")

    @property
    def tuple_size(self) -> int:
        return 2 * self.L - 1

    def as_dict(self) -> dict:
        return {"kind": self.kind, "L": self.L, "budget": self.budget,
                "anchor_pool_size": self.anchor_pool_size,
                "min_correlation": self.min_correlation, "seed": self.seed}

    @staticmethod
    def from_dict(d: dict) -> "TupleStrategy":
        return TupleStrategy(**d)


def tuple_statistic(anchors: np.ndarray, batch: SampleBatch, chunk: int = 8192) -> np.ndarray:
    """v = mean over the batch of prod_i <u_i, y> * y, compensated summation.

    anchors: (t, n) stacked anchor samples (t is typically odd, 2L - 1).
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    n = anchors.shape[1]
    if batch.n != n:
        raise ValueError("anchor/batch dimension mismatch")
    acc = np.zeros(n)
    comp = np.zeros(n)
    for s in range(0, batch.N, chunk):
        Y = batch.samples[s : s + chunk]
        w = (Y @ anchors.T).prod(axis=1)  # (rows,)
        part = Y.T @ w
        # Kahan step: add the chunk total, carrying the rounding remainder.
        y = part - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
    return acc / batch.N


def propose_tuples(
    pool: SampleBatch, strategy: TupleStrategy, seed: int | None = None
) -> list[tuple[int, ...]]:
    """Tuples of pool row indices according to the strategy (size 2L - 1 each)."""
    t = strategy.tuple_size
    P = pool.N
    if P < t:
        return []

    if strategy.kind == "exhaustive":
        total = P**t
        if total > strategy.budget:
            raise ValueError(f"exhaustive needs |T0|^(2L-1) = {total} <= budget {strategy.budget}")
        return [tuple(c) for c in itertools.product(range(P), repeat=t)]

    if strategy.kind == "oracle-planted":
        if pool.support is None:
            raise ValueError("oracle-planted needs support labels on the pool")
        out: list[tuple[int, ...]] = []
        idx, vals = pool.support, pool.values
        for coord in range(pool.m):
            hit = idx == coord  # at most one hit per row: supports are sets
            rows = np.nonzero(hit.any(axis=1))[0]
            if rows.size < t:
                continue
            sgn = np.sign(vals[hit])  # row-major, aligned with rows
            for s in (1.0, -1.0):
                remaining = [int(r) for r in rows[sgn == s]]
                others = {
                    r: frozenset(int(c) for c in idx[r] if c >= 0 and c != coord)
                    for r in remaining
                }
                # Greedily pack groups whose supports meet only at `coord`.
                while len(remaining) >= t:
                    used: set[int] = set()
                    group: list[int] = []
                    rest: list[int] = []
                    for r in remaining:
                        if len(group) < t and not (others[r] & used):
                            group.append(r)
                            used |= others[r]
                        else:
                            rest.append(r)
                    if len(group) < t:
                        break
                    out.append(tuple(group))
                    if len(out) >= strategy.budget:
                        return out
                    remaining = rest
        return out

    if strategy.kind == "correlation-greedy":
        Y = pool.samples
        norms = np.linalg.norm(Y, axis=1)
        ok = norms > 1e-12
        U = np.zeros_like(Y)
        U[ok] = Y[ok] / norms[ok, None]
        G = np.abs(U @ U.T)
        np.fill_diagonal(G, 0.0)
        seen: set[frozenset[int]] = set()
        out = []
        for s0 in range(P):
            if not ok[s0]:
                continue
            members = [s0]
            minwise = G[s0].copy()
            minwise[s0] = -1.0
            while len(members) < t:
                nxt = int(np.argmax(minwise))
                if minwise[nxt] < strategy.min_correlation:
                    break
                members.append(nxt)
                minwise = np.minimum(minwise, G[nxt])
                minwise[members] = -1.0
            if len(members) < t:
                continue
            key = frozenset(members)
            if key in seen:
                continue
            seen.add(key)
            out.append(tuple(members))
            if len(out) >= strategy.budget:
                break
        return out

    # random
    rng = stream(strategy.seed if seed is None else seed, "tuple-proposals")
    return [
        tuple(int(i) for i in rng.choice(P, size=t, replace=False))
        for _ in range(strategy.budget)
    ]


@dataclass
class CandidateSet:
    vectors: list[np.ndarray]
    sources: list[tuple[int, ...]]       # anchor tuples that produced them
    accepted: list[TestOutcome]          # aligned with vectors
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "vectors": [[float(x) for x in v] for v in self.vectors],
            "sources": [list(s) for s in self.sources],
            "accepted": [o.as_dict() for o in self.accepted],
            "diagnostics": self.diagnostics,
        }


def _is_duplicate(v: np.ndarray, kept: list[np.ndarray], angle: float) -> bool:
    return any(
        min(np.linalg.norm(v - w), np.linalg.norm(v + w)) < angle for w in kept
    )


def recover_columns(
    source,
    T1: SampleBatch,
    strategy: TupleStrategy,
    params: TestParams,
    dedup_angle: float = 0.1,
    use_rad: bool = False,
    existing: list[np.ndarray] | None = None,
    reuse_test_batch: bool = False,
) -> CandidateSet:
    """Propose tuples from T0, form statistics over T1, test, refine, dedup.

    ``source`` supplies ``anchor_batch(size)`` (the T0 pool) and
    ``test_batch(index)`` (a fresh test batch per candidate unless
    ``reuse_test_batch``, which shares one with a diagnostics warning).
    ``existing`` seeds the de-duplication list; those directions are never
    re-emitted.  Candidates with statistic norm below 1e-12 are skipped.
    """
    pool = source.anchor_batch(strategy.anchor_pool_size)
    tuples = propose_tuples(pool, strategy)
    tester = test_column_rad if use_rad else test_column
    kept: list[np.ndarray] = list(existing or [])
    out = CandidateSet(vectors=[], sources=[], accepted=[])
    n_zero = n_dup = n_reject = 0
    shared = source.test_batch(0) if reuse_test_batch else None
    for j, tup in enumerate(tuples):
        v = tuple_statistic(pool.samples[list(tup)], T1)
        nrm = np.linalg.norm(v)
        if nrm < 1e-12:
            n_zero += 1
            continue
        z = v / nrm
        T_v = shared if shared is not None else source.test_batch(j)
        outcome = tester(z, T_v, params)
        if not outcome.accepted:
            n_reject += 1
            continue
        cand = outcome.refined if outcome.refined is not None else z
        if _is_duplicate(cand, kept, dedup_angle):
            n_dup += 1
            continue
        kept.append(cand)
        out.vectors.append(cand)
        out.sources.append(tup)
        out.accepted.append(outcome)
    out.diagnostics = {
        "tuples_proposed": len(tuples),
        "rejected": n_reject,
        "zero_statistic": n_zero,
        "duplicates": n_dup,
        "accepted": len(out.vectors),
        "anchor_pool": strategy.anchor_pool_size,
        "reused_test_batch": bool(reuse_test_batch),
    }
    return out
