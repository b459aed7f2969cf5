"""Outer recovery loop: membership detection, LP reweighting, subsampling.

Each iteration draws a fresh pool T, detects which already-recovered columns
each sample uses (|<y, w_i>| >= 1/2), solves an LP for per-sample weights
in [0,1] that keep every recovered column's weighted frequency at or below
k(1+lambda)/m while retaining at least beta |T| total mass, subsamples by
those weights, and hands the result to the candidate generator.  The LP is
what starves already-found columns so an undiscovered one becomes the most
frequent — the mechanism the semirandom adversary is otherwise free to break
by flooding a subset.

Every LP solution is re-audited here against the raw constraints,
independently of the solver, and (when provenance is available) the
all-random-samples indicator is checked as a feasibility witness first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .candidates import TupleStrategy, recover_columns
from .coltest import TestParams
from .sampling import PROV_RANDOM, SampleBatch
from .streams import child_sequence, stream


def detect_support_membership(y: np.ndarray, recovered) -> set[int] | np.ndarray:
    """Indices i with |<y, w_i>| >= 1/2 (w_i the recovered unit vectors).

    For a single sample returns a set; for a stacked (N, n) array returns
    the boolean (N, R) membership matrix.  Depends on y only.
    """
    y = np.asarray(y, dtype=np.float64)
    if len(recovered) == 0:
        return set() if y.ndim == 1 else np.zeros((y.shape[0], 0), dtype=bool)
    W = np.column_stack([np.asarray(w, dtype=np.float64) for w in recovered])
    if y.ndim == 1:
        return set(np.nonzero(np.abs(y @ W) >= 0.5)[0].tolist())
    return np.abs(y @ W) >= 0.5


@dataclass
class LPResult:
    status: str                      # "optimal" | "infeasible" | "error"
    weights: np.ndarray | None
    objective: float | None
    message: str = ""

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "message": self.message,
            "n_weights": None if self.weights is None else int(self.weights.size),
        }


def solve_reweight_lp(
    membership: np.ndarray, beta: float, k: int, m: int, lam: float | None = None
) -> LPResult:
    """Maximize sum(w) over w in [0,1]^N subject to the reweighting constraints.

    membership: boolean (N, R) matrix, column i flagging samples that use
    recovered column i.  Constraints: sum(w) >= beta N, and for each i,
    sum_{j in V(i)} w_j <= (k (1 + lambda) / m) sum_j w_j.
    With R = 0 the maximizer is w = 1 (no caps), returned without a solver
    call.  lambda defaults to 1/m^2.
    """
    membership = np.asarray(membership, dtype=bool)
    N, R = membership.shape
    if lam is None:
        lam = 1.0 / (m * m)
    if beta * N < 1.0:
        raise ValueError(f"need beta*N >= 1, got {beta * N}")
    if R == 0:
        return LPResult(status="optimal", weights=np.ones(N), objective=float(N),
                        message="no caps: w = 1 optimal")

    cap = k * (1.0 + lam) / m
    # Variables x = [w_1..w_N, s] with s = sum(w) tied by one equality row;
    # keeping s explicit makes the cap rows sparse (|V(i)| + 1 nonzeros).
    c = np.zeros(N + 1)
    c[-1] = -1.0  # maximize s
    A_eq = sp.hstack([sp.csr_matrix(np.ones((1, N))), sp.csr_matrix([[-1.0]])], format="csr")
    A_ub = sp.hstack(
        [sp.csr_matrix(membership.T.astype(np.float64)),
         sp.csr_matrix(np.full((R, 1), -cap))],
        format="csr",
    )
    bounds = [(0.0, 1.0)] * N + [(beta * N, float(N))]
    res = linprog(
        c, A_ub=A_ub, b_ub=np.zeros(R), A_eq=A_eq, b_eq=np.zeros(1),
        bounds=bounds, method="highs",
    )
    if res.status == 0:
        w = np.clip(res.x[:N], 0.0, 1.0)
        return LPResult(status="optimal", weights=w, objective=float(w.sum()),
                        message=res.message)
    if res.status == 2:
        return LPResult(status="infeasible", weights=None, objective=None, message=res.message)
    return LPResult(status="error", weights=None, objective=None, message=res.message)


def check_lp_solution(
    weights: np.ndarray,
    membership: np.ndarray,
    beta: float,
    k: int,
    m: int,
    lam: float | None = None,
    rtol: float = 1e-7,
) -> dict:
    """Audit a weighting against the raw constraints, independent of any solver."""
    w = np.asarray(weights, dtype=np.float64)
    M = np.asarray(membership, dtype=bool)
    N = w.size
    if lam is None:
        lam = 1.0 / (m * m)
    total = float(w.sum())
    bounds_ok = bool((w >= -rtol).all() and (w <= 1.0 + rtol).all())
    mass_needed = beta * N
    mass_ok = bool(total >= mass_needed * (1.0 - rtol))
    cap = k * (1.0 + lam) / m
    col_mass = w @ M  # (R,)
    cap_limit = cap * total
    caps_ok = bool((col_mass <= cap_limit * (1.0 + rtol) + rtol).all()) if M.shape[1] else True
    max_excess = float((col_mass - cap_limit).max()) if M.shape[1] else 0.0
    return {
        "feasible": bounds_ok and mass_ok and caps_ok,
        "bounds_ok": bounds_ok,
        "mass_ok": mass_ok,
        "caps_ok": caps_ok,
        "total_weight": total,
        "mass_required": mass_needed,
        "max_cap_excess": max_excess,
        "cap_limit": float(cap_limit),
    }


def feasible_witness_check(
    membership: np.ndarray,
    provenance: np.ndarray,
    beta: float,
    k: int,
    m: int,
    lam: float | None = None,
    rtol: float = 1e-7,
) -> dict:
    """Check the indicator of random-provenance samples as an LP witness."""
    witness = (np.asarray(provenance) == PROV_RANDOM).astype(np.float64)
    out = check_lp_solution(witness, membership, beta, k, m, lam=lam, rtol=rtol)
    out["witness_mass"] = float(witness.sum())
    return out


def weighted_subsample(batch: SampleBatch, weights, size: int, seed: int) -> SampleBatch:
    """`size` distinct samples by categorical draws proportional to weights.

    Draws are made in chunks from one seeded stream; duplicates are rejected
    in draw order and drawing continues until `size` distinct rows are kept.
    That chunked rejection order is the deterministic algorithm (fixed seed
    => fixed output).  Requires size <= number of strictly positive weights.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.min() < 0 or not np.isfinite(w).all():
        raise ValueError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise ValueError("weights sum to zero")
    positive = int((w > 0).sum())
    if size > positive:
        raise ValueError(f"size {size} exceeds {positive} strictly positive weights")
    p = w / total
    rng = stream(seed, "weighted-subsample")
    chosen: list[int] = []
    seen = np.zeros(batch.N, dtype=bool)
    while len(chosen) < size:
        draw = rng.choice(batch.N, size=max(4096, 2 * (size - len(chosen))), p=p)
        for j in draw:
            if not seen[j]:
                seen[j] = True
                chosen.append(int(j))
                if len(chosen) == size:
                    break
    return batch.subset(np.asarray(chosen, dtype=np.int64))


class PoolSource:
    """Anchor/test-batch supplier backed by one weighted pool.

    anchor_batch and test_batch draw disjoint-purpose weighted subsamples
    from the same (batch, weights) pair; all draws derive from `seed`.
    """

    def __init__(self, batch: SampleBatch, weights, test_size: int, seed: int):
        self.batch = batch
        self.weights = np.asarray(weights, dtype=np.float64)
        self.test_size = test_size
        self.seed = seed
        self._positive = int((self.weights > 0).sum())

    def _derived_seed(self, purpose: str, index: int) -> int:
        return int(child_sequence(self.seed, purpose, index).generate_state(1, np.uint64)[0])

    def anchor_batch(self, size: int) -> SampleBatch:
        return weighted_subsample(
            self.batch, self.weights, min(size, self._positive),
            self._derived_seed("anchor-pool", 0),
        )

    def test_batch(self, index: int) -> SampleBatch:
        return weighted_subsample(
            self.batch, self.weights, min(self.test_size, self._positive),
            self._derived_seed("test-batch", index),
        )


@dataclass
class RecoverConfig:
    params: TestParams
    strategy: TupleStrategy
    t1_size: int = 100_000
    tv_size: int = 50_000
    beta: float = 1.0
    lam: float | None = None        # None -> 1/m^2
    use_lp: bool = True
    iteration_cap: int = 20
    stale_limit: int = 3
    dedup_angle: float = 0.1
    use_rad: bool | None = None     # None -> auto from the value model kind
    match_tolerance: float = 0.05
    seed: int = 0
    reuse_test_batch: bool = False

    def as_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "strategy": self.strategy.as_dict(),
            "t1_size": self.t1_size,
            "tv_size": self.tv_size,
            "beta": self.beta,
            "lam": self.lam,
            "use_lp": self.use_lp,
            "iteration_cap": self.iteration_cap,
            "stale_limit": self.stale_limit,
            "dedup_angle": self.dedup_angle,
            "use_rad": self.use_rad,
            "match_tolerance": self.match_tolerance,
            "seed": self.seed,
            "reuse_test_batch": self.reuse_test_batch,
        }

    @staticmethod
    def from_dict(d: dict) -> "RecoverConfig":
        d = dict(d)
        d["params"] = TestParams.from_dict(d["params"])
        d["strategy"] = TupleStrategy.from_dict(d["strategy"])
        return RecoverConfig(**d)


@dataclass
class RecoveryResult:
    recovered: list[np.ndarray]
    matching: object | None          # MatchReport when a true dictionary was given
    iterations: int
    lp_statuses: list[str]
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "recovered": [[float(x) for x in v] for v in self.recovered],
            "matching": None if self.matching is None else self.matching.as_dict(),
            "iterations": self.iterations,
            "lp_statuses": self.lp_statuses,
            "diagnostics": self.diagnostics,
        }


def recover_dict(source, config: RecoverConfig, true_dictionary=None) -> RecoveryResult:
    """Iterate draw -> membership -> LP -> subsample -> candidates until done.

    ``source`` must provide ``draw_pool(iteration) -> SampleBatch`` and a
    ``spec`` attribute (for k and the value-model kind).  Stops at the
    iteration cap, when m columns are found, after ``stale_limit``
    iterations without a new column, or on LP infeasibility (partial result
    with diagnostic).
    """
    spec = source.spec
    k = spec.k
    use_rad = config.use_rad
    if use_rad is None:
        use_rad = spec.value.kind == "rademacher"

    wstar: list[np.ndarray] = []
    lp_statuses: list[str] = []
    per_iteration: list[dict] = []
    totals = {"tuples_evaluated": 0, "accepted": 0, "rejected": 0,
              "zero_statistic": 0, "duplicates": 0}
    witness_reports: list[dict] = []
    audit_reports: list[dict] = []
    halted = ""
    stale = 0
    m = None
    it = 0

    for it in range(config.iteration_cap):
        T = source.draw_pool(it)
        m = T.m
        membership = detect_support_membership(T.samples, wstar)
        if config.use_lp:
            if T.provenance is not None:
                witness_reports.append(
                    feasible_witness_check(membership, T.provenance, config.beta, k, m,
                                           lam=config.lam)
                )
            lp = solve_reweight_lp(membership, config.beta, k, m, lam=config.lam)
            lp_statuses.append(lp.status)
            if lp.status != "optimal":
                halted = f"lp-{lp.status}"
                per_iteration.append({"iteration": it, "lp_status": lp.status,
                                      "tuples": 0, "new_columns": 0,
                                      "wstar_size": len(wstar)})
                break
            weights = lp.weights
            audit_reports.append(
                check_lp_solution(weights, membership, config.beta, k, m, lam=config.lam)
            )
        else:
            lp_statuses.append("ablated")
            weights = np.ones(T.N)

        iter_seed = int(child_sequence(config.seed, "iteration", it).generate_state(1, np.uint64)[0])
        positive = int((weights > 0).sum())
        pool_source = PoolSource(T, weights, config.tv_size, iter_seed)
        T1 = weighted_subsample(T, weights, min(config.t1_size, positive), iter_seed)
        cs = recover_columns(
            pool_source, T1, config.strategy, config.params,
            dedup_angle=config.dedup_angle, use_rad=use_rad, existing=wstar,
            reuse_test_batch=config.reuse_test_batch,
        )
        wstar.extend(cs.vectors)
        totals["tuples_evaluated"] += cs.diagnostics["tuples_proposed"]
        totals["accepted"] += cs.diagnostics["accepted"]
        totals["rejected"] += cs.diagnostics["rejected"]
        totals["zero_statistic"] += cs.diagnostics["zero_statistic"]
        totals["duplicates"] += cs.diagnostics["duplicates"]
        per_iteration.append({
            "iteration": it,
            "lp_status": lp_statuses[-1],
            "tuples": cs.diagnostics["tuples_proposed"],
            "new_columns": len(cs.vectors),
            "wstar_size": len(wstar),
        })
        stale = stale + 1 if not cs.vectors else 0
        if len(wstar) >= T.m:
            halted = "all-columns"
            break
        if stale >= config.stale_limit:
            halted = "stale"
            break
    else:
        halted = "iteration-cap"

    matching = None
    if true_dictionary is not None:
        from .matching import match_columns

        matching = match_columns(true_dictionary, wstar, tolerance=config.match_tolerance)

    diagnostics = dict(
        totals,
        per_iteration=per_iteration,
        witness=witness_reports,
        lp_audit=audit_reports,
        halted=halted,
        use_rad=use_rad,
    )
    return RecoveryResult(
        recovered=wstar,
        matching=matching,
        iterations=len(per_iteration),
        lp_statuses=lp_statuses,
        diagnostics=diagnostics,
    )
