"""Concentration lab: flattened tensor norms, the imbalance factor rho,
tail experiments for multilinear forms of sparse symmetric vectors,
random-subtensor Frobenius mass, and the weighted sparse-sum bound.

A coefficient tensor T of order d over [m]^d is held either dense (entry
count capped at 10^7) or rank-structured as sum_i w_i M_i^{(x) d} given a
weight vector w and a factor matrix M (column i tensored with itself d
times).  The quantity of interest everywhere is

    f(z_1, ..., z_d) = sum_{j_1..j_d} T_{j_1..j_d} prod_l z_l[j_l]

for independent sparse vectors z_l (support model x value model), whose tail
is governed by ||T||_F, the flattened norms, and how rarely coordinates fire.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .sampling import SupportModel, ValueModel
from .streams import block_ranges, stream

DENSE_ENTRY_CAP = 10**7


@dataclass(frozen=True)
class CoeffTensor:
    """Order-d coefficient tensor, dense and/or rank-structured.

    rank form: (weights r-vector, factors (m, r) matrix) meaning
    sum_i weights[i] * factors[:, i]^{tensor d}.
    """

    d: int
    m: int
    dense: np.ndarray | None = None
    rank_weights: np.ndarray | None = None
    rank_factors: np.ndarray | None = None

    def __post_init__(self):
        if self.dense is None and self.rank_weights is None:
            raise ValueError("tensor needs a dense or rank-structured form")
        if self.dense is not None:
            if self.dense.shape != (self.m,) * self.d:
                raise ValueError(f"dense shape {self.dense.shape} != {(self.m,) * self.d}")
            if self.dense.size > DENSE_ENTRY_CAP:
                raise ValueError(f"dense tensor exceeds {DENSE_ENTRY_CAP} entries")
        if self.rank_weights is not None:
            if self.rank_factors is None or self.rank_factors.shape[0] != self.m:
                raise ValueError("rank form needs factors of shape (m, r)")
            if self.rank_weights.shape[0] != self.rank_factors.shape[1]:
                raise ValueError("rank weights/factors mismatch")

    def densified(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        if self.m**self.d > DENSE_ENTRY_CAP:
            raise ValueError("tensor too large to densify")
        out = np.zeros((self.m,) * self.d)
        for wi, col in zip(self.rank_weights, self.rank_factors.T):
            term = col
            for _ in range(self.d - 1):
                term = np.multiply.outer(term, col)
            out += wi * term
        return out

    def frobenius(self) -> float:
        return flattened_norm(self, frozenset())


def tensor_all_ones(d: int, m: int) -> CoeffTensor:
    return CoeffTensor(d=d, m=m, rank_weights=np.ones(1), rank_factors=np.ones((m, 1)))


def tensor_identity_slice(d: int, m: int) -> CoeffTensor:
    """Superdiagonal tensor: 1 at (i, i, ..., i), else 0."""
    return CoeffTensor(d=d, m=m, rank_weights=np.ones(m), rank_factors=np.eye(m))


def tensor_gram_rank(d: int, m: int, n0: int, seed: int) -> CoeffTensor:
    """Rank-structured tensor whose factors are Gram columns of a random frame."""
    rng = stream(seed, "gram-tensor")
    A = rng.standard_normal((n0, m))
    A /= np.linalg.norm(A, axis=0)
    G = A.T @ A
    return CoeffTensor(d=d, m=m, rank_weights=np.full(m, 1.0 / m), rank_factors=G)


def flattened_norm(T: CoeffTensor, gamma) -> float:
    """||T||_{Gamma, inf}: max row l2 norm of the (Gamma, complement) flattening.

    Gamma = {} gives the Frobenius norm (single row); Gamma = all modes gives
    the max absolute entry (rows are single entries).
    """
    gamma = frozenset(gamma)
    if not gamma <= set(range(T.d)):
        raise ValueError(f"gamma {set(gamma)} not a subset of modes 0..{T.d - 1}")
    if T.dense is None and T.m**T.d <= DENSE_ENTRY_CAP:
        dense = T.densified()
    elif T.dense is not None:
        dense = T.dense
    else:
        return _flattened_norm_rank(T, gamma)
    order = sorted(gamma) + sorted(set(range(T.d)) - gamma)
    flat = np.transpose(dense, order).reshape(T.m ** len(gamma), -1)
    return float(np.sqrt((flat**2).sum(axis=1)).max())


def _flattened_norm_rank(T: CoeffTensor, gamma: frozenset) -> float:
    """Rank-form flattened norm without densifying.

    Row norms^2 of the flattening are quadratic in the rank weights:
    ||row_J||^2 = sum_{i,i'} w_i w_i' prod_{l in Gamma} M[J_l,i] M[J_l,i']
                  * (M_i . M_i')^{d - |Gamma|}.
    Evaluated by iterating over Gamma index tuples (feasible when
    m^|Gamma| is moderate; |Gamma| <= 2 in practice for big m).
    """
    w, M = T.rank_weights, T.rank_factors
    g = len(gamma)
    K = (M.T @ M) ** (T.d - g)  # (r, r)
    if g == 0:
        val = float(w @ K @ w)
        return math.sqrt(max(val, 0.0))
    if T.m**g > DENSE_ENTRY_CAP:
        raise ValueError("flattening too large for the rank-form evaluation")
    best = 0.0
    # row index J runs over [m]^g; P[J, (i,i')] = prod_l M[J_l, i] M[J_l, i']
    WK = np.outer(w, w) * K  # (r, r)
    for J in itertools.product(range(T.m), repeat=g):
        prod = np.ones_like(WK)
        for j in J:
            prod = prod * np.outer(M[j], M[j])
        best = max(best, float((prod * WK).sum()))
    return math.sqrt(max(best, 0.0))


def imbalance_rho(T: CoeffTensor, p: float, tau: float) -> float:
    """rho = sum over all subsets Gamma of ||T||_{Gamma,inf}^2 / B^2 * (tau p)^{-|Gamma|}."""
    if not (0.0 < p <= 1.0):
        raise ValueError("p must be in (0, 1]")
    if tau < 1.0:
        raise ValueError("tau must be >= 1")
    B = T.frobenius()
    if B <= 0.0:
        raise ValueError("zero tensor has no imbalance factor")
    total = 0.0
    for size in range(T.d + 1):
        for gamma in itertools.combinations(range(T.d), size):
            nrm = flattened_norm(T, frozenset(gamma))
            total += (nrm**2 / B**2) * (tau * p) ** (-size)
    return total


def eval_multilinear(T: CoeffTensor, zetas: list[tuple[np.ndarray, np.ndarray]]) -> float:
    """f(zeta_1..zeta_d) for sparse vectors given as (indices, values) pairs.

    Cost is the product of the support sizes (dense form) or r * sum of
    support sizes (rank form); a zeta with empty support gives 0.
    """
    if len(zetas) != T.d:
        raise ValueError(f"need {T.d} vectors, got {len(zetas)}")
    if any(len(ix) == 0 for ix, _ in zetas):
        return 0.0
    if T.rank_weights is not None:
        prod = np.ones_like(T.rank_weights)
        for ix, val in zetas:
            prod = prod * (val @ T.rank_factors[ix])  # (r,)
        return float(T.rank_weights @ prod)
    sub = T.dense[np.ix_(*[ix for ix, _ in zetas])]
    for _ix, val in zetas:
        sub = np.tensordot(val, sub, axes=(0, 0))
    return float(sub)


def _draw_sparse(support: SupportModel, value: ValueModel, count: int, seed: int, tag: str):
    """count sparse vectors as (idx (count,k), vals (count,k)) with -1 pads."""
    idx = np.empty((count, support.k), dtype=np.int32)
    vals = np.empty((count, support.k))
    for b, s, e in block_ranges(count):
        rng_s = stream(seed, f"{tag}-supp", b)
        rng_v = stream(seed, f"{tag}-vals", b)
        ix, pins = support.draw_block(rng_s, e - s)
        v = value.draw_block(rng_v, e - s, support.k)
        pinned = ~np.isnan(pins)
        v[pinned] = pins[pinned]
        v[ix < 0] = 0.0
        idx[s:e], vals[s:e] = ix, v
    return idx, vals


def nu_report(site: str, eta: float, d: int) -> dict:
    """Reporting-only formula for the log-power factor at each call site.

    Sites use slightly different powers; the values are recorded per site
    and never compared across sites.
    """
    formulas = {
        "tail": ("log(2/eta)^(d/2)", math.log(2.0 / eta) ** (d / 2.0)),
        "subtensor": ("log(1/eta)^d", math.log(1.0 / eta) ** d),
    }
    name, value = formulas[site]
    return {"site": site, "formula": name, "value": value}


@dataclass
class ExperimentReport:
    name: str
    empirical: float
    budget: float
    threshold: float
    passed: bool
    trials: int
    params: dict

    def as_dict(self) -> dict:
        return {
            "name": self.name, "empirical": self.empirical, "budget": self.budget,
            "threshold": self.threshold, "passed": bool(self.passed),
            "trials": self.trials, "params": self.params,
        }


MC_SLACK = 3.0  # Monte-Carlo slack multiplier on every tail budget


def tail_experiment(
    T: CoeffTensor,
    support: SupportModel,
    value: ValueModel,
    eta: float,
    trials: int,
    seed: int,
    tau: float | None = None,
    p: float | None = None,
) -> ExperimentReport:
    """Exceed rate of |f| over the degree-d threshold; pass iff <= 3 eta.

    Threshold: (C^2 log(2/eta))^{d/2} * min(sqrt(rho) log(2/eta)^{d/2},
    1/sqrt(eta)) * (tau p)^{d/2} * ||T||_F.
    """
    if trials < 10.0 / eta:
        raise ValueError(f"need trials >= 10/eta = {10.0 / eta}")
    d, m = T.d, T.m
    tau = support.tau if tau is None else tau
    p = support.k / support.m if p is None else p
    rho = imbalance_rho(T, p, tau)
    B = T.frobenius()
    C = value.C
    log2e = math.log(2.0 / eta)
    threshold = (
        (C * C * log2e) ** (d / 2.0)
        * min(math.sqrt(rho) * log2e ** (d / 2.0), 1.0 / math.sqrt(eta))
        * (tau * p) ** (d / 2.0)
        * B
    )
    idxs, valss = [], []
    for mode in range(d):
        ix, vv = _draw_sparse(support, value, trials, seed, f"tail-mode{mode}")
        idxs.append(ix)
        valss.append(vv)
    if T.rank_weights is not None:
        r = T.rank_weights.size
        prod = np.ones((trials, r))
        for mode in range(d):
            safe = np.clip(idxs[mode], 0, m - 1).astype(np.int64)
            gathered = T.rank_factors[safe, :]  # (trials, k, r); pads have value 0
            prod *= np.einsum("tk,tkr->tr", valss[mode], gathered)
        f = prod @ T.rank_weights
    else:
        f = np.empty(trials)
        for t in range(trials):
            f[t] = eval_multilinear(
                T, [(idxs[mode][t][idxs[mode][t] >= 0],
                     valss[mode][t][idxs[mode][t] >= 0]) for mode in range(d)]
            )
    exceed = float((np.abs(f) > threshold).mean())
    mean_f = float(f.mean())
    se = float(f.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return ExperimentReport(
        name="tail", empirical=exceed, budget=MC_SLACK * eta, threshold=threshold,
        passed=exceed <= MC_SLACK * eta, trials=trials,
        params={"d": d, "m": m, "eta": eta, "rho": rho, "frobenius": B,
                "tau": tau, "p": p, "C": C, "mean_f": mean_f, "se_f": se,
                "nu": nu_report("tail", eta, d)},
    )


def bernstein_bound(alpha: np.ndarray, eta: float, C: float, tau: float, p: float,
                    c: float = 4.0) -> float:
    """c log(1/eta) C sqrt(tau) max(||alpha||_2 sqrt(p), ||alpha||_inf)."""
    a = np.asarray(alpha, dtype=np.float64)
    return float(
        c * math.log(1.0 / eta) * C * math.sqrt(tau)
        * max(np.linalg.norm(a) * math.sqrt(p), np.abs(a).max())
    )


def bernstein_experiment(
    alpha: np.ndarray,
    support: SupportModel,
    value: ValueModel,
    eta: float,
    trials: int,
    seed: int,
    c: float = 4.0,
) -> ExperimentReport:
    """Degree-1 weighted-sum tail against the Bernstein-style threshold."""
    a = np.asarray(alpha, dtype=np.float64)
    p = support.k / support.m
    thr = bernstein_bound(a, eta, value.C, support.tau, p, c=c)
    ix, vv = _draw_sparse(support, value, trials, seed, "bernstein")
    safe = np.clip(ix, 0, support.m - 1).astype(np.int64)
    f = np.einsum("tk,tk->t", vv, a[safe])
    exceed = float((np.abs(f) >= thr).mean())
    return ExperimentReport(
        name="bernstein", empirical=exceed, budget=MC_SLACK * eta, threshold=thr,
        passed=exceed <= MC_SLACK * eta, trials=trials,
        params={"eta": eta, "c": c, "p": p, "tau": support.tau, "C": value.C},
    )


def subtensor_frobenius_experiment(
    T: CoeffTensor,
    support: SupportModel,
    eta: float,
    trials: int,
    seed: int,
    tau: float | None = None,
    p: float | None = None,
) -> ExperimentReport:
    """||T restricted to random supports||_F^2 vs min(rho log(1/eta)^d, 1/eta) (tau p)^d B^2."""
    if trials < 10.0 / eta:
        raise ValueError(f"need trials >= 10/eta = {10.0 / eta}")
    d, m = T.d, T.m
    tau = support.tau if tau is None else tau
    p = support.k / support.m if p is None else p
    rho = imbalance_rho(T, p, tau)
    B = T.frobenius()
    threshold = min(rho * math.log(1.0 / eta) ** d, 1.0 / eta) * (tau * p) ** d * B * B
    idxs = []
    for mode in range(d):
        ix, _ = _draw_sparse(support, ValueModel(kind="rademacher"), trials, seed,
                             f"subtensor-mode{mode}")
        idxs.append(ix)
    mass = np.empty(trials)
    if T.rank_weights is not None:
        r = T.rank_weights.size
        # ||T'||_F^2 = sum_{i,i'} w_i w_i' prod_modes (sum_{j in S_mode} M[j,i] M[j,i'])
        for t in range(trials):
            prod = np.ones((r, r))
            for mode in range(d):
                ix = idxs[mode][t]
                rows = T.rank_factors[ix[ix >= 0].astype(np.int64)]
                prod *= rows.T @ rows
            mass[t] = float((np.outer(T.rank_weights, T.rank_weights) * prod).sum())
    else:
        for t in range(trials):
            sel = [idxs[mode][t][idxs[mode][t] >= 0] for mode in range(d)]
            sub = T.dense[np.ix_(*sel)] if all(len(s) for s in sel) else np.zeros(1)
            mass[t] = float((sub**2).sum())
    exceed = float((mass > threshold).mean())
    return ExperimentReport(
        name="subtensor", empirical=exceed, budget=MC_SLACK * eta, threshold=threshold,
        passed=exceed <= MC_SLACK * eta, trials=trials,
        params={"d": d, "m": m, "eta": eta, "rho": rho, "frobenius": B,
                "tau": tau, "p": p, "mean_mass": float(mass.mean()),
                "nu": nu_report("subtensor", eta, d)},
    )


def zconc_experiment(
    a: np.ndarray,
    support: SupportModel,
    value: ValueModel,
    c: int,
    trials: int,
    seed: int,
) -> ExperimentReport:
    """Pr[sum a_i^2 Z_i^2 > C^2 tau / log^c m] <= ||a||_1 p log^c m + 1/m^2 (x3 slack).

    Z_i is coordinate i's coefficient (0 when i is not in the support).
    Precondition ||a||_1 p C^2 <= 1.
    """
    a = np.asarray(a, dtype=np.float64)
    m = support.m
    p = support.k / support.m
    C = value.C
    if np.abs(a).sum() * p * C * C > 1.0 + 1e-12:
        raise ValueError("precondition ||a||_1 p C^2 <= 1 violated")
    logc = math.log(m) ** c
    threshold = C * C * support.tau / logc
    budget = float(np.abs(a).sum() * p * logc + 1.0 / (m * m))
    ix, vv = _draw_sparse(support, value, trials, seed, "zconc")
    safe = np.clip(ix, 0, m - 1).astype(np.int64)
    s = np.einsum("tk,tk->t", vv**2, (a**2)[safe])
    exceed = float((s > threshold).mean())
    return ExperimentReport(
        name="zconc", empirical=exceed, budget=MC_SLACK * budget, threshold=threshold,
        passed=exceed <= MC_SLACK * budget, trials=trials,
        params={"m": m, "c": c, "p": p, "tau": support.tau, "C": C,
                "l1": float(np.abs(a).sum())},
    )


def khatri_rao_norm_check(A: np.ndarray, B: np.ndarray, tol: float = 1e-8) -> dict:
    """Column-wise Kronecker operator norm vs the product of operator norms."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape[1] != B.shape[1]:
        raise ValueError("column counts must match")
    M = np.einsum("ir,jr->ijr", A, B).reshape(A.shape[0] * B.shape[0], A.shape[1])
    lhs = float(np.linalg.norm(M, 2))
    rhs = float(np.linalg.norm(A, 2) * np.linalg.norm(B, 2))
    return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs + tol}


def psd_tensor_frobenius_check(As: list[np.ndarray], Bs: list[np.ndarray],
                               tol: float = 1e-8) -> dict:
    """||sum_i A_i kron B_i||_F <= ||sum_i ||B_i||_F A_i||_F for PSD A_i, B_i."""
    if len(As) != len(Bs):
        raise ValueError("need equally many A and B blocks")
    total = sum(np.kron(A, B) for A, B in zip(As, Bs))
    lhs = float(np.linalg.norm(total, "fro"))
    stacked = sum(np.linalg.norm(B, "fro") * A for A, B in zip(As, Bs))
    rhs = float(np.linalg.norm(stacked, "fro"))
    return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs + tol}
