"""Column matching: align recovered vectors with true columns up to sign.

Error between a recovered w and a column A_i is min(||w - A_i||, ||w + A_i||).
The assignment is injective; it minimizes total error exactly (Hungarian)
for m <= EXACT_ASSIGNMENT_LIMIT and greedily by ascending error above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EXACT_ASSIGNMENT_LIMIT = 64


@dataclass
class ColumnMatch:
    column: int              # true column index
    recovered: int | None    # index into W, or None if unmatched
    sign: int                # +1 / -1 (sign b with ||A_i - b w|| minimal)
    error: float | None


@dataclass
class MatchReport:
    columns: list[ColumnMatch]
    coverage: float                      # fraction of true columns matched within tolerance
    max_error: float | None              # max error over matched pairs (None if none matched)
    tolerance: float
    unmatched_recovered: list[dict]      # extras: {recovered, nearest_column, distance}
    method: str                          # "exact" or "greedy"

    def as_dict(self) -> dict:
        return {
            "columns": [
                {"column": c.column, "recovered": c.recovered, "sign": c.sign,
                 "error": c.error}
                for c in self.columns
            ],
            "coverage": self.coverage,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "unmatched_recovered": self.unmatched_recovered,
            "method": self.method,
        }


def _error_matrix(cols: np.ndarray, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(m, R) error matrix and sign matrix; error via the inner-product identity.

    ||a - b w||^2 = ||a||^2 + ||w||^2 - 2 b <a, w>, minimized at b = sign<a, w>.
    """
    G = cols.T @ W
    na = (cols**2).sum(axis=0)[:, None]
    nw = (W**2).sum(axis=0)[None, :]
    err2 = na + nw - 2.0 * np.abs(G)
    return np.sqrt(np.maximum(err2, 0.0)), np.where(G >= 0, 1, -1)


def match_columns(A, W, tolerance: float = 0.05) -> MatchReport:
    """Injective assignment of recovered vectors to true columns.

    A: Dictionary (or (n, m) array); W: list of n-vectors or (n, R) array.
    """
    cols = A.columns if hasattr(A, "columns") else np.asarray(A, dtype=np.float64)
    m = cols.shape[1]
    if isinstance(W, np.ndarray) and W.ndim == 2:
        Wm = W.astype(np.float64)
    else:
        Wm = (
            np.column_stack([np.asarray(w, dtype=np.float64) for w in W])
            if len(W) else np.zeros((cols.shape[0], 0))
        )
    R = Wm.shape[1]
    if R == 0:
        return MatchReport(
            columns=[ColumnMatch(i, None, 1, None) for i in range(m)],
            coverage=0.0, max_error=None, tolerance=tolerance,
            unmatched_recovered=[], method="exact",
        )
    err, sgn = _error_matrix(cols, Wm)

    assignment: dict[int, int] = {}
    if m <= EXACT_ASSIGNMENT_LIMIT:
        from scipy.optimize import linear_sum_assignment

        rows, colsW = linear_sum_assignment(err)
        assignment = {int(i): int(j) for i, j in zip(rows, colsW)}
        method = "exact"
    else:
        order = np.argsort(err, axis=None)
        used_cols: set[int] = set()
        used_w: set[int] = set()
        for flat in order:
            i, j = divmod(int(flat), R)
            if i in used_cols or j in used_w:
                continue
            assignment[i] = j
            used_cols.add(i)
            used_w.add(j)
            if len(assignment) == min(m, R):
                break
        method = "greedy"

    columns = []
    for i in range(m):
        if i in assignment:
            j = assignment[i]
            columns.append(ColumnMatch(i, j, int(sgn[i, j]), float(err[i, j])))
        else:
            columns.append(ColumnMatch(i, None, 1, None))
    matched_errors = [c.error for c in columns if c.error is not None]
    coverage = sum(1 for c in columns if c.error is not None and c.error <= tolerance) / m
    assigned_w = {c.recovered for c in columns if c.recovered is not None}
    unmatched = []
    for j in range(R):
        if j not in assigned_w:
            nearest = int(np.argmin(err[:, j]))
            unmatched.append({"recovered": j, "nearest_column": nearest,
                              "distance": float(err[nearest, j])})
    return MatchReport(
        columns=columns,
        coverage=float(coverage),
        max_error=max(matched_errors) if matched_errors else None,
        tolerance=tolerance,
        unmatched_recovered=unmatched,
        method=method,
    )
