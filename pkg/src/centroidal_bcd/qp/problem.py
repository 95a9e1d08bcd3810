"""Sparse QP canonical form shared by both trajectory subproblem builders.

Problems are stated as

    minimize   1/2 x' P x + q' x
    subject to lo <= A x <= hi        (equalities encoded as lo == hi)

with P sparse symmetric PSD and A sparse. Infinite bounds are passed as
+-inf and replaced by a large finite sentinel before they reach any
factorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import numpy as np
import scipy.sparse as sp

__all__ = [
    "INFTY",
    "SparseQP",
    "VariableLayout",
    "SolverSettings",
    "QpSolution",
    "TripletPattern",
    "pattern_hash",
]

# Sentinel standing in for infinity inside the solver; never fed to a
# factorization as literal inf.
INFTY = 1e30


class TripletPattern:
    """Fixed COO slot list with a cached CSC structure.

    Builders emit the same (row, col) slots on every call so that assembled
    matrices share an identical sparsity pattern regardless of values;
    duplicate slots accumulate and explicit zeros are kept structural.
    """

    def __init__(self, rows, cols, shape: tuple[int, int]):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.shape != cols.shape:
            raise ValueError("triplet rows/cols length mismatch")
        if rows.size and (rows.min() < 0 or rows.max() >= shape[0]
                          or cols.min() < 0 or cols.max() >= shape[1]):
            raise ValueError("triplet index out of range")
        self.shape = shape
        self.n_slots = rows.size
        order = np.lexsort((rows, cols))
        sr, sc = rows[order], cols[order]
        # Unique (col, row) pairs in CSC order.
        if rows.size:
            new_entry = np.empty(sr.size, dtype=bool)
            new_entry[0] = True
            new_entry[1:] = (sr[1:] != sr[:-1]) | (sc[1:] != sc[:-1])
            entry_idx = np.cumsum(new_entry) - 1
            self._slot_to_pos = np.empty(sr.size, dtype=np.int64)
            self._slot_to_pos[order] = entry_idx
            self.indices = sr[new_entry].astype(np.int32)
            unique_cols = sc[new_entry]
            self.indptr = np.zeros(shape[1] + 1, dtype=np.int32)
            np.add.at(self.indptr, unique_cols + 1, 1)
            self.indptr = np.cumsum(self.indptr).astype(np.int32)
        else:
            self._slot_to_pos = np.zeros(0, dtype=np.int64)
            self.indices = np.zeros(0, dtype=np.int32)
            self.indptr = np.zeros(shape[1] + 1, dtype=np.int32)
        self.nnz = self.indices.size

    def assemble(self, values) -> sp.csc_matrix:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_slots,):
            raise ValueError(f"expected {self.n_slots} slot values, got {values.shape}")
        data = np.zeros(self.nnz)
        np.add.at(data, self._slot_to_pos, values)
        return sp.csc_matrix((data, self.indices.copy(), self.indptr.copy()),
                             shape=self.shape)


def pattern_hash(M: sp.spmatrix) -> int:
    """Structural hash of a sparse matrix (shape and pattern, not values)."""
    M = M.tocsc()
    return hash((M.shape, M.indptr.tobytes(), M.indices.tobytes()))


@dataclass(frozen=True)
class VariableLayout:
    """Maps (quantity, timestep, end-effector) to a column range.

    ``entries`` lists each distinct range once; ranges are disjoint and cover
    [0, n). Quantities sharing one variable across several timesteps (phase
    footholds) resolve through ``span`` for any timestep they cover.
    """

    n: int
    entries: tuple[tuple[str, int, str | None, int, int], ...]
    _lookup: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        lookup = dict(self._lookup)
        covered = np.zeros(self.n, dtype=bool)
        for quantity, t, eff, start, stop in self.entries:
            if np.any(covered[start:stop]):
                raise ValueError(f"layout ranges overlap at ({quantity}, {t}, {eff})")
            covered[start:stop] = True
            lookup.setdefault((quantity, t, eff), (start, stop))
        if not np.all(covered):
            raise ValueError("layout ranges do not cover [0, n)")
        object.__setattr__(self, "_lookup", lookup)

    def alias(self, quantity: str, t: int, effector: str | None,
              target: tuple[str, int, str | None]) -> "VariableLayout":
        """Register an extra key resolving to an existing entry's range."""
        lookup = dict(self._lookup)
        lookup[(quantity, t, effector)] = lookup[target]
        return replace(self, _lookup=lookup)

    def span(self, quantity: str, t: int, effector: str | None = None) -> slice:
        try:
            start, stop = self._lookup[(quantity, t, effector)]
        except KeyError:
            raise KeyError(f"no variable ({quantity}, t={t}, effector={effector})") from None
        return slice(start, stop)

    def has(self, quantity: str, t: int, effector: str | None = None) -> bool:
        return (quantity, t, effector) in self._lookup


@dataclass(frozen=True)
class SparseQP:
    """Quadratic program in the canonical two-sided row-bound form."""

    n: int
    m_c: int
    P: sp.csc_matrix
    q: np.ndarray
    A: sp.csc_matrix
    lo: np.ndarray
    hi: np.ndarray
    layout: VariableLayout | None = None

    def __post_init__(self):
        if self.P.shape != (self.n, self.n):
            raise ValueError(f"P shape {self.P.shape} != ({self.n}, {self.n})")
        if self.A.shape != (self.m_c, self.n):
            raise ValueError(f"A shape {self.A.shape} != ({self.m_c}, {self.n})")
        for name in ("q", "lo", "hi"):
            v = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, v)
        if self.q.shape != (self.n,):
            raise ValueError("q has wrong length")
        if self.lo.shape != (self.m_c,) or self.hi.shape != (self.m_c,):
            raise ValueError("bound vectors have wrong length")

    def validate(self, psd_tol: float = 1e-8) -> None:
        """Invariant checks; the PSD eigenvalue estimate is meant for
        desk-scale problems and is O(n^3)."""
        if not np.all(np.isfinite(self.q)):
            raise ValueError("q must be finite")
        if np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)):
            raise ValueError("bounds must not be NaN")
        if np.any(self.lo > self.hi):
            raise ValueError("lo > hi on some row")
        gap = abs(self.P - self.P.T)
        if gap.nnz and gap.max() > 1e-12:
            raise ValueError("P is not symmetric")
        if self.n <= 2000:
            w = np.linalg.eigvalsh(self.P.toarray())
            if w[0] < -psd_tol:
                raise ValueError(f"P has negative eigenvalue {w[0]:.3e}")

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ (self.P @ x) + self.q @ x)


@dataclass(frozen=True)
class SolverSettings:
    """Operator-splitting solver settings; defaults match the reference
    configuration used for both trajectory QPs.

    ``scaled_termination`` enables Ruiz equilibration of the problem data;
    termination itself is always evaluated on unscaled residuals so that a
    solved status certifies the true constraint violations.
    """

    eps_abs: float = 1e-7
    eps_rel: float = 1e-7
    eps_prim_inf: float = 1e-6
    eps_dual_inf: float = 1e-6
    polish: bool = True
    scaled_termination: bool = True
    adaptive_penalty: bool = True
    check_termination_every: int = 50
    max_iterations: int = 100_000

    def __post_init__(self):
        for name in ("eps_abs", "eps_rel", "eps_prim_inf", "eps_dual_inf"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.check_termination_every < 1 or self.max_iterations < 1:
            raise ValueError("iteration settings must be >= 1")


@dataclass(frozen=True)
class QpSolution:
    """Solver output. Duals follow the convention P x + q = A' y, so rows at
    their lower bound carry y >= 0 and rows at their upper bound y <= 0."""

    x: np.ndarray
    y: np.ndarray
    status: str  # solved | max_iter | primal_infeasible | dual_infeasible
    objective: float
    iterations: int
    solve_time: float
    polished: bool = False

    @property
    def solved(self) -> bool:
        return self.status == "solved"


def kkt_residuals(qp: SparseQP, x, y) -> tuple[float, float, float]:
    """(primal, dual, complementarity) infinity-norm residuals of a candidate
    primal/dual pair under the QpSolution dual convention."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ax = qp.A @ x
    primal = float(np.max(np.maximum(qp.lo - ax, ax - qp.hi), initial=0.0))
    dual = float(np.max(np.abs(qp.P @ x + qp.q - qp.A.T @ y), initial=0.0))
    comp = 0.0
    for i in range(qp.m_c):
        if y[i] > 0.0 and np.isfinite(qp.lo[i]):
            comp = max(comp, y[i] * abs(ax[i] - qp.lo[i]))
        elif y[i] < 0.0 and np.isfinite(qp.hi[i]):
            comp = max(comp, -y[i] * abs(ax[i] - qp.hi[i]))
    return primal, dual, comp
