"""Force-QP assembly: the full discretized momentum problem with lever arms fixed.

With the lever arms frozen at the previous contact solve's values, the angular
momentum rate kappa = ell x f + tau is linear in the forces and torques, so
the whole trajectory problem over (h, f, tau, z) is one convex QP:

  - equality rows: the momentum transitions, timestep t touching only states
    at t-1 and t (block banded);
  - inequality rows: friction pyramids in each contact frame, per-axis
    kinematic boxes of the CoM around the fixed footholds, and
    center-of-pressure bounds for flat feet;
  - diagonal quadratic cost: running penalties, reference tracking, and the
    proximal pull toward the previous contact solve's momentum trajectory.

The sparsity pattern depends only on the contact plan, never on the fixed
lever-arm values, so consecutive outer iterations can update solver values in
place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .model import CentroidalState, ContactPlan
from .qp.problem import QpSolution, SparseQP, TripletPattern, VariableLayout
from .references import ReferenceSet

__all__ = [
    "CostWeights",
    "ForceQpInputs",
    "ForceIterate",
    "QpNotSolved",
    "build_force_qp",
    "extract_force_iterate",
    "force_original_cost",
]


class QpNotSolved(RuntimeError):
    """Raised when extraction is attempted on a non-solved QP solution."""

    def __init__(self, status: str):
        super().__init__(f"QP did not solve: status={status}")
        self.status = status


def _weights9(x, name: str) -> np.ndarray:
    w = np.asarray(x, dtype=float).reshape(-1)
    if w.size == 3:
        w = np.repeat(w, 3)
    if w.shape != (9,):
        raise ValueError(f"{name} must have 3 (per r/l/k) or 9 entries")
    if np.any(w < 0.0):
        raise ValueError(f"{name} must be nonnegative")
    w.setflags(write=False)
    return w


@dataclass(frozen=True)
class CostWeights:
    """Diagonal cost weights shared by both trajectory subproblems.

    ``tracking`` is the reference-tracking weight over the stacked state
    (r, l, k); ``running_h`` is the extra running penalty on the same
    deviation (kept separate so the contact subproblem, which carries no
    tracking term, can still see the state). ``terminal`` is added on the last
    timestep. Scalars weigh the squared magnitudes of forces, contact torques
    and center-of-pressure offsets, and the pull of footholds toward their
    nominal placement.
    """

    tracking: np.ndarray = field(default_factory=lambda: np.array([1e2, 1e1, 1e3]))
    running_h: np.ndarray = field(default_factory=lambda: np.array([1e2, 1e1, 1e3]))
    terminal: np.ndarray = field(default_factory=lambda: np.array([1e3, 1e4, 1e4]))
    force: float = 1e-9
    torque: float = 1e-4
    zmp: float = 1e-2
    foothold: float = 1e2

    def __post_init__(self):
        object.__setattr__(self, "tracking", _weights9(self.tracking, "tracking"))
        object.__setattr__(self, "running_h", _weights9(self.running_h, "running_h"))
        object.__setattr__(self, "terminal", _weights9(self.terminal, "terminal"))
        for name in ("force", "torque", "zmp", "foothold"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} weight must be nonnegative")


@dataclass(frozen=True)
class ForceQpInputs:
    """Data defining one Force-QP instance.

    ``ell_fixed`` and ``p_fixed`` come from the previous contact solve (or the
    nominal initialization) and must cover exactly the plan's active (t,
    effector) pairs. ``h_reg`` is the proximal target; it is absent on the
    first outer iteration, where ``l_prox`` must be zero.
    """

    plan: ContactPlan
    ell_fixed: Mapping[tuple[int, str], np.ndarray]
    p_fixed: Mapping[tuple[int, str], np.ndarray]
    references: ReferenceSet
    weights: CostWeights = field(default_factory=CostWeights)
    h_reg: tuple[CentroidalState, ...] | None = None
    l_prox: float = 0.0

    def __post_init__(self):
        if self.l_prox < 0.0:
            raise ValueError("proximal weight must be nonnegative")
        if self.l_prox > 0.0 and self.h_reg is None:
            raise ValueError("proximal weight set but no regularization target")
        if len(self.references) != self.plan.horizon:
            raise ValueError("references must cover the horizon")
        if self.h_reg is not None and len(self.h_reg) != self.plan.horizon:
            raise ValueError("h_reg must cover the horizon")
        active = set(self.plan.active_pairs())
        for name in ("ell_fixed", "p_fixed"):
            keys = set(getattr(self, name).keys())
            if keys != active:
                missing = active - keys
                extra = keys - active
                raise ValueError(
                    f"{name} must cover exactly the active pairs "
                    f"(missing {sorted(missing)!r}, extra {sorted(extra)!r})")


def _force_layout(plan: ContactPlan) -> VariableLayout:
    entries = []
    col = 0
    for t in range(plan.horizon):
        for quantity in ("r", "l", "k"):
            entries.append((quantity, t, None, col, col + 3))
            col += 3
        for ph in plan.active_contacts(t):
            e = ph.end_effector_id
            entries.append(("f", t, e, col, col + 3))
            col += 3
            if ph.flat_foot:
                entries.append(("tau", t, e, col, col + 3))
                col += 3
                entries.append(("z", t, e, col, col + 2))
                col += 2
    return VariableLayout(n=col, entries=tuple(entries))


def build_force_qp(inputs: ForceQpInputs) -> SparseQP:
    plan = inputs.plan
    N, dt, m = plan.horizon, plan.dt, plan.mass
    w = inputs.weights
    layout = _force_layout(plan)
    n = layout.n

    p_rows, p_cols, p_vals = [], [], []
    a_rows, a_cols, a_vals = [], [], []
    q = np.zeros(n)
    lo, hi = [], []
    row = 0

    def add_block(r0, c0, M):
        for i in range(M.shape[0]):
            for j in range(M.shape[1]):
                a_rows.append(r0 + i)
                a_cols.append(c0 + j)
                a_vals.append(M[i, j])

    def add_diag(r0, c0, value, size=3):
        for i in range(size):
            a_rows.append(r0 + i)
            a_cols.append(c0 + i)
            a_vals.append(value)

    h0 = plan.h0
    for t in range(N):
        r_t = layout.span("r", t).start
        l_t = layout.span("l", t).start
        k_t = layout.span("k", t).start
        contacts = plan.active_contacts(t)

        # r_t - r_{t-1} - (dt/m) l_t = [r_init at t=0]
        add_diag(row, r_t, 1.0)
        add_diag(row, l_t, -dt / m)
        if t > 0:
            add_diag(row, layout.span("r", t - 1).start, -1.0)
            rhs_r = np.zeros(3)
        else:
            rhs_r = h0.r
        lo.extend(rhs_r)
        hi.extend(rhs_r)
        row += 3

        # l_t - l_{t-1} - dt sum_e f = m g dt [+ l_init at t=0]
        add_diag(row, l_t, 1.0)
        for ph in contacts:
            add_diag(row, layout.span("f", t, ph.end_effector_id).start, -dt)
        rhs_l = m * plan.gravity * dt
        if t > 0:
            add_diag(row, layout.span("l", t - 1).start, -1.0)
        else:
            rhs_l = rhs_l + h0.l
        lo.extend(rhs_l)
        hi.extend(rhs_l)
        row += 3

        # k_t - k_{t-1} - dt sum_e (ell x f + tau) = [k_init at t=0]
        add_diag(row, k_t, 1.0)
        for ph in contacts:
            e = ph.end_effector_id
            ell = np.asarray(inputs.ell_fixed[(t, e)], dtype=float)
            lx, ly, lz = ell
            f0 = layout.span("f", t, e).start
            # Coefficient on f is -dt * skew(ell); all six off-diagonal slots
            # are kept even when zero so the pattern is invariant across
            # outer iterations.
            for (i, j, v) in ((0, 1, lz), (0, 2, -ly), (1, 0, -lz),
                              (1, 2, lx), (2, 0, ly), (2, 1, -lx)):
                a_rows.append(row + i)
                a_cols.append(f0 + j)
                a_vals.append(dt * v)
            if ph.flat_foot:
                add_diag(row, layout.span("tau", t, e).start, -dt)
        if t > 0:
            add_diag(row, layout.span("k", t - 1).start, -1.0)
            rhs_k = np.zeros(3)
        else:
            rhs_k = h0.k
        lo.extend(rhs_k)
        hi.extend(rhs_k)
        row += 3

        for ph in contacts:
            e = ph.end_effector_id
            f0 = layout.span("f", t, e).start
            R = ph.rotation
            mu = ph.friction_coeff
            rx, ry, rz = R[:, 0], R[:, 1], R[:, 2]
            # Friction pyramid in the contact frame.
            for axis in (rx, ry):
                add_block(row, f0, (axis - mu * rz).reshape(1, 3))
                lo.append(-np.inf)
                hi.append(0.0)
                row += 1
                add_block(row, f0, (axis + mu * rz).reshape(1, 3))
                lo.append(0.0)
                hi.append(np.inf)
                row += 1
            add_block(row, f0, rz.reshape(1, 3))
            lo.append(0.0)
            hi.append(np.inf)
            row += 1
            # Per-axis kinematic box |p_fixed - r| <= L_max.
            p_fix = np.asarray(inputs.p_fixed[(t, e)], dtype=float)
            add_diag(row, r_t, 1.0)
            lo.extend(p_fix - plan.kinematic_limit)
            hi.extend(p_fix + plan.kinematic_limit)
            row += 3
            if ph.flat_foot:
                z0 = layout.span("z", t, e).start
                zlo, zhi = ph.zmp_lo_hi()
                add_diag(row, z0, 1.0, size=2)
                lo.extend(zlo)
                hi.extend(zhi)
                row += 2

        # Diagonal cost blocks for this timestep.
        track = inputs.references.weight_at(t, w.tracking).copy()
        if t == N - 1:
            track = track + w.terminal
        wh = track + w.running_h
        h_kin = inputs.references.h_kin[t].stacked()
        for i in range(9):
            p_rows.append(r_t + i)
            p_cols.append(r_t + i)
            p_vals.append(2.0 * wh[i] + inputs.l_prox)
        q[r_t:r_t + 9] += -2.0 * wh * h_kin
        if inputs.h_reg is not None and inputs.l_prox > 0.0:
            q[r_t:r_t + 9] += -inputs.l_prox * inputs.h_reg[t].stacked()
        for ph in contacts:
            e = ph.end_effector_id
            f0 = layout.span("f", t, e).start
            for i in range(3):
                p_rows.append(f0 + i)
                p_cols.append(f0 + i)
                p_vals.append(2.0 * w.force)
            if ph.flat_foot:
                tau0 = layout.span("tau", t, e).start
                z0 = layout.span("z", t, e).start
                for i in range(3):
                    p_rows.append(tau0 + i)
                    p_cols.append(tau0 + i)
                    p_vals.append(2.0 * w.torque)
                for i in range(2):
                    p_rows.append(z0 + i)
                    p_cols.append(z0 + i)
                    p_vals.append(2.0 * w.zmp)

    m_c = row
    P = TripletPattern(p_rows, p_cols, (n, n)).assemble(p_vals)
    A = TripletPattern(a_rows, a_cols, (m_c, n)).assemble(a_vals)
    return SparseQP(n=n, m_c=m_c, P=P, q=q, A=A,
                    lo=np.array(lo), hi=np.array(hi), layout=layout)


@dataclass(frozen=True)
class ForceIterate:
    """Solution of one Force-QP scattered back to trajectory quantities."""

    states: tuple[CentroidalState, ...]
    forces: Mapping[tuple[int, str], np.ndarray]
    torques: Mapping[tuple[int, str], np.ndarray]
    zmps: Mapping[tuple[int, str], np.ndarray]

    def momentum_trajectory(self) -> np.ndarray:
        return np.array([s.stacked() for s in self.states])


def extract_force_iterate(sol: QpSolution, layout: VariableLayout) -> ForceIterate:
    if not sol.solved:
        raise QpNotSolved(sol.status)
    states = []
    forces, torques, zmps = {}, {}, {}
    t = 0
    while layout.has("r", t):
        h = np.concatenate([sol.x[layout.span("r", t)], sol.x[layout.span("l", t)],
                            sol.x[layout.span("k", t)]])
        states.append(CentroidalState.from_stacked(h))
        t += 1
    for quantity, tt, eff, start, stop in layout.entries:
        if quantity == "f":
            forces[(tt, eff)] = sol.x[start:stop].copy()
        elif quantity == "tau":
            torques[(tt, eff)] = sol.x[start:stop].copy()
        elif quantity == "z":
            zmps[(tt, eff)] = sol.x[start:stop].copy()
    return ForceIterate(states=tuple(states), forces=forces, torques=torques, zmps=zmps)


def force_original_cost(iterate: ForceIterate, references: ReferenceSet,
                        weights: CostWeights, plan: ContactPlan) -> float:
    """Running plus tracking cost of a force iterate, without proximal terms."""
    total = 0.0
    N = plan.horizon
    for t, state in enumerate(iterate.states):
        track = references.weight_at(t, weights.tracking).copy()
        if t == N - 1:
            track = track + weights.terminal
        wh = track + weights.running_h
        dh = state.stacked() - references.h_kin[t].stacked()
        total += float(dh @ (wh * dh))
    for f in iterate.forces.values():
        total += weights.force * float(f @ f)
    for tau in iterate.torques.values():
        total += weights.torque * float(tau @ tau)
    for z in iterate.zmps.values():
        total += weights.zmp * float(z @ z)
    return total
