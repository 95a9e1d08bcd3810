"""Contact-QP assembly: CoM, footholds, and momentum with the forces fixed.

With the forces frozen at the previous force solve's values, the angular
momentum rate rearranges through a x b = -b x a into

    kappa = f x (r - p) - f x (R^{xy} z) + tau_fixed

which is linear in the remaining unknowns (r, p, z), so the geometry problem
over (r, l, k, p, z) is again one convex QP:

  - equality rows: the CoM recursion r_t = r_{t-1} + l_t dt / m and the
    angular momentum recursion. There are deliberately no linear momentum
    transition rows: l stays free and is only pulled proximally toward the
    force solve's momentum, which lets the CoM trade position against
    momentum when shaping kappa.
  - one foothold variable per contact phase (constancy by construction),
    constrained to the phase's surface polytope and to the per-axis kinematic
    box around the CoM at every covered timestep;
  - diagonal quadratic cost: foothold pull toward nominal placements,
    center-of-pressure penalties, and proximal pulls of h toward the force
    solve and of p toward the previous contact solve.

As with the force side, the sparsity pattern depends only on the plan: the
fixed force values fill dedicated skew slots that exist even when zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .force_qp import CostWeights, QpNotSolved
from .model import CentroidalState, ContactPlan
from .qp.problem import QpSolution, SparseQP, TripletPattern, VariableLayout
from .references import ReferenceSet

__all__ = [
    "ContactQpInputs",
    "ContactIterate",
    "build_contact_qp",
    "extract_contact_iterate",
    "nominal_footholds",
]


@dataclass(frozen=True)
class ContactQpInputs:
    """Data defining one Contact-QP instance.

    ``f_fixed`` (and ``tau_fixed`` for flat feet) come from the force solve of
    the same outer iteration; ``l_reg`` and ``h_reg`` are its momentum
    trajectory, ``p_reg`` the previous contact solve's footholds (absent on
    the first outer iteration).
    """

    plan: ContactPlan
    f_fixed: Mapping[tuple[int, str], np.ndarray]
    l_reg: tuple[np.ndarray, ...]
    h_reg: tuple[CentroidalState, ...]
    references: ReferenceSet
    weights: CostWeights = field(default_factory=CostWeights)
    p_reg: Mapping[tuple[int, str], np.ndarray] | None = None
    tau_fixed: Mapping[tuple[int, str], np.ndarray] | None = None
    l_prox: float = 0.0

    def __post_init__(self):
        if self.l_prox < 0.0:
            raise ValueError("proximal weight must be nonnegative")
        N = self.plan.horizon
        if len(self.h_reg) != N or len(self.l_reg) != N or len(self.references) != N:
            raise ValueError("regularization targets and references must cover the horizon")
        active = set(self.plan.active_pairs())
        if set(self.f_fixed.keys()) != active:
            raise ValueError("f_fixed must cover exactly the active (t, effector) pairs")


def nominal_footholds(plan: ContactPlan, references: ReferenceSet) -> dict[tuple[int, str], np.ndarray]:
    """Per-phase nominal foothold targets, replicated over the phase's
    timesteps. A phase's explicit hint wins; otherwise the phase-mean of
    reference CoM plus nominal offset."""
    out: dict[tuple[int, str], np.ndarray] = {}
    for ph in plan.phases:
        e = ph.end_effector_id
        if ph.foothold_hint is not None:
            target = np.asarray(ph.foothold_hint, dtype=float)
        else:
            acc = np.zeros(3)
            for t in range(ph.t_start, ph.t_end):
                acc += references.h_kin[t].r + plan.nominal_offsets[e]
            target = acc / (ph.t_end - ph.t_start)
        for t in range(ph.t_start, ph.t_end):
            out[(t, e)] = target
    return out


def _contact_layout(plan: ContactPlan) -> VariableLayout:
    entries = []
    col = 0
    phase_keys: list[tuple[str, int, str]] = []
    for t in range(plan.horizon):
        for quantity in ("r", "l", "k"):
            entries.append((quantity, t, None, col, col + 3))
            col += 3
        for ph in plan.active_contacts(t):
            e = ph.end_effector_id
            if t == ph.t_start:
                entries.append(("p", t, e, col, col + 3))
                col += 3
            else:
                phase_keys.append(("p", t, e, ph.t_start))
            if ph.flat_foot:
                entries.append(("z", t, e, col, col + 2))
                col += 2
    layout = VariableLayout(n=col, entries=tuple(entries))
    for quantity, t, e, t0 in phase_keys:
        layout = layout.alias(quantity, t, e, (quantity, t0, e))
    return layout


def build_contact_qp(inputs: ContactQpInputs) -> SparseQP:
    plan = inputs.plan
    N, dt, m = plan.horizon, plan.dt, plan.mass
    w = inputs.weights
    layout = _contact_layout(plan)
    n = layout.n
    p_nom = nominal_footholds(plan, inputs.references)

    p_rows, p_cols, p_vals = [], [], []
    q = np.zeros(n)
    a_rows, a_cols, a_vals = [], [], []
    lo, hi = [], []
    row = 0

    def add_diag(r0, c0, value, size=3):
        for i in range(size):
            a_rows.append(r0 + i)
            a_cols.append(c0 + i)
            a_vals.append(value)

    def add_skew_slots(r0, c0, f, scale):
        # scale * skew(f): all six off-diagonal slots stay structural.
        fx, fy, fz = f
        for (i, j, v) in ((0, 1, -fz), (0, 2, fy), (1, 0, fz),
                          (1, 2, -fx), (2, 0, -fy), (2, 1, fx)):
            a_rows.append(r0 + i)
            a_cols.append(c0 + j)
            a_vals.append(scale * v)

    h0 = plan.h0
    seen_phase: set[tuple[int, str]] = set()
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

        # k_t - k_{t-1} - dt sum_e [skew(f) r_t - skew(f) p_e - skew(f) R z]
        #   = dt sum_e tau_fixed [+ k_init at t=0]
        add_diag(row, k_t, 1.0)
        rhs_k = np.zeros(3)
        for ph in contacts:
            e = ph.end_effector_id
            f = np.asarray(inputs.f_fixed[(t, e)], dtype=float)
            add_skew_slots(row, r_t, f, -dt)
            add_skew_slots(row, layout.span("p", t, e).start, f, dt)
            if ph.flat_foot:
                # - skew(f) R^{xy} z, a dense 3x2 block.
                M = dt * (_skew_np(f) @ ph.rotation[:, :2])
                z0 = layout.span("z", t, e).start
                for i in range(3):
                    for j in range(2):
                        a_rows.append(row + i)
                        a_cols.append(z0 + j)
                        a_vals.append(M[i, j])
                if inputs.tau_fixed is not None and (t, e) in inputs.tau_fixed:
                    rhs_k = rhs_k + dt * np.asarray(inputs.tau_fixed[(t, e)], dtype=float)
        if t > 0:
            add_diag(row, layout.span("k", t - 1).start, -1.0)
        else:
            rhs_k = rhs_k + h0.k
        lo.extend(rhs_k)
        hi.extend(rhs_k)
        row += 3

        for ph in contacts:
            e = ph.end_effector_id
            p0 = layout.span("p", t, e).start
            # Per-axis kinematic box |p - r_t| <= L_max.
            add_diag(row, p0, 1.0)
            add_diag(row, r_t, -1.0)
            lo.extend([-plan.kinematic_limit] * 3)
            hi.extend([plan.kinematic_limit] * 3)
            row += 3
            if ph.flat_foot:
                z0 = layout.span("z", t, e).start
                zlo, zhi = ph.zmp_lo_hi()
                add_diag(row, z0, 1.0, size=2)
                lo.extend(zlo)
                hi.extend(zhi)
                row += 2
            if (ph.t_start, e) not in seen_phase:
                seen_phase.add((ph.t_start, e))
                S = ph.surface
                for i in range(S.A.shape[0]):
                    for j in range(3):
                        a_rows.append(row)
                        a_cols.append(p0 + j)
                        a_vals.append(S.A[i, j])
                    lo.append(-np.inf)
                    hi.append(S.b[i])
                    row += 1

        # Diagonal cost blocks for this timestep. No tracking term here: the
        # state is anchored through the proximal pull toward the force solve.
        wh = w.running_h
        h_kin = inputs.references.h_kin[t].stacked()
        reg = np.concatenate([inputs.h_reg[t].r, np.asarray(inputs.l_reg[t], dtype=float),
                              inputs.h_reg[t].k])
        for i in range(9):
            p_rows.append(r_t + i)
            p_cols.append(r_t + i)
            p_vals.append(2.0 * wh[i] + inputs.l_prox)
        q[r_t:r_t + 9] += -2.0 * wh * h_kin - inputs.l_prox * reg
        for ph in contacts:
            e = ph.end_effector_id
            p0 = layout.span("p", t, e).start
            p_prox = inputs.l_prox if inputs.p_reg is not None else 0.0
            for i in range(3):
                p_rows.append(p0 + i)
                p_cols.append(p0 + i)
                p_vals.append(2.0 * w.foothold + p_prox)
            q[p0:p0 + 3] += -2.0 * w.foothold * p_nom[(t, e)]
            if inputs.p_reg is not None:
                q[p0:p0 + 3] += -p_prox * np.asarray(inputs.p_reg[(t, e)], dtype=float)
            if ph.flat_foot:
                z0 = layout.span("z", t, e).start
                for i in range(2):
                    p_rows.append(z0 + i)
                    p_cols.append(z0 + i)
                    p_vals.append(2.0 * w.zmp)

    m_c = row
    P = TripletPattern(p_rows, p_cols, (n, n)).assemble(p_vals)
    A = TripletPattern(a_rows, a_cols, (m_c, n)).assemble(a_vals)
    return SparseQP(n=n, m_c=m_c, P=P, q=q, A=A,
                    lo=np.array(lo), hi=np.array(hi), layout=layout)


def _skew_np(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@dataclass(frozen=True)
class ContactIterate:
    """Solution of one Contact-QP: geometry trajectory plus recovered lever arms."""

    states: tuple[CentroidalState, ...]
    footholds: Mapping[tuple[int, str], np.ndarray]
    zmps: Mapping[tuple[int, str], np.ndarray]
    ells: Mapping[tuple[int, str], np.ndarray]

    def stacked_ells(self, plan: ContactPlan) -> np.ndarray:
        return np.concatenate([self.ells[pair] for pair in plan.active_pairs()]) \
            if plan.active_pairs() else np.zeros(0)


def extract_contact_iterate(sol: QpSolution, layout: VariableLayout,
                            plan: ContactPlan) -> ContactIterate:
    if not sol.solved:
        raise QpNotSolved(sol.status)
    states = []
    for t in range(plan.horizon):
        h = np.concatenate([sol.x[layout.span("r", t)], sol.x[layout.span("l", t)],
                            sol.x[layout.span("k", t)]])
        states.append(CentroidalState.from_stacked(h))
    footholds, zmps, ells = {}, {}, {}
    for t in range(plan.horizon):
        for ph in plan.active_contacts(t):
            e = ph.end_effector_id
            p = sol.x[layout.span("p", t, e)].copy()
            footholds[(t, e)] = p
            ell = p - states[t].r
            if ph.flat_foot:
                z = sol.x[layout.span("z", t, e)].copy()
                zmps[(t, e)] = z
                ell = ell + ph.rotation[:, :2] @ z
            ells[(t, e)] = ell
    return ContactIterate(states=tuple(states), footholds=footholds, zmps=zmps, ells=ells)
