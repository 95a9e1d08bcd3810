import numpy as np
import pytest

from centroidal_bcd.model import CentroidalState, ContactPhase, ContactPlan, Polytope
from centroidal_bcd.references import ReferenceSet

QUAD_OFFSETS = {
    "FL": np.array([0.19, 0.11, -0.22]),
    "FR": np.array([0.19, -0.11, -0.22]),
    "HL": np.array([-0.19, 0.11, -0.22]),
    "HR": np.array([-0.19, -0.11, -0.22]),
}


def flat_patch(cx, cy, z=0.0, half=0.3) -> Polytope:
    A = np.array([[0, 0, 1.0], [0, 0, -1.0], [1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]])
    b = np.array([z, -z, cx + half, -(cx - half), cy + half, -(cy - half)])
    return Polytope(A, b)


def hover_plan(N=10, mass=2.5, mu=0.7, offsets=QUAD_OFFSETS) -> ContactPlan:
    r0 = np.array([0.0, 0.0, 0.22])
    phases = [
        ContactPhase(e, 0, N, flat_patch(off[0], off[1]), friction_coeff=mu,
                     foothold_hint=np.array([off[0], off[1], 0.0]))
        for e, off in offsets.items()
    ]
    return ContactPlan(effector_ids=tuple(offsets), phases=tuple(phases), horizon=N,
                       dt=0.01, mass=mass, h0=CentroidalState(r0, np.zeros(3), np.zeros(3)),
                       kinematic_limit=0.35, nominal_offsets=offsets)


def hover_references(plan: ContactPlan) -> ReferenceSet:
    rest = CentroidalState(plan.h0.r, np.zeros(3), np.zeros(3))
    return ReferenceSet(tuple(rest for _ in range(plan.horizon)))


@pytest.fixture
def quad_hover():
    plan = hover_plan()
    return plan, hover_references(plan)


def monopod_plan(N=5, mass=2.0, mu=0.8, L_max=0.4) -> ContactPlan:
    r0 = np.array([0.0, 0.0, 0.22])
    offsets = {"FOOT": np.array([0.0, 0.0, -0.22])}
    phases = [ContactPhase("FOOT", 0, N, flat_patch(0.0, 0.0, half=0.25), friction_coeff=mu,
                           foothold_hint=np.zeros(3))]
    return ContactPlan(effector_ids=("FOOT",), phases=tuple(phases), horizon=N, dt=0.02,
                       mass=mass, h0=CentroidalState(r0, np.zeros(3), np.zeros(3)),
                       kinematic_limit=L_max, nominal_offsets=offsets)
