"""Trajectory and report serialization.

One CSV row per timestep: the momentum state, then per end-effector the
force, contact point, and lever arm (plus contact torque and
center-of-pressure columns for effectors with flat-foot phases). Inactive
effectors carry zeros; activity is defined by the contact plan, which is
required again when reading.

The convergence report JSON deliberately carries no timing fields so that
repeated runs with identical inputs produce byte-identical files; timings go
to their own CSV.
"""

from __future__ import annotations

import csv
import json
from typing import Mapping, Sequence

import numpy as np

from .bcd import TrajectoryResult
from .model import CentroidalState, ContactPlan, EffectorContact

__all__ = [
    "TrajectoryFormatError",
    "trajectory_header",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "convergence_report",
    "write_convergence_json",
    "write_timing_csv",
]


class TrajectoryFormatError(ValueError):
    """Trajectory CSV does not match the expected structure."""


_STATE_COLUMNS = ["r_x", "r_y", "r_z", "l_x", "l_y", "l_z", "k_x", "k_y", "k_z"]


def _flat_foot_effectors(plan: ContactPlan) -> set[str]:
    return {ph.end_effector_id for ph in plan.phases if ph.flat_foot}


def trajectory_header(plan: ContactPlan) -> list[str]:
    header = ["t"] + _STATE_COLUMNS
    flat = _flat_foot_effectors(plan)
    for e in plan.effector_ids:
        for quantity in ("f", "p", "ell"):
            header += [f"{quantity}_{e}_{axis}" for axis in "xyz"]
        if e in flat:
            header += [f"tau_{e}_{axis}" for axis in "xyz"]
            header += [f"z_{e}_{axis}" for axis in "xy"]
    return header


def write_trajectory_csv(stream, states: Sequence[CentroidalState],
                         contacts: Sequence[Mapping[str, EffectorContact]],
                         plan: ContactPlan) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(trajectory_header(plan))
    flat = _flat_foot_effectors(plan)
    for t, (state, cs) in enumerate(zip(states, contacts)):
        row: list = [t]
        row += [repr(float(v)) for v in state.stacked()]
        for e in plan.effector_ids:
            c = cs.get(e)
            f = c.f if c else np.zeros(3)
            p = c.p if c else np.zeros(3)
            ell = c.ell if c is not None and c.ell is not None else \
                (p - state.r if c else np.zeros(3))
            vals = list(f) + list(p) + list(ell)
            if e in flat:
                tau = c.tau if c is not None and c.tau is not None else np.zeros(3)
                z = c.z if c is not None and c.z is not None else np.zeros(2)
                vals += list(tau) + list(z)
            row += [repr(float(v)) for v in vals]
        writer.writerow(row)


def read_trajectory_csv(stream, plan: ContactPlan):
    """Parse a trajectory CSV back into (state, contacts) pairs, using the
    plan to decide which effectors are active at each timestep."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise TrajectoryFormatError("empty trajectory file") from None
    expected = trajectory_header(plan)
    if header != expected:
        raise TrajectoryFormatError(
            f"header mismatch: expected {len(expected)} columns for this plan, "
            f"got {len(header)} ({header[:4]}...)")
    flat = _flat_foot_effectors(plan)
    traj = []
    for t, row in enumerate(reader):
        if len(row) != len(expected):
            raise TrajectoryFormatError(f"row {t}: expected {len(expected)} fields, got {len(row)}")
        try:
            vals = [float(x) for x in row]
        except ValueError as exc:
            raise TrajectoryFormatError(f"row {t}: {exc}") from None
        if int(vals[0]) != t:
            raise TrajectoryFormatError(f"row {t}: timestep column says {vals[0]}")
        state = CentroidalState.from_stacked(vals[1:10])
        idx = 10
        contacts = {}
        for e in plan.effector_ids:
            width = 9 + (5 if e in flat else 0)
            chunk = vals[idx:idx + width]
            idx += width
            if plan.phase_at(t, e) is None:
                continue
            kwargs = {}
            if e in flat:
                kwargs = {"tau": chunk[9:12], "z": chunk[12:14]}
            contacts[e] = EffectorContact(f=chunk[0:3], p=chunk[3:6], ell=chunk[6:9], **kwargs)
        traj.append((state, contacts))
    if len(traj) != plan.horizon:
        raise TrajectoryFormatError(
            f"trajectory has {len(traj)} timesteps, plan horizon is {plan.horizon}")
    return traj


def convergence_report(result: TrajectoryResult, scenario_name: str = "") -> dict:
    return {
        "scenario": scenario_name,
        "converged": result.converged,
        "outer_iterations": len(result.records),
        "eps_f_trace": result.eps_trace,
        "records": [r.as_dict() for r in result.records],
        "final_record": result.final_record.as_dict(),
        "final_original_cost": result.final_record.original_cost,
        "residuals": result.residuals.as_dict(),
    }


def write_convergence_json(stream, result: TrajectoryResult, scenario_name: str = "") -> None:
    json.dump(convergence_report(result, scenario_name), stream, indent=2, sort_keys=True)
    stream.write("\n")


def write_timing_csv(stream, result: TrajectoryResult) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["phase", "force_qp_time_s", "contact_qp_time_s"])
    for r in result.records:
        writer.writerow([f"iteration_{r.iteration}", repr(r.force_qp_time),
                         repr(r.contact_qp_time)])
    writer.writerow(["final", repr(result.final_record.force_qp_time), repr(0.0)])
    writer.writerow(["setup", repr(result.setup_time), repr(0.0)])
