"""Per-day stochastic compartment update for one region.

States live in a length-n int8 array. A day is synchronous: every transition
draw is made against the day-start state, then all moves apply at once, so a
node exposed today cannot infect its neighbors until tomorrow.

Transitions (one uniform per node, branch resolutions use a second one):

    S      -> E         per infectious graph neighbor, jointly 1 - (1 - p_eff)^k
                        with p_eff = p_e * (1 - v_eff1) for vaccinated nodes
    E      -> Sy | Asy  with p_i; the transient infectious stage resolves the
                        same day, symptomatic with p_sy (times 1 - v_eff2 if
                        vaccinated)
    Asy    -> R         with p_r
    Sy     -> H | R     competing, hospitalization checked first (p_syh, p_r)
    H      -> D | R     competing, death checked first (p_hd, p_hr)
    Q_S    -> S         with p_s
    Q_E    -> E | Q_I   competing, quarantine release checked first (p_s, p_i);
                        Q_I resolves to Q_Sy | Q_Asy like the open branch
    Q_Asy  -> R         with p_r
    Q_Sy   -> H | R     competing, like Sy

R and D are absorbing. H is only reachable from Sy/Q_Sy and D only from H.
Entry into the Q_* states happens through testing and tracing, not here.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from enum import IntEnum
from typing import TYPE_CHECKING

import numpy as np
from scipy import sparse

if TYPE_CHECKING:
    from .metapop import RegionGraph

from .params import EpiParams


class State(IntEnum):
    S = 0
    E = 1
    ASY = 2
    SY = 3
    H = 4
    R = 5
    D = 6
    Q_S = 7
    Q_E = 8
    Q_ASY = 9
    Q_SY = 10


N_STATES = 11
STATE_NAMES = ("S", "E", "Asy", "Sy", "H", "R", "D", "Q_S", "Q_E", "Q_Asy", "Q_Sy")

# columns of the recorded per-day count vectors: the 11 states plus the
# cumulative number of ever-exposed nodes
N_RECORD = N_STATES + 1
RECORD_NAMES = STATE_NAMES + ("cum_exposed",)


class CoreError(ValueError):
    """Structural error in the update inputs (size mismatch and the like)."""


@dataclass(frozen=True)
class NodeFlags:
    """Static per-node attributes that modulate transitions."""

    vaccinated: bool = False
    child: bool = False


@dataclass(frozen=True)
class DayContext:
    """What a region needs to know about the current day."""

    adjacency: sparse.csr_matrix
    p_e: float
    quarantine_active: bool = True


@dataclass
class StepTally:
    """Counts of every transition performed in one region-day."""

    s_to_e: int = 0
    e_to_i: int = 0
    i_to_sy: int = 0
    i_to_asy: int = 0
    asy_to_r: int = 0
    sy_to_h: int = 0
    sy_to_r: int = 0
    h_to_d: int = 0
    h_to_r: int = 0
    qs_to_s: int = 0
    qe_to_e: int = 0
    qe_to_qi: int = 0
    qi_to_qsy: int = 0
    qi_to_qasy: int = 0
    qasy_to_r: int = 0
    qsy_to_h: int = 0
    qsy_to_r: int = 0

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def total_moves(self) -> int:
        # branch counts are sub-counts of e_to_i / qe_to_qi, not extra moves
        skip = {"i_to_sy", "i_to_asy", "qi_to_qsy", "qi_to_qasy"}
        return sum(v for k, v in self.as_dict().items() if k not in skip)


def resolve_infection_branch(
    vaccinated: bool, p_sy: float, v_eff2: float, rng: np.random.Generator
) -> State:
    """Resolve the transient infectious stage to Sy or Asy for a single node."""
    p = p_sy * (1.0 - v_eff2) if vaccinated else p_sy
    return State.SY if rng.random() < p else State.ASY


def count_states(states: np.ndarray) -> np.ndarray:
    """Occupancy of the 11 compartments as an int64 vector."""
    return np.bincount(states, minlength=N_STATES).astype(np.int64)


def step_region(
    region: "RegionGraph", ctx: DayContext, params: EpiParams, rng: np.random.Generator
) -> StepTally:
    """Advance one region by one day; mutates ``region.states`` in place.

    Draws a fixed 2n uniforms per call (one transition draw and one branch
    draw per node) so random-stream consumption does not depend on the state.
    """
    s0 = region.states
    n = s0.shape[0]
    if ctx.adjacency.shape != (n, n):
        raise CoreError(
            f"adjacency shape {ctx.adjacency.shape} does not match region size {n}"
        )
    vacc = region.vaccinated
    u_move = rng.random(n)
    u_branch = rng.random(n)
    out = s0.copy()
    tally = StepTally()

    # --- exposure over the active graph (day-start infectious set) ---
    infectious = (s0 == State.ASY) | (s0 == State.SY)
    sus = s0 == State.S
    if infectious.any() and sus.any():
        k = ctx.adjacency.dot(infectious.astype(np.int32))
        p_eff = np.where(vacc, ctx.p_e * (1.0 - params.v_eff1), ctx.p_e)
        p_exposed = 1.0 - np.power(1.0 - p_eff, k)
        exposed = sus & (u_move < p_exposed)
        out[exposed] = State.E
        tally.s_to_e = int(exposed.sum())

    # --- latency resolution, with the same-day Sy/Asy branch ---
    p_sy_eff = np.where(vacc, params.p_sy * (1.0 - params.v_eff2), params.p_sy)
    branch_sy = u_branch < p_sy_eff

    fired = (s0 == State.E) & (u_move < params.p_i)
    if fired.any():
        to_sy = fired & branch_sy
        to_asy = fired & ~branch_sy
        out[to_sy] = State.SY
        out[to_asy] = State.ASY
        tally.e_to_i = int(fired.sum())
        tally.i_to_sy = int(to_sy.sum())
        tally.i_to_asy = tally.e_to_i - tally.i_to_sy

    # --- open infectious compartments ---
    asy_rec = (s0 == State.ASY) & (u_move < params.p_r)
    out[asy_rec] = State.R
    tally.asy_to_r = int(asy_rec.sum())

    sy = s0 == State.SY
    sy_h = sy & (u_move < params.p_syh)
    sy_r = sy & ~sy_h & (u_move < params.p_syh + params.p_r)
    out[sy_h] = State.H
    out[sy_r] = State.R
    tally.sy_to_h = int(sy_h.sum())
    tally.sy_to_r = int(sy_r.sum())

    hosp = s0 == State.H
    h_d = hosp & (u_move < params.p_hd)
    h_r = hosp & ~h_d & (u_move < params.p_hd + params.p_hr)
    out[h_d] = State.D
    out[h_r] = State.R
    tally.h_to_d = int(h_d.sum())
    tally.h_to_r = int(h_r.sum())

    # --- quarantined compartments (release edges are always active) ---
    qs_rel = (s0 == State.Q_S) & (u_move < params.p_s)
    out[qs_rel] = State.S
    tally.qs_to_s = int(qs_rel.sum())

    qe = s0 == State.Q_E
    qe_rel = qe & (u_move < params.p_s)
    qe_fire = qe & ~qe_rel & (u_move < params.p_s + params.p_i)
    out[qe_rel] = State.E
    tally.qe_to_e = int(qe_rel.sum())
    if qe_fire.any():
        to_qsy = qe_fire & branch_sy
        to_qasy = qe_fire & ~branch_sy
        out[to_qsy] = State.Q_SY
        out[to_qasy] = State.Q_ASY
        tally.qe_to_qi = int(qe_fire.sum())
        tally.qi_to_qsy = int(to_qsy.sum())
        tally.qi_to_qasy = tally.qe_to_qi - tally.qi_to_qsy

    qasy_rec = (s0 == State.Q_ASY) & (u_move < params.p_r)
    out[qasy_rec] = State.R
    tally.qasy_to_r = int(qasy_rec.sum())

    qsy = s0 == State.Q_SY
    qsy_h = qsy & (u_move < params.p_syh)
    qsy_r = qsy & ~qsy_h & (u_move < params.p_syh + params.p_r)
    out[qsy_h] = State.H
    out[qsy_r] = State.R
    tally.qsy_to_h = int(qsy_h.sum())
    tally.qsy_to_r = int(qsy_r.sum())

    region.states = out
    return tally
