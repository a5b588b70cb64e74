"""Model parameters: disease-progression probabilities, population-behavior
settings, country presets, and the default search ranges used by calibration.

All probabilities are per day unless stated otherwise. Parameter objects are
frozen; calibration builds variants with ``dataclasses.replace``.
"""

from __future__ import annotations

from dataclasses import dataclass


class ParamError(ValueError):
    """A parameter value violates its documented constraint."""


def _check_unit(name: str, value: float, *, lo_open: bool = False, hi_open: bool = False) -> None:
    if not (0.0 <= value <= 1.0):
        raise ParamError(f"{name} must lie in [0, 1], got {value!r}")
    if lo_open and value == 0.0:
        raise ParamError(f"{name} must be > 0")
    if hi_open and value == 1.0:
        raise ParamError(f"{name} must be < 1")


@dataclass(frozen=True)
class EpiParams:
    """Disease-progression probabilities shared by every node.

    p_i      latency resolution: exposed -> infectious (branch to Sy/Asy)
    p_sy     probability the infection turns symptomatic (unvaccinated)
    p_syh    symptomatic -> hospitalized
    p_r      recovery rate for Asy/Sy (and their quarantined variants)
    p_hr     hospitalized -> recovered
    p_hd     hospitalized -> deceased
    p_s      quarantine release rate for uninfected quarantined nodes (1/length)
    v_eff1   vaccine protection against exposure (applies per contact)
    v_eff2   vaccine protection against developing symptoms
    """

    p_i: float = 0.08
    p_sy: float = 0.5
    p_syh: float = 0.006
    p_r: float = 1.0 / 29.0
    p_hr: float = 1.0 / 11.0
    p_hd: float = 0.03
    p_s: float = 1.0 / 14.0
    v_eff1: float = 0.95
    v_eff2: float = 0.7

    def __post_init__(self) -> None:
        for name in ("p_i", "p_sy", "p_syh", "p_r", "p_hr", "p_hd", "p_s", "v_eff1", "v_eff2"):
            _check_unit(name, getattr(self, name))
        # competing exits are resolved against cumulative thresholds, so each
        # pair of rates must fit in a single unit draw
        if self.p_syh + self.p_r > 1.0:
            raise ParamError(f"p_syh + p_r must be <= 1, got {self.p_syh + self.p_r!r}")
        if self.p_hd + self.p_hr > 1.0:
            raise ParamError(f"p_hd + p_hr must be <= 1, got {self.p_hd + self.p_hr!r}")
        if self.p_s + self.p_i > 1.0:
            raise ParamError(f"p_s + p_i must be <= 1, got {self.p_s + self.p_i!r}")


@dataclass(frozen=True)
class BehaviorParams:
    """Country-level behavioral parameters.

    p_e_min / p_e_max   per-contact exposure probability under full lockdown /
                        unrestricted behavior; between the two, a linear ramp
                        of ``t_ramp`` months (30 days each) applies after lifts
    p_ct_2 / p_ct_3     contact-tracing quarantine probability at policy level 2 / 3
    p_l                 rewiring probability of the small-world lattice layers
    p_rxs..p_rl         expected extra degree of the four random overlays
    r_mix               inter-region mixing weight
    """

    p_e_min: float
    p_e_max: float
    t_ramp: float
    p_ct_2: float
    p_ct_3: float
    p_l: float
    p_rxs: float
    p_rs: float
    p_rm: float
    p_rl: float
    r_mix: float = 0.065

    def __post_init__(self) -> None:
        if not (0.0 < self.p_e_min < self.p_e_max <= 1.0):
            raise ParamError(
                f"need 0 < p_e_min < p_e_max <= 1, got p_e_min={self.p_e_min!r}, p_e_max={self.p_e_max!r}"
            )
        if not (0.0 < self.p_ct_2 < self.p_ct_3 < 1.0):
            raise ParamError(
                f"need 0 < p_ct_2 < p_ct_3 < 1, got p_ct_2={self.p_ct_2!r}, p_ct_3={self.p_ct_3!r}"
            )
        if self.t_ramp <= 0:
            raise ParamError(f"t_ramp must be positive, got {self.t_ramp!r}")
        _check_unit("p_l", self.p_l)
        for name in ("p_rxs", "p_rs", "p_rm", "p_rl"):
            if getattr(self, name) < 0:
                raise ParamError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if self.r_mix < 0:
            raise ParamError(f"r_mix must be >= 0, got {self.r_mix!r}")

    @property
    def overlay_degrees(self) -> tuple[float, float, float, float]:
        return (self.p_rxs, self.p_rs, self.p_rm, self.p_rl)


# fitted estimates for the two studied countries
GBR_BEHAVIOR = BehaviorParams(
    p_e_min=0.075, p_e_max=0.33, t_ramp=11.0,
    p_ct_2=0.65, p_ct_3=0.8, p_l=0.006,
    p_rxs=1.5, p_rs=0.8, p_rm=1.5, p_rl=0.8,
    r_mix=0.065,
)
ISR_BEHAVIOR = BehaviorParams(
    p_e_min=0.085, p_e_max=0.45, t_ramp=8.0,
    p_ct_2=0.65, p_ct_3=0.8, p_l=0.004,
    p_rxs=0.9, p_rs=1.5, p_rm=1.0, p_rl=0.8,
    r_mix=0.065,
)

# literature ranges for the disease parameters (calibration defaults)
EPI_RANGES: dict[str, tuple[float, float]] = {
    "p_i": (1.0 / 20.0, 1.0 / 3.0),
    "p_sy": (0.13, 0.65),
    "p_syh": (0.05, 0.15),
    "p_r": (1.0 / 30.0, 1.0 / 3.0),
    "p_hr": (1.0 / 30.0, 1.0 / 3.0),
    "p_hd": (1e-5, 0.1),
    "v_eff1": (0.8, 0.95),
    "v_eff2": (0.8, 0.95),
}

# initial search ranges for the behavioral parameters
BEHAVIOR_RANGES: dict[str, tuple[float, float]] = {
    "p_e_min": (0.01, 0.2),
    "p_e_max": (0.2, 0.5),
    "t_ramp": (3.0, 18.0),
    "p_ct_2": (0.3, 0.7),
    "p_ct_3": (0.7, 1.0),
    "p_l": (0.004, 0.008),
    "p_rxs": (0.5, 4.5),
    "p_rs": (0.5, 4.5),
    "p_rm": (0.5, 4.5),
    "p_rl": (0.5, 4.5),
    "r_mix": (0.05, 0.15),
}

EPI_FIELDS = tuple(EpiParams.__dataclass_fields__)
BEHAVIOR_FIELDS = tuple(BehaviorParams.__dataclass_fields__)
