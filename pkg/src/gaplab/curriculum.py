"""Three-phase blend-weight schedule with a loss-adaptive ramp.

Training proceeds through Anchor (alpha pinned at 0), Ramp (alpha climbs to
alpha_target at a rate modulated by the trend of the contrastive loss), and
Stabilize (alpha held at alpha_target). During the ramp, two exponential
moving averages of the observed loss with different horizons are compared:
their ratio rho, clipped to [0, 2], is mapped through s(rho) = rho for
rho <= 1 else 2 - rho, and the per-step increment is

    delta_alpha = (alpha_target - alpha) / remaining_steps * (0.5 + s(rho))

so a rising loss (rho > 1) slows the ramp and a falling one speeds it up, with
the speed factor always inside [0.5, 1.5]. Because the factor can stay below
1, the final ramp step assigns alpha = alpha_target outright; that keeps the
"reaches the target by the end of the ramp" contract without overshooting.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import math

__all__ = [
    "Phase",
    "CurriculumConfig",
    "CurriculumState",
    "scheduler_new",
    "scheduler_step",
    "phase_of",
    "state_from_snapshot",
]


class Phase(enum.Enum):
    ANCHOR = "anchor"
    RAMP = "ramp"
    STABILIZE = "stabilize"


@dataclass(frozen=True)
class CurriculumConfig:
    anchor_epochs: int = 3
    ramp_epochs: int = 5
    stabilize_epochs: int = 2
    alpha_target: float = 0.5
    steps_per_epoch: int = 12
    ema_slow_decay: float = 0.99
    ema_fast_decay: float = 0.9

    def __post_init__(self):
        for name in ("anchor_epochs", "ramp_epochs", "stabilize_epochs", "steps_per_epoch"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValueError(f"{name} must be an integer, got {value!r}")
        if self.anchor_epochs < 0 or self.ramp_epochs < 0 or self.stabilize_epochs < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.anchor_epochs + self.ramp_epochs + self.stabilize_epochs < 1:
            raise ValueError("schedule needs at least one epoch")
        if self.steps_per_epoch < 1:
            raise ValueError("steps_per_epoch must be >= 1")
        if not 0.0 <= self.alpha_target <= 1.0:
            raise ValueError(f"alpha_target must be in [0, 1], got {self.alpha_target}")
        if not 0.0 < self.ema_fast_decay < 1.0 or not 0.0 < self.ema_slow_decay < 1.0:
            raise ValueError("EMA decays must lie in (0, 1)")
        if self.ema_fast_decay >= self.ema_slow_decay:
            raise ValueError("ema_fast_decay must be smaller than ema_slow_decay")

    @property
    def anchor_steps(self) -> int:
        return self.anchor_epochs * self.steps_per_epoch

    @property
    def ramp_end_step(self) -> int:
        return (self.anchor_epochs + self.ramp_epochs) * self.steps_per_epoch

    @property
    def total_steps(self) -> int:
        return (self.anchor_epochs + self.ramp_epochs + self.stabilize_epochs) * self.steps_per_epoch


@dataclass
class CurriculumState:
    """Single-owner mutable scheduler state; one instance per training run."""

    config: CurriculumConfig
    phase: Phase
    global_step: int = 0
    alpha: float = 0.0
    ema_slow: float | None = None
    ema_fast: float | None = None

    @property
    def initialized(self) -> bool:
        return self.ema_slow is not None

    def snapshot(self) -> dict:
        return {
            "phase": self.phase.value,
            "step": self.global_step,
            "alpha": self.alpha,
            "ema_slow": self.ema_slow,
            "ema_fast": self.ema_fast,
        }


def phase_of(config: CurriculumConfig, global_step: int) -> Phase:
    """Phase governing a given step index."""
    if not 0 <= global_step < config.total_steps:
        raise ValueError(f"step {global_step} outside the schedule (total {config.total_steps})")
    if global_step < config.anchor_steps:
        return Phase.ANCHOR
    if global_step < config.ramp_end_step:
        return Phase.RAMP
    return Phase.STABILIZE


def scheduler_new(config: CurriculumConfig) -> CurriculumState:
    """Fresh state at step 0 with alpha 0 and EMAs untracked."""
    return CurriculumState(config=config, phase=phase_of(config, 0))


def state_from_snapshot(config: CurriculumConfig, snap: dict) -> CurriculumState:
    """Rebuild a state from its snapshot() dict for checkpoint resume."""
    phase = Phase(snap["phase"])
    ema_slow = snap["ema_slow"]
    ema_fast = snap["ema_fast"]
    if (ema_slow is None) != (ema_fast is None):
        raise ValueError("both EMAs must be set or both unset")
    state = CurriculumState(
        config=config,
        phase=phase,
        global_step=int(snap["step"]),
        alpha=float(snap["alpha"]),
        ema_slow=None if ema_slow is None else float(ema_slow),
        ema_fast=None if ema_fast is None else float(ema_fast),
    )
    if not 0.0 <= state.alpha <= config.alpha_target + 1e-12:
        raise ValueError(f"snapshot alpha {state.alpha} outside [0, alpha_target]")
    return state


def scheduler_step(state: CurriculumState, observed_rw_loss: float) -> float:
    """Advance one step given the contrastive-term loss of the step just run.

    Returns the alpha to use for the next step. EMA tracking starts at the
    first ramp step; both averages begin at the first observed value, so the
    first ramp increment runs at the full 1.5x speed factor.
    """
    observed = float(observed_rw_loss)
    if not math.isfinite(observed) or observed < 0.0:
        raise ValueError(f"observed loss must be finite and >= 0, got {observed_rw_loss}")
    cfg = state.config
    if state.global_step >= cfg.total_steps:
        raise RuntimeError(f"schedule exhausted after {cfg.total_steps} steps")

    phase = phase_of(cfg, state.global_step)
    if phase is Phase.ANCHOR:
        state.alpha = 0.0
    elif phase is Phase.RAMP:
        if state.ema_slow is None:
            state.ema_slow = observed
            state.ema_fast = observed
        else:
            sd, fd = cfg.ema_slow_decay, cfg.ema_fast_decay
            state.ema_slow = sd * state.ema_slow + (1.0 - sd) * observed
            state.ema_fast = fd * state.ema_fast + (1.0 - fd) * observed
        remaining = cfg.ramp_end_step - state.global_step
        if remaining == 1:
            state.alpha = cfg.alpha_target
        else:
            if state.ema_slow == 0.0:
                rho = 1.0
            else:
                rho = min(max(state.ema_fast / state.ema_slow, 0.0), 2.0)
            s = rho if rho <= 1.0 else 2.0 - rho
            state.alpha = state.alpha + (cfg.alpha_target - state.alpha) / remaining * (0.5 + s)
    else:
        state.alpha = cfg.alpha_target

    state.global_step += 1
    if state.global_step < cfg.total_steps:
        state.phase = phase_of(cfg, state.global_step)
    else:
        state.phase = phase
    return state.alpha
