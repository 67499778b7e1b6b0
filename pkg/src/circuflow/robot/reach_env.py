"""Planar reaching environment for the two-link manipulator.

Each episode spawns a target at a random position inside an annulus around
the base; the policy commands joint torques and an episode succeeds once the
fingertip is within the distance threshold while both commanded torques are
simultaneously below the torque threshold (the arm has reached the target
and stopped).  Physics advances by semi-implicit Euler substeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import ManipulatorParams, _accel, _coefficients, fingertip

__all__ = ["EpisodeCriterion", "ManipulatorState", "ReachEnv", "observe"]


@dataclass(frozen=True)
class EpisodeCriterion:
    """Success test and episode shape.

    An episode counts as a success when fingertip-to-target distance is
    below ``distance_threshold`` while both joint torques stay below
    ``torque_threshold`` for ``success_window`` consecutive control steps
    (one step by default: reach and stop at the same instant).
    """

    distance_threshold: float = 0.04  # m
    torque_threshold: float = 0.005  # N*m
    max_steps: int = 50
    dt: float = 0.02  # control step, s
    substeps: int = 2  # physics substeps per control step
    success_window: int = 1

    def __post_init__(self):
        if self.distance_threshold <= 0 or self.torque_threshold <= 0:
            raise ValueError("thresholds must be positive")
        if self.max_steps < 1 or self.substeps < 1 or self.success_window < 1:
            raise ValueError("counts must be at least 1")


@dataclass(frozen=True)
class ManipulatorState:
    q: tuple[float, float]
    qd: tuple[float, float]
    target: tuple[float, float]
    t: float = 0.0
    steps: int = 0


def observe(state: ManipulatorState, params: ManipulatorParams) -> list[float]:
    """Eleven observation entries: joint trig, target, joint velocities, and
    the fingertip-to-target vector (zero third component for the plane)."""
    q1, q2 = state.q
    tip_x, tip_y = fingertip(state.q, params)
    return [
        math.cos(q1),
        math.cos(q2),
        math.sin(q1),
        math.sin(q2),
        state.target[0],
        state.target[1],
        state.qd[0],
        state.qd[1],
        tip_x - state.target[0],
        tip_y - state.target[1],
        0.0,
    ]


@dataclass
class ReachEnv:
    """Reaching task: torque-in, observation-out, with seeded target spawns.

    ``reward = -distance - action_cost * |tau|^2 + success_bonus * hit``,
    plus an optional smooth shaping term ``shaping_bonus * exp(-d/d_scale) *
    exp(-(|t1|+|t2|)/torque_scale)`` that rewards being close *and* quiet.
    Both bonuses default to zero (pure reacher reward, so a zero-torque
    policy at the target scores exactly 0); trainers switch them on because
    the hard reach-and-stop criterion alone is a cliff that derivative-free
    search cannot climb.
    """

    params: ManipulatorParams = field(default_factory=ManipulatorParams)
    criterion: EpisodeCriterion = field(default_factory=EpisodeCriterion)
    target_radius: float = 0.16
    target_exclusion: float = 0.01
    init_q: tuple[float, float] = (0.0, math.pi / 2.0)
    torque_limit: float = 0.05
    action_cost: float = 1.0
    success_bonus: float = 0.0
    shaping_bonus: float = 0.0
    shaping_distance_scale: float = 0.02
    shaping_torque_scale: float = 0.004

    def __post_init__(self):
        if self.target_radius > self.params.reach:
            raise ValueError("target radius exceeds the reachable envelope")
        if self.target_exclusion < self.params.inner_reach:
            raise ValueError("target exclusion lies inside the unreachable core")
        if self.torque_limit <= 0:
            raise ValueError("torque limit must be positive")
        self._c = _coefficients(self.params)

    # -- episode interface --------------------------------------------------

    def spawn_target(self, rng: np.random.Generator) -> tuple[float, float]:
        """Uniform over the annulus [exclusion, radius] about the base
        (inverse-CDF sampling, the same law as rejection inside the disk)."""
        r0sq = self.target_exclusion**2
        r = math.sqrt(r0sq + rng.random() * (self.target_radius**2 - r0sq))
        phi = rng.random() * 2.0 * math.pi
        return r * math.cos(phi), r * math.sin(phi)

    def reset(self, rng: np.random.Generator) -> ManipulatorState:
        return ManipulatorState(
            q=self.init_q, qd=(0.0, 0.0), target=self.spawn_target(rng)
        )

    def step(
        self, state: ManipulatorState, action: Sequence[float]
    ) -> tuple[ManipulatorState, float, bool, dict]:
        cr = self.criterion
        lim = self.torque_limit
        t1 = min(max(float(action[0]), -lim), lim)
        t2 = min(max(float(action[1]), -lim), lim)

        alpha, beta, delta, g_a, g_b = self._c
        b1, b2 = self.params.b1, self.params.b2
        q1, q2 = state.q
        qd1, qd2 = state.qd
        h = cr.dt / cr.substeps
        for _ in range(cr.substeps):
            a1, a2 = _accel(alpha, beta, delta, g_a, g_b, b1, b2, q1, q2, qd1, qd2, t1, t2)
            qd1 += a1 * h
            qd2 += a2 * h
            q1 += qd1 * h
            q2 += qd2 * h

        aborted = not (
            math.isfinite(q1) and math.isfinite(q2)
            and math.isfinite(qd1) and math.isfinite(qd2)
        )
        new_state = ManipulatorState(
            q=(q1, q2),
            qd=(qd1, qd2),
            target=state.target,
            t=state.t + cr.dt,
            steps=state.steps + 1,
        )

        tip_x, tip_y = fingertip(new_state.q, self.params)
        distance = math.hypot(tip_x - state.target[0], tip_y - state.target[1])
        quiet = abs(t1) < cr.torque_threshold and abs(t2) < cr.torque_threshold
        hit = distance < cr.distance_threshold and quiet and not aborted

        reward = -distance - self.action_cost * (t1 * t1 + t2 * t2)
        if hit:
            reward += self.success_bonus
        if self.shaping_bonus:
            reward += (
                self.shaping_bonus
                * math.exp(-distance / self.shaping_distance_scale)
                * math.exp(-(abs(t1) + abs(t2)) / self.shaping_torque_scale)
            )
        done = aborted or new_state.steps >= cr.max_steps
        info = {"distance": distance, "hit": hit, "aborted": aborted}
        return new_state, reward, done, info

    def rollout(self, policy, rng: np.random.Generator) -> dict:
        """One seeded episode; success needs ``success_window`` consecutive
        hitting steps.  Aborted (non-finite) episodes count as failures."""
        state = self.reset(rng)
        total_reward = 0.0
        consecutive = 0
        success = False
        distance = math.inf
        for _ in range(self.criterion.max_steps):
            action = policy.act(observe(state, self.params))
            state, reward, done, info = self.step(state, action)
            total_reward += reward
            distance = info["distance"]
            consecutive = consecutive + 1 if info["hit"] else 0
            if consecutive >= self.criterion.success_window:
                success = True
            if done:
                if info["aborted"]:
                    success = False
                break
        return {
            "return": total_reward,
            "success": success,
            "final_distance": distance,
            "steps": state.steps,
        }
