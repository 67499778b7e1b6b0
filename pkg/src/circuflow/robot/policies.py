"""Torque policies for the reaching task.

A policy is a pure mapping from the 11-entry observation to a torque pair.
Three families: the zero policy (baseline and geometric-oracle probe), an
inverse-kinematics PD servo with torque fade-out (classical oracle used to
validate the evaluator), and a small feed-forward network whose flat
parameter vector is what derivative-free search optimizes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .dynamics import ManipulatorParams

__all__ = [
    "Policy",
    "ZeroPolicy",
    "PDReachPolicy",
    "MLPPolicy",
    "save_policy",
    "load_policy",
]

POLICY_FORMAT = "circuflow-policy/1"


class Policy(Protocol):
    def act(self, obs: Sequence[float]) -> tuple[float, float]: ...


class ZeroPolicy:
    """Commands nothing; succeeds exactly when the target spawns within the
    distance threshold of the resting fingertip."""

    def act(self, obs: Sequence[float]) -> tuple[float, float]:
        return 0.0, 0.0


def _wrap(angle: float) -> float:
    return math.atan2(math.sin(angle), math.cos(angle))


@dataclass
class PDReachPolicy:
    """Critically-damped joint servo toward the analytic inverse-kinematics
    solution, with torque fading out near the target so the arm both reaches
    and goes quiet."""

    params: ManipulatorParams
    kp: float = 0.1
    kd: float = 0.015
    fade_distance: float = 0.05  # m; torque tapers linearly inside
    torque_limit: float = 0.05

    def act(self, obs: Sequence[float]) -> tuple[float, float]:
        q1 = math.atan2(obs[2], obs[0])
        q2 = math.atan2(obs[3], obs[1])
        qd1, qd2 = obs[6], obs[7]
        tx, ty = obs[4], obs[5]
        distance = math.hypot(obs[8], obs[9])

        l1, l2 = self.params.l1, self.params.l2
        r_sq = tx * tx + ty * ty
        cos_q2 = (r_sq - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
        cos_q2 = min(1.0, max(-1.0, cos_q2))
        # Keep the elbow on its current side to avoid flipping mid-reach.
        q2_star = math.copysign(math.acos(cos_q2), q2 if q2 != 0.0 else 1.0)
        q1_star = math.atan2(ty, tx) - math.atan2(
            l2 * math.sin(q2_star), l1 + l2 * math.cos(q2_star)
        )

        fade = min(1.0, distance / self.fade_distance)
        t1 = fade * (self.kp * _wrap(q1_star - q1) - self.kd * qd1)
        t2 = fade * (self.kp * _wrap(q2_star - q2) - self.kd * qd2)
        lim = self.torque_limit
        return min(max(t1, -lim), lim), min(max(t2, -lim), lim)


class MLPPolicy:
    """tanh feed-forward network: 11 observations -> hidden layers -> two
    torques scaled to the actuator limit.

    Observations are rescaled to order one before the first layer (targets
    and fingertip offsets live at +-0.2 m while joint velocities span several
    rad/s; without the rescaling, search has to discover the scale imbalance
    on its own).
    """

    OBS_SCALE = (1.0, 1.0, 1.0, 1.0, 5.0, 5.0, 0.2, 0.2, 5.0, 5.0, 1.0)

    def __init__(
        self,
        hidden: Sequence[int] = (8,),
        torque_limit: float = 0.05,
        flat: np.ndarray | None = None,
    ):
        self.hidden = tuple(int(h) for h in hidden)
        self.torque_limit = float(torque_limit)
        self.shapes: list[tuple[int, int]] = []
        sizes = [11, *self.hidden, 2]
        for n_in, n_out in zip(sizes, sizes[1:]):
            self.shapes.append((n_out, n_in))  # weight
            self.shapes.append((n_out, 1))  # bias
        self.n_params = sum(r * c for r, c in self.shapes)
        self._scale = np.array(self.OBS_SCALE)
        self._layers: list[tuple[np.ndarray, np.ndarray]] = []
        self.set_flat(np.zeros(self.n_params) if flat is None else flat)

    def set_flat(self, flat: Sequence[float]) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {flat.shape}")
        self.flat = flat.copy()
        self._layers = []
        offset = 0
        for (w_shape, b_shape) in zip(self.shapes[::2], self.shapes[1::2]):
            w_size = w_shape[0] * w_shape[1]
            w = self.flat[offset : offset + w_size].reshape(w_shape)
            offset += w_size
            b = self.flat[offset : offset + b_shape[0]]
            offset += b_shape[0]
            self._layers.append((w, b))

    def act(self, obs: Sequence[float]) -> tuple[float, float]:
        x = np.asarray(obs, dtype=float) * self._scale
        last = len(self._layers) - 1
        for i, (w, b) in enumerate(self._layers):
            x = w @ x + b
            if i < last:
                np.tanh(x, out=x)
        out = np.tanh(x) * self.torque_limit
        return float(out[0]), float(out[1])


def save_policy(policy, path) -> None:
    if isinstance(policy, MLPPolicy):
        doc = {
            "format": POLICY_FORMAT,
            "type": "mlp",
            "hidden": list(policy.hidden),
            "torque_limit": policy.torque_limit,
            "params": [float(v) for v in policy.flat],
        }
    elif isinstance(policy, ZeroPolicy):
        doc = {"format": POLICY_FORMAT, "type": "zero"}
    else:
        raise TypeError(f"cannot serialize policy of type {type(policy).__name__}")
    Path(path).write_text(json.dumps(doc) + "\n")


def load_policy(path) -> Policy:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != POLICY_FORMAT:
        raise ValueError(f"unsupported policy format {doc.get('format')!r}")
    if doc["type"] == "zero":
        return ZeroPolicy()
    if doc["type"] == "mlp":
        policy = MLPPolicy(hidden=doc["hidden"], torque_limit=doc["torque_limit"])
        policy.set_flat(np.array(doc["params"], dtype=float))
        return policy
    raise ValueError(f"unknown policy type {doc['type']!r}")
