"""Planar two-link revolute-revolute manipulator dynamics.

Standard form M(q) q" + C(q, q') q' + g(q) + B q' = tau, with the Coriolis
matrix assembled from Christoffel symbols so that dM/dt - 2C is
skew-symmetric.  That structure is what makes the model energy-consistent:
along any trajectory, dE/dt = tau' q' - q'^T B q' holds to integration
accuracy, i.e. the manipulator behaves as a compartment whose energy balance
closes.

Joint angles are measured from the +x axis (q2 relative to link 1); gravity,
when nonzero, acts along -y.  Two inertia models: all link mass lumped at the
tip, or a uniform rod.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ManipulatorParams",
    "mass_matrix",
    "coriolis_matrix",
    "gravity_torque",
    "forward_dynamics",
    "fingertip",
    "total_energy",
    "integrate_dynamics",
    "passivity_residual",
]


@dataclass(frozen=True)
class ManipulatorParams:
    l1: float = 0.1  # m
    l2: float = 0.1
    m1: float = 0.05  # kg
    m2: float = 0.05
    inertia_model: str = "point_mass"  # "point_mass" | "uniform_rod"
    gravity: float = 0.0  # m/s^2; 0 for the horizontal-plane task
    b1: float = 0.001  # N*m*s viscous friction
    b2: float = 0.001

    def __post_init__(self):
        if min(self.l1, self.l2, self.m1, self.m2) <= 0:
            raise ValueError("lengths and masses must be positive")
        if self.b1 < 0 or self.b2 < 0:
            raise ValueError("friction must be nonnegative")
        if self.inertia_model not in ("point_mass", "uniform_rod"):
            raise ValueError(f"unknown inertia model {self.inertia_model!r}")

    @property
    def reach(self) -> float:
        return self.l1 + self.l2

    @property
    def inner_reach(self) -> float:
        return abs(self.l1 - self.l2)


def _coefficients(p: ManipulatorParams) -> tuple[float, float, float, float, float]:
    """(alpha, beta, delta, gA, gB): the five constants of the standard form."""
    if p.inertia_model == "point_mass":
        r1, r2 = p.l1, p.l2
        i1 = i2 = 0.0
    else:
        r1, r2 = 0.5 * p.l1, 0.5 * p.l2
        i1 = p.m1 * p.l1 * p.l1 / 12.0
        i2 = p.m2 * p.l2 * p.l2 / 12.0
    alpha = i1 + i2 + p.m1 * r1 * r1 + p.m2 * (p.l1 * p.l1 + r2 * r2)
    beta = p.m2 * p.l1 * r2
    delta = i2 + p.m2 * r2 * r2
    g_a = (p.m1 * r1 + p.m2 * p.l1) * p.gravity
    g_b = p.m2 * r2 * p.gravity
    return alpha, beta, delta, g_a, g_b


def mass_matrix(q: Sequence[float], params: ManipulatorParams) -> np.ndarray:
    """Symmetric positive definite inertia matrix M(q)."""
    alpha, beta, delta, _, _ = _coefficients(params)
    c2 = math.cos(q[1])
    off = delta + beta * c2
    return np.array([[alpha + 2.0 * beta * c2, off], [off, delta]])


def coriolis_matrix(
    q: Sequence[float], qd: Sequence[float], params: ManipulatorParams
) -> np.ndarray:
    """Christoffel-form C(q, q'); dM/dt - 2C is skew-symmetric."""
    _, beta, _, _, _ = _coefficients(params)
    h = beta * math.sin(q[1])
    return np.array([[-h * qd[1], -h * (qd[0] + qd[1])], [h * qd[0], 0.0]])


def gravity_torque(q: Sequence[float], params: ManipulatorParams) -> np.ndarray:
    _, _, _, g_a, g_b = _coefficients(params)
    c12 = math.cos(q[0] + q[1])
    return np.array([g_a * math.cos(q[0]) + g_b * c12, g_b * c12])


def forward_dynamics(
    q: Sequence[float],
    qd: Sequence[float],
    tau: Sequence[float],
    params: ManipulatorParams,
) -> tuple[float, float]:
    """Joint accelerations q" = M^-1 (tau - C q' - g - B q')."""
    alpha, beta, delta, g_a, g_b = _coefficients(params)
    return _accel(
        alpha, beta, delta, g_a, g_b, params.b1, params.b2,
        q[0], q[1], qd[0], qd[1], tau[0], tau[1],
    )


def _accel(alpha, beta, delta, g_a, g_b, b1, b2, q1, q2, qd1, qd2, t1, t2):
    """Float-only inner kernel shared with the environment stepper."""
    c2 = math.cos(q2)
    s2 = math.sin(q2)
    m11 = alpha + 2.0 * beta * c2
    m12 = delta + beta * c2
    h = beta * s2
    c12 = math.cos(q1 + q2)
    rhs1 = t1 + h * qd2 * (2.0 * qd1 + qd2) - g_a * math.cos(q1) - g_b * c12 - b1 * qd1
    rhs2 = t2 - h * qd1 * qd1 - g_b * c12 - b2 * qd2
    det = m11 * delta - m12 * m12
    return (delta * rhs1 - m12 * rhs2) / det, (m11 * rhs2 - m12 * rhs1) / det


def fingertip(q: Sequence[float], params: ManipulatorParams) -> tuple[float, float]:
    """Tip of the second link in the base frame."""
    x = params.l1 * math.cos(q[0]) + params.l2 * math.cos(q[0] + q[1])
    y = params.l1 * math.sin(q[0]) + params.l2 * math.sin(q[0] + q[1])
    return x, y


def total_energy(
    q: Sequence[float], qd: Sequence[float], params: ManipulatorParams
) -> float:
    """Kinetic plus gravitational potential energy."""
    alpha, beta, delta, g_a, g_b = _coefficients(params)
    c2 = math.cos(q[1])
    m11 = alpha + 2.0 * beta * c2
    m12 = delta + beta * c2
    kinetic = 0.5 * (m11 * qd[0] ** 2 + 2.0 * m12 * qd[0] * qd[1] + delta * qd[1] ** 2)
    potential = g_a * math.sin(q[0]) + g_b * math.sin(q[0] + q[1])
    return kinetic + potential


def integrate_dynamics(
    params: ManipulatorParams,
    q0: Sequence[float],
    qd0: Sequence[float],
    torque_fn: Callable[[float, tuple[float, float], tuple[float, float]], tuple[float, float]],
    dt: float,
    n_steps: int,
) -> dict:
    """RK4 integration of the joint dynamics with the supplied power input
    integral riding along in the state, so the energy balance can be audited
    at the integrator's own quadrature.

    Returns arrays ``t``, ``q``, ``qd``, ``energy``, and the running integral
    of tau' q' - q'^T B q' as ``work``.
    """
    coeffs = _coefficients(params)
    alpha, beta, delta, g_a, g_b = coeffs
    b1, b2 = params.b1, params.b2

    def f(t, state):
        q1, q2, qd1, qd2, _ = state
        t1, t2 = torque_fn(t, (q1, q2), (qd1, qd2))
        a1, a2 = _accel(alpha, beta, delta, g_a, g_b, b1, b2, q1, q2, qd1, qd2, t1, t2)
        power = t1 * qd1 + t2 * qd2 - b1 * qd1 * qd1 - b2 * qd2 * qd2
        return (qd1, qd2, a1, a2, power)

    state = (float(q0[0]), float(q0[1]), float(qd0[0]), float(qd0[1]), 0.0)
    times = np.empty(n_steps + 1)
    qs = np.empty((n_steps + 1, 2))
    qds = np.empty((n_steps + 1, 2))
    energy = np.empty(n_steps + 1)
    work = np.empty(n_steps + 1)

    def record(i, t, s):
        times[i] = t
        qs[i] = s[0], s[1]
        qds[i] = s[2], s[3]
        energy[i] = total_energy((s[0], s[1]), (s[2], s[3]), params)
        work[i] = s[4]

    record(0, 0.0, state)
    half = 0.5 * dt
    sixth = dt / 6.0
    for i in range(n_steps):
        t = i * dt
        k1 = f(t, state)
        k2 = f(t + half, tuple(s + half * k for s, k in zip(state, k1)))
        k3 = f(t + half, tuple(s + half * k for s, k in zip(state, k2)))
        k4 = f(t + dt, tuple(s + dt * k for s, k in zip(state, k3)))
        state = tuple(
            s + sixth * (a + 2.0 * (b + c) + d)
            for s, a, b, c, d in zip(state, k1, k2, k3, k4)
        )
        record(i + 1, t + dt, state)

    return {"t": times, "q": qs, "qd": qds, "energy": energy, "work": work}


def passivity_residual(trajectory: dict) -> float:
    """Worst violation of E(t) - E(0) = integral of supplied power along an
    integrated trajectory (absolute, in joules)."""
    drift = trajectory["energy"] - trajectory["energy"][0] - trajectory["work"]
    return float(np.max(np.abs(drift)))
