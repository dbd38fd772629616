"""Physical surrogate for the robot: linear body dynamics plus motor electrics.

The body model is a configurable 5-state linear system over
[x_dot, phi, psi, phi_dot, psi_dot] driven by the three wheel torques, with
the ambient flow speed entering as a constant disturbance on x_dot. Arc-length
position and wheel angles are integrated kinematically on top. Each gear motor
is a first-order armature-current model; torque is k_v times current.

Integration is explicit Euler at the configured step. All step functions are
deterministic value-type transforms: same inputs, bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

COLLAPSE_LIMIT_RAD = math.pi / 2


class CollapseError(RuntimeError):
    """Body rotation exceeded the recoverable range; the run is mission-fatal."""


@dataclass(frozen=True)
class RobotState:
    """Robot state at one simulation instant.

    x is arc-length along the current pipe segment; heading is the discrete
    segment index the robot is traversing.
    """

    x: float = 0.0
    x_dot: float = 0.0
    phi: float = 0.0
    psi: float = 0.0
    phi_dot: float = 0.0
    psi_dot: float = 0.0
    wheel_angles: tuple[float, float, float] = (0.0, 0.0, 0.0)
    wheel_rates: tuple[float, float, float] = (0.0, 0.0, 0.0)
    heading: int = 0

    def check_upright(self) -> None:
        if abs(self.phi) >= COLLAPSE_LIMIT_RAD or abs(self.psi) >= COLLAPSE_LIMIT_RAD:
            raise CollapseError(
                f"robot collapsed: phi={math.degrees(self.phi):.1f} deg, "
                f"psi={math.degrees(self.psi):.1f} deg"
            )


@dataclass(frozen=True)
class MotorState:
    """One gear-motor: armature current and the commanded terminal voltage."""

    i_m: float = 0.0
    v_co: float = 0.0


@dataclass(frozen=True)
class PlantConfig:
    """Body matrices, motor constants, and integration step.

    A is 5x5 over [x_dot, phi, psi, phi_dot, psi_dot]; B is 5x3 over the wheel
    torques. flow_gain scales how the ambient flow velocity V_f pushes x_dot.
    """

    A: tuple[tuple[float, ...], ...]
    B: tuple[tuple[float, ...], ...]
    flow_gain: float
    V_f: float
    R_m: float
    L_m: float
    k_v: float
    wheel_radius: float
    V_n: float
    dt: float
    wheel_inertia: float = 0.01  # kg m^2, spin dynamics while braced for a turn
    wheel_damping: float = 0.05  # N m s

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if len(self.A) != 5 or any(len(r) != 5 for r in self.A):
            raise ValueError("A must be 5x5")
        if len(self.B) != 5 or any(len(r) != 3 for r in self.B):
            raise ValueError("B must be 5x3")
        if min(self.R_m, self.L_m, self.k_v, self.wheel_radius, self.V_n) <= 0:
            raise ValueError("motor constants must be > 0")

    def stabilizing_submatrices(self):
        """(A_s 4x4, B_s 4x3) over [phi, psi, phi_dot, psi_dot]."""
        idx = (1, 2, 3, 4)
        a_s = tuple(tuple(self.A[i][j] for j in idx) for i in idx)
        b_s = tuple(tuple(self.B[i]) for i in idx)
        return a_s, b_s


def default_plant_config(dt: float = 1e-3, V_f: float = -0.3) -> PlantConfig:
    """Lightly damped default body with wheels mixed at 120 degree spacing.

    The angle channels are near-marginal oscillators so that the stabilizer
    has real work to do; the velocity channel relaxes toward the flow speed
    when undriven.
    """
    c_x, b_x = 0.8, 2.5
    wn2, z2w, eps = 4.0, 0.08, 0.3
    k_m = 2.0
    s3 = math.sqrt(3.0) / 2.0
    a = (
        (-c_x, 0.0, 0.0, 0.0, 0.0),
        (0.0, 0.0, 0.0, 1.0, 0.0),
        (0.0, 0.0, 0.0, 0.0, 1.0),
        (0.0, -wn2, eps, -z2w, 0.0),
        (0.0, eps, -wn2, 0.0, -z2w),
    )
    b = (
        (b_x, b_x, b_x),
        (0.0, 0.0, 0.0),
        (0.0, 0.0, 0.0),
        (0.0, -k_m * s3, k_m * s3),
        (k_m, -k_m * 0.5, -k_m * 0.5),
    )
    return PlantConfig(
        A=a,
        B=b,
        flow_gain=c_x,
        V_f=V_f,
        R_m=2.0,
        L_m=0.004,
        k_v=0.5,
        wheel_radius=0.05,
        V_n=12.0,
        dt=dt,
    )


def motor_step(state: MotorState, omega: float, cfg: PlantConfig, dt: float) -> MotorState:
    """Advance the armature current one explicit Euler step."""
    if not 0 < dt <= 0.010:
        raise ValueError("motor dt must be in (0, 10 ms]")
    di = (state.v_co - cfg.k_v * omega - cfg.R_m * state.i_m) / cfg.L_m
    i_new = state.i_m + di * dt
    if math.isnan(i_new):
        raise FloatingPointError("motor current became NaN")
    return replace(state, i_m=i_new)


def torque_from_current(currents: tuple[float, float, float], k_v: float):
    """Elementwise motor torque from armature current."""
    return (k_v * currents[0], k_v * currents[1], k_v * currents[2])


def body_step(
    state: RobotState,
    u: tuple[float, float, float],
    cfg: PlantConfig,
    dt: float,
) -> RobotState:
    """Advance the body one explicit Euler step under wheel torques u.

    Wheels are kinematically slaved to forward motion (rolling straight);
    raises CollapseError if either rotation leaves the recoverable range.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    s = (state.x_dot, state.phi, state.psi, state.phi_dot, state.psi_dot)
    a, b = cfg.A, cfg.B
    ds = [0.0] * 5
    for i in range(5):
        ai = a[i]
        bi = b[i]
        ds[i] = (
            ai[0] * s[0] + ai[1] * s[1] + ai[2] * s[2] + ai[3] * s[3] + ai[4] * s[4]
            + bi[0] * u[0] + bi[1] * u[1] + bi[2] * u[2]
        )
    ds[0] += cfg.flow_gain * cfg.V_f
    x_dot = s[0] + ds[0] * dt
    phi = s[1] + ds[1] * dt
    psi = s[2] + ds[2] * dt
    phi_dot = s[3] + ds[3] * dt
    psi_dot = s[4] + ds[4] * dt
    x = state.x + x_dot * dt
    w = x_dot / cfg.wheel_radius
    th = state.wheel_angles
    new = RobotState(
        x=x,
        x_dot=x_dot,
        phi=phi,
        psi=psi,
        phi_dot=phi_dot,
        psi_dot=psi_dot,
        wheel_angles=(th[0] + w * dt, th[1] + w * dt, th[2] + w * dt),
        wheel_rates=(w, w, w),
        heading=state.heading,
    )
    for v in (x, x_dot, phi, psi, phi_dot, psi_dot):
        if not math.isfinite(v):
            raise FloatingPointError("body state became non-finite")
    new.check_upright()
    return new
