"""Motion controllers: LQR stabilizer + per-wheel PID, and differential steering.

Straight paths use a combined controller: three PID loops track the commanded
wheel rate while an LQR gain, synthesized from the body's stabilizing
subsystem [phi, psi, phi_dot, psi_dot], corrects the per-motor voltages to
regulate the rotations to zero. Non-straight configurations use a trajectory
generator that commands differential wheel rates and an error check that ends
the turn once the accumulated rotation reaches the target.

The Riccati equation is solved in-process: a matrix-sign iteration on the
Hamiltonian provides the stabilizing solution, refined by Newton-Kleinman
steps until the residual passes the synthesis threshold.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .plant import PlantConfig, RobotState
from .protocol import JunctionConfig, JunctionKind

ROTATION_TOLERANCE_RAD = math.radians(0.5)
STEER_TIMEOUT_S = 60.0
BEND_DIAMETER_RANGE_IN = (9.0, 22.0)
TJUNCTION_DIAMETER_RANGE_IN = (9.0, 15.0)
_IN = 0.0254


class SynthesisError(RuntimeError):
    """LQR synthesis failed (non-convergence, residual, or unstable loop)."""


class SteeringTimeoutError(RuntimeError):
    """Rotation target not reached within the plan's time budget."""


class ConfigurationError(ValueError):
    """Junction configuration outside the ranges the robot can negotiate."""


class ControlPhase(enum.Enum):
    IDLE = "idle"
    STRAIGHT_CRUISE = "straight_cruise"
    HOLD_STABILIZE = "hold_stabilize"
    STEER = "steer"


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float = 0.0
    integral_clamp: float = 3.0
    output_clamp: float = 12.0


@dataclass(frozen=True)
class LqrGains:
    """Synthesized stabilizer gain with its synthesis diagnostics."""

    K: tuple[tuple[float, float, float, float], ...]  # 3x4
    Q: tuple[tuple[float, ...], ...]
    R: tuple[tuple[float, ...], ...]
    riccati_residual: float
    closed_loop_eigs: tuple[complex, ...]


def _check_weight_matrices(Q: np.ndarray, R: np.ndarray) -> None:
    if not np.allclose(Q, Q.T, atol=1e-10):
        raise ValueError("Q must be symmetric")
    if not np.allclose(R, R.T, atol=1e-10):
        raise ValueError("R must be symmetric")
    if np.linalg.eigvalsh(Q).min() < -1e-10:
        raise ValueError("Q must be positive semidefinite")
    if np.linalg.eigvalsh(R).min() <= 0:
        raise ValueError("R must be positive definite")


def solve_care(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    max_sign_iter: int = 100,
    max_newton_iter: int = 50,
) -> np.ndarray:
    """Stabilizing solution of A'P + PA - P B R^-1 B' P + Q = 0.

    Matrix-sign iteration with determinant scaling seeds Newton-Kleinman
    refinement; each refinement step solves a Lyapunov equation through its
    Kronecker form (state dimensions here are small).
    """
    n = A.shape[0]
    r_inv = np.linalg.inv(R)
    G = B @ r_inv @ B.T
    H = np.block([[A, -G], [-Q, -A.T]])
    Z = H.copy()
    converged = False
    for _ in range(max_sign_iter):
        det = abs(np.linalg.det(Z))
        scale = det ** (-1.0 / (2 * n)) if det > 0 else 1.0
        zs = scale * Z
        try:
            z_next = 0.5 * (zs + np.linalg.inv(zs))
        except np.linalg.LinAlgError as exc:
            raise SynthesisError(f"sign iteration hit a singular iterate: {exc}") from exc
        delta = np.linalg.norm(z_next - Z, "fro")
        Z = z_next
        if delta <= 1e-12 * max(1.0, np.linalg.norm(Z, "fro")):
            converged = True
            break
    if not converged:
        raise SynthesisError("matrix-sign iteration did not converge; pair may not be stabilizable")
    stable_proj = 0.5 * (np.eye(2 * n) - Z)
    u, _, _ = np.linalg.svd(stable_proj)
    basis = u[:, :n]
    x1, x2 = basis[:n, :], basis[n:, :]
    try:
        P = x2 @ np.linalg.inv(x1)
    except np.linalg.LinAlgError as exc:
        raise SynthesisError("stable subspace is not a graph over the state space") from exc
    P = 0.5 * (P + P.T)
    eye = np.eye(n)
    for _ in range(max_newton_iter):
        K = r_inv @ B.T @ P
        a_cl = A - B @ K
        rhs = -(Q + K.T @ R @ K)
        lhs = np.kron(eye, a_cl.T) + np.kron(a_cl.T, eye)
        try:
            p_next = np.linalg.solve(lhs, rhs.reshape(-1)).reshape(n, n)
        except np.linalg.LinAlgError as exc:
            raise SynthesisError(f"Lyapunov solve failed: {exc}") from exc
        P = 0.5 * (p_next + p_next.T)
        if care_residual(A, B, Q, R, P) < 1e-12 * max(1.0, np.linalg.norm(P, "fro")):
            break
    return P


def care_residual(A, B, Q, R, P) -> float:
    G = B @ np.linalg.inv(R) @ B.T
    return float(np.linalg.norm(A.T @ P + P @ A - P @ G @ P + Q, "fro"))


def synthesize_lqr(
    A_s,
    B_s,
    Q,
    R,
    residual_tol: float = 1e-8,
) -> LqrGains:
    """Synthesize the stabilizer gain K = R^-1 B' P and assert the loop is stable."""
    A = np.asarray(A_s, dtype=float)
    B = np.asarray(B_s, dtype=float)
    Qm = np.asarray(Q, dtype=float)
    Rm = np.asarray(R, dtype=float)
    _check_weight_matrices(Qm, Rm)
    P = solve_care(A, B, Qm, Rm)
    residual = care_residual(A, B, Qm, Rm, P)
    if residual > residual_tol:
        raise SynthesisError(f"Riccati residual {residual:.3e} exceeds {residual_tol:.1e}")
    K = np.linalg.inv(Rm) @ B.T @ P
    eigs = np.linalg.eigvals(A - B @ K)
    if eigs.real.max() >= 0:
        raise SynthesisError(f"closed loop not stable: eigenvalues {eigs}")
    return LqrGains(
        K=tuple(tuple(float(v) for v in row) for row in K),
        Q=tuple(tuple(float(v) for v in row) for row in Qm),
        R=tuple(tuple(float(v) for v in row) for row in Rm),
        riccati_residual=residual,
        closed_loop_eigs=tuple(complex(e) for e in eigs),
    )


DEFAULT_LQR_WEIGHTS = {
    "Q": ((10.0, 0.0, 0.0, 0.0), (0.0, 10.0, 0.0, 0.0), (0.0, 0.0, 1.0, 0.0), (0.0, 0.0, 0.0, 1.0)),
    "R": ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
}
DEFAULT_PID_GAINS = PidGains(kp=6.0, ki=12.0, kd=0.0, integral_clamp=3.0, output_clamp=12.0)


class Pid:
    """Scalar PID with conditional integration and a hard integral clamp."""

    def __init__(self, gains: PidGains):
        self.g = gains
        self.integral = 0.0
        self.last_error = 0.0

    def reset(self) -> None:
        self.integral = 0.0
        self.last_error = 0.0

    def step(self, error: float, dt: float) -> float:
        g = self.g
        derivative = (error - self.last_error) / dt
        raw = g.kp * error + g.ki * self.integral + g.kd * derivative
        saturated_high = raw > g.output_clamp
        saturated_low = raw < -g.output_clamp
        # anti-windup: do not integrate further into saturation
        if not ((saturated_high and error > 0) or (saturated_low and error < 0)):
            self.integral += error * dt
            clamp = g.integral_clamp
            if self.integral > clamp:
                self.integral = clamp
            elif self.integral < -clamp:
                self.integral = -clamp
        self.last_error = error
        out = g.kp * error + g.ki * self.integral + g.kd * derivative
        if out > g.output_clamp:
            return g.output_clamp
        if out < -g.output_clamp:
            return -g.output_clamp
        return out


class CruiseController:
    """Velocity tracking + stabilization for straight paths.

    step() returns the three motor voltage commands: PID on the wheel-rate
    error minus the LQR correction on [phi, psi, phi_dot, psi_dot], clamped to
    the supply voltage.
    """

    def __init__(self, lqr: LqrGains, pid: PidGains, plant: PlantConfig):
        self.k_rows = tuple(tuple(row) for row in lqr.K)
        self.pids = (Pid(pid), Pid(pid), Pid(pid))
        self.wheel_radius = plant.wheel_radius
        self.v_n = plant.V_n

    def reset(self) -> None:
        for p in self.pids:
            p.reset()

    def step(self, state: RobotState, v_desired: float, dt: float) -> tuple[float, float, float]:
        w_cmd = v_desired / self.wheel_radius
        phi, psi, phid, psid = state.phi, state.psi, state.phi_dot, state.psi_dot
        out = []
        for i in range(3):
            k = self.k_rows[i]
            correction = k[0] * phi + k[1] * psi + k[2] * phid + k[3] * psid
            v = self.pids[i].step(w_cmd - state.wheel_rates[i], dt) - correction
            if v > self.v_n:
                v = self.v_n
            elif v < -self.v_n:
                v = -self.v_n
            out.append(v)
        return (out[0], out[1], out[2])


@dataclass(frozen=True)
class SteeringPlan:
    """Differential-rotation plan for one junction.

    wheel_directions is the signed per-wheel pattern of the differential
    motion; coupling maps actual wheel rates to the body rotation rate about
    the target axis (scaled by wheel_radius / turn_radius).
    """

    target_axis: str  # "y" or "z"
    target_rotation: float  # rad, signed
    turn_radius: float  # m
    wheel_directions: tuple[float, float, float] = (0.0, 1.0, -1.0)
    coupling: tuple[float, float, float] = (0.0, 0.5, -0.5)
    max_rotation_rate: float = 0.8  # rad/s
    error_gain: float = 2.0  # 1/s, taper of the rate command near the target
    tolerance: float = ROTATION_TOLERANCE_RAD
    timeout_s: float = STEER_TIMEOUT_S


def turn_angle_for(config: JunctionConfig) -> float:
    if config.kind is JunctionKind.STRAIGHT:
        return 0.0
    if config.kind is JunctionKind.BEND45:
        return math.radians(45.0)
    if config.kind is JunctionKind.BEND90:
        return math.radians(90.0)
    if config.kind is JunctionKind.BEND135:
        return math.radians(135.0)
    if config.kind is JunctionKind.T_JUNCTION:
        sign = 1.0 if config.branch == "left" else -1.0
        return sign * math.radians(90.0)
    raise ConfigurationError(f"no turn defined for {config!r}")


def steering_plan_for(config: JunctionConfig, diameter_m: float) -> SteeringPlan:
    """Build the turn plan for a junction, enforcing the supported size ranges."""
    d_in = diameter_m / _IN
    if config.kind is JunctionKind.T_JUNCTION:
        lo, hi = TJUNCTION_DIAMETER_RANGE_IN
        if not lo <= d_in <= hi:
            raise ConfigurationError(
                f"T-junction at {d_in:.1f} in outside supported {lo:.0f}-{hi:.0f} in"
            )
    else:
        lo, hi = BEND_DIAMETER_RANGE_IN
        if not lo <= d_in <= hi:
            raise ConfigurationError(
                f"bend at {d_in:.1f} in outside supported {lo:.0f}-{hi:.0f} in"
            )
    return SteeringPlan(
        target_axis="z",
        target_rotation=turn_angle_for(config),
        turn_radius=diameter_m / 2.0,
    )


class SteeringController:
    """Trajectory generator + error check for one turn.

    Each step integrates the accumulated body rotation from the observed
    wheel rates, commands tapered differential wheel rates toward the target,
    and reports done once the remaining error is inside the tolerance.
    """

    def __init__(self, plan: SteeringPlan, pid: PidGains, plant: PlantConfig):
        self.plan = plan
        self.pids = (Pid(pid), Pid(pid), Pid(pid))
        self.plant = plant
        self.accumulated = 0.0
        self.elapsed = 0.0
        self.done = plan.target_rotation == 0.0

    def rotation_rate(self, wheel_rates: tuple[float, float, float]) -> float:
        c = self.plan.coupling
        differential = c[0] * wheel_rates[0] + c[1] * wheel_rates[1] + c[2] * wheel_rates[2]
        return differential * self.plant.wheel_radius / self.plan.turn_radius

    def step(self, state: RobotState, dt: float) -> tuple[tuple[float, float, float], bool]:
        if self.done:
            return (0.0, 0.0, 0.0), True
        self.accumulated += self.rotation_rate(state.wheel_rates) * dt
        self.elapsed += dt
        error = self.plan.target_rotation - self.accumulated
        if abs(error) < self.plan.tolerance:
            self.done = True
            return (0.0, 0.0, 0.0), True
        if self.elapsed > self.plan.timeout_s:
            raise SteeringTimeoutError(
                f"rotation stuck at {math.degrees(self.accumulated):.2f} deg "
                f"of {math.degrees(self.plan.target_rotation):.2f} deg"
            )
        rate = self.plan.error_gain * error
        cap = self.plan.max_rotation_rate
        if rate > cap:
            rate = cap
        elif rate < -cap:
            rate = -cap
        wheel_rate = rate * self.plan.turn_radius / self.plant.wheel_radius
        out = []
        for i in range(3):
            cmd = self.plan.wheel_directions[i] * wheel_rate
            v = self.pids[i].step(cmd - state.wheel_rates[i], dt)
            if v > self.plant.V_n:
                v = self.plant.V_n
            elif v < -self.plant.V_n:
                v = -self.plant.V_n
            out.append(v)
        return (out[0], out[1], out[2]), False


def wheel_spin_step(
    rates: tuple[float, float, float],
    torques: tuple[float, float, float],
    inertia: float,
    damping: float,
    dt: float,
) -> tuple[float, float, float]:
    """Per-wheel spin dynamics used while the body is braced for a turn."""
    out = []
    for w, tau in zip(rates, torques):
        out.append(w + (tau - damping * w) / inertia * dt)
    return (out[0], out[1], out[2])
