"""Static sizing math for the wheel-press spring mechanism and the battery.

The robot presses three spring-loaded wheels against the pipe wall. The wheel
above the center of mass is the first to lose contact, so the spring stiffness
is sized from a moment balance about that arm's pivot: the spring must supply
enough wall normal force for pure rolling (no slip) at every pipe diameter the
arms can reach. The battery is sized from gear-motor power draw over the
planned operation duration.

All functions are pure and operate on plain value types; they are safe to call
from any thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

IN_TO_M = 0.0254

# Arm angle solver: bracket scan resolution and bisection tolerance.
_BRACKET_CELLS = 128
_ROOT_TOL_RAD = 1e-12


class GeometryError(ValueError):
    """Requested pipe size is unreachable by the arm geometry."""


class SingularConfigurationError(ValueError):
    """Stiffness is undefined at this arm angle (zero spring displacement)."""


@dataclass(frozen=True)
class ArmGeometry:
    """Geometry of one wheel arm and the mass share it carries.

    t: pivot offset of the spring lever (m)
    a: arm length from pivot to wheel axis (m)
    L: reach from pivot to the wheel contact point (m)
    m: robot mass carried by this arm (kg)
    """

    t: float
    a: float
    L: float
    m: float
    g: float = 9.81

    def __post_init__(self):
        for name in ("t", "a", "L"):
            if getattr(self, name) <= 0:
                raise ValueError(f"ArmGeometry.{name} must be > 0")
        if self.m < 0:
            raise ValueError("ArmGeometry.m must be >= 0")
        if self.t / self.a > 1.0:
            # arcsin((t/a) cos theta) must stay defined for all theta
            raise ValueError("ArmGeometry requires t <= a")


@dataclass(frozen=True)
class OperatingCondition:
    """Worst-case flow condition the springs are sized against.

    f_s_max defaults to one third of the total drag: the three wheels share
    the resistive load symmetrically.
    """

    mu_s: float
    drag_total: float = 26.1
    f_s_max: float | None = None
    robot_speed: float = 0.5
    flow_speed: float = 0.7
    line_pressure: float = 100e3

    def __post_init__(self):
        if not 0 < self.mu_s <= 2:
            raise ValueError("mu_s must be in (0, 2]")
        if self.f_s_max is None:
            object.__setattr__(self, "f_s_max", self.drag_total / 3.0)
        if self.f_s_max < 0:
            raise ValueError("f_s_max must be >= 0")

    @property
    def traction_per_wheel(self) -> float:
        return self.f_s_max


@dataclass
class StiffnessCurve:
    """Required stiffness at each sampled pipe diameter."""

    samples: list[tuple[float, float]] = field(default_factory=list)  # (diameter m, K N/m)

    def add(self, diameter_m: float, k: float) -> None:
        if not (math.isfinite(diameter_m) and math.isfinite(k)):
            raise ValueError("curve samples must be finite")
        if diameter_m <= 0 or k <= 0:
            raise ValueError("curve samples must be positive")
        self.samples.append((diameter_m, k))


@dataclass(frozen=True)
class BatterySpec:
    P: float  # per-motor power, W
    h: float  # operation duration, hours
    V_n: float  # operating voltage, V

    @property
    def capacity(self) -> float:
        return battery_capacity(self.P, self.h, self.V_n)


def normal_force_for_traction(f_s_max: float, mu_s: float) -> float:
    """Minimum wall normal force so that Coulomb friction supplies f_s_max."""
    if mu_s <= 0:
        raise ValueError("mu_s must be > 0")
    if f_s_max < 0:
        raise ValueError("f_s_max must be >= 0")
    return f_s_max / mu_s


def _angle_residual(geom: ArmGeometry, theta: float, half_gap: float) -> float:
    lhs = math.asin(half_gap / geom.L)
    rhs = -theta + math.asin((geom.t / geom.a) * math.cos(theta)) + math.pi / 2
    return rhs - lhs


def contact_angle(geom: ArmGeometry, half_gap: float) -> float:
    """Arm fold angle at which the wheel touches the wall at the given half-gap.

    Solves the trigonometric closure equation by bisection on (0, pi/2) after
    a bracket scan; the residual of the returned root is below 1e-10 rad.
    """
    if not 0 < half_gap <= geom.L:
        raise GeometryError(
            f"half gap {half_gap:.4f} m outside arm reach (0, {geom.L:.4f}]"
        )
    lo, hi = 1e-15, math.pi / 2
    f_lo = _angle_residual(geom, lo, half_gap)
    if abs(f_lo) < _ROOT_TOL_RAD:
        return lo
    step = (hi - lo) / _BRACKET_CELLS
    bracket = None
    x0, f0 = lo, f_lo
    for i in range(1, _BRACKET_CELLS + 1):
        x1 = lo + i * step
        f1 = _angle_residual(geom, x1, half_gap)
        if f1 == 0.0:
            return x1
        if f0 * f1 < 0:
            bracket = (x0, x1)
            break
        x0, f0 = x1, f1
    if bracket is None:
        raise GeometryError("geometry unreachable: no sign change on (0, pi/2)")
    x0, x1 = bracket
    f0 = _angle_residual(geom, x0, half_gap)
    while x1 - x0 > _ROOT_TOL_RAD:
        xm = 0.5 * (x0 + x1)
        fm = _angle_residual(geom, xm, half_gap)
        if f0 * fm <= 0:
            x1 = xm
        else:
            x0, f0 = xm, fm
    return 0.5 * (x0 + x1)


def arm_lean_angle(geom: ArmGeometry, theta: float) -> float:
    """Angle of the arm against the pipe axis for a given fold angle."""
    return -theta + math.asin((geom.t / geom.a) * math.cos(theta)) + math.pi / 2


def spring_displacement(geom: ArmGeometry, theta: float) -> float:
    """Linear spring stretch between the free position (theta = 0) and theta.

    The reference length under the square root uses the lean angle evaluated
    at the current fold angle; see the module notes on this convention.
    """
    if theta < 0:
        raise ValueError("theta must be >= 0")
    beta = arm_lean_angle(geom, theta)
    ref = math.hypot(geom.t + math.cos(beta), geom.a * math.sin(beta))
    return ref * (1.0 - math.cos(theta))


def required_stiffness(
    geom: ArmGeometry,
    cond: OperatingCondition,
    theta: float,
    half_gap: float,
    weight_term_sign: str = "normal_minus_weight",
) -> float:
    """Spring stiffness that keeps the critical wheel rolling at this angle.

    weight_term_sign selects the sign convention of the gravity term in the
    moment balance; the printed equation ("normal_minus_weight", the default)
    and its free-body counterpart ("weight_minus_normal") disagree.
    """
    u = spring_displacement(geom, theta)
    cos_t = math.cos(theta)
    if u == 0.0 or cos_t == 0.0:
        raise SingularConfigurationError(
            f"stiffness undefined at theta={theta:.6g} rad (zero displacement or lever)"
        )
    f_n = normal_force_for_traction(cond.f_s_max, cond.mu_s)
    weight = geom.m * geom.g
    if weight_term_sign == "normal_minus_weight":
        lever_force = f_n - weight
    elif weight_term_sign == "weight_minus_normal":
        lever_force = weight - f_n
    else:
        raise ValueError(f"unknown weight_term_sign {weight_term_sign!r}")
    alpha = math.asin((geom.t / geom.a) * math.cos(theta))
    numerator = lever_force * geom.a * math.cos(theta + alpha) - cond.f_s_max * half_gap
    return numerator / (geom.t * cos_t * u)


def stiffness_curve(
    geom: ArmGeometry,
    cond: OperatingCondition,
    diameters_m: list[float],
    weight_term_sign: str = "normal_minus_weight",
) -> StiffnessCurve:
    """Required stiffness over a sweep of pipe diameters."""
    curve = StiffnessCurve()
    for d in diameters_m:
        theta = contact_angle(geom, d / 2.0)
        k = required_stiffness(geom, cond, theta, d / 2.0, weight_term_sign)
        curve.add(d, k)
    return curve


def select_stiffness(curve: StiffnessCurve) -> float:
    """Largest required stiffness over the sweep (covers every diameter).

    Ties are broken toward the larger diameter.
    """
    if not curve.samples:
        raise ValueError("empty stiffness curve")
    best_d, best_k = curve.samples[0]
    for d, k in curve.samples[1:]:
        if k > best_k or (k == best_k and d > best_d):
            best_d, best_k = d, k
    return best_k


def battery_capacity(P: float, h: float, V_n: float) -> float:
    """Battery capacity (A.h) for three gear-motors of power P over h hours."""
    if P <= 0 or h <= 0 or V_n <= 0:
        raise ValueError("battery inputs must be > 0")
    return 3.0 * P * h / V_n


# Bundled defaults. The arm dimensions are calibrated so the selected
# stiffness over the 9-22 in sweep lands at 3.35 kN/m; they are inputs,
# not measured hardware values.
DEFAULT_GEOMETRY = ArmGeometry(t=0.015, a=0.3962, L=0.285, m=0.30)
DEFAULT_CONDITION = OperatingCondition(mu_s=0.8)
DEFAULT_BATTERY = BatterySpec(P=20.0, h=3.0, V_n=12.0)
DIAMETER_RANGE_IN = (9.0, 22.0)


def default_diameter_sweep(step_in: float = 0.5) -> list[float]:
    lo, hi = DIAMETER_RANGE_IN
    n = int(round((hi - lo) / step_in))
    return [(lo + i * step_in) * IN_TO_M for i in range(n + 1)]
