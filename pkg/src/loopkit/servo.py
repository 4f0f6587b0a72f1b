"""Planar grasp-alignment servo: proportional control laws driving a
simulated camera until the target sits at the image center, oriented along
the image x axis (or the nearest horizontal configuration for symmetric
objects), plus a discrete-time closed-loop simulator.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import TWO_PI, wrap_angle

__all__ = [
    "ServoState",
    "Gains",
    "TrajectoryPoint",
    "SimulationResult",
    "translational_error",
    "rotational_error",
    "rotational_error_sym",
    "step",
    "simulate",
    "write_trajectory_csv",
]


def _sign(x: float) -> float:
    """Sign with sign(0) = 1, per the control-law convention."""
    return 1.0 if x >= 0.0 else -1.0


@dataclass(frozen=True)
class ServoState:
    """Camera pose, target pose and the image center, all in a shared
    planar world frame (units are pixels for convenience)."""

    camera_position: np.ndarray
    camera_heading: float
    target_position: np.ndarray
    target_theta: float
    image_center: np.ndarray = field(default_factory=lambda: np.array([160.0, 120.0]))

    def __post_init__(self):
        object.__setattr__(
            self, "camera_position", np.asarray(self.camera_position, dtype=float).reshape(2)
        )
        object.__setattr__(
            self, "target_position", np.asarray(self.target_position, dtype=float).reshape(2)
        )
        object.__setattr__(
            self, "image_center", np.asarray(self.image_center, dtype=float).reshape(2)
        )

    @property
    def relative_theta(self) -> float:
        """Target orientation as seen in the camera image, in [0, 2*pi)."""
        return wrap_angle(self.target_theta - self.camera_heading)

    def object_image_position(self) -> np.ndarray:
        """Target position in image coordinates of the current camera."""
        c, s = math.cos(-self.camera_heading), math.sin(-self.camera_heading)
        d = self.target_position - self.camera_position
        return self.image_center + np.array([c * d[0] - s * d[1], s * d[0] + c * d[1]])


@dataclass(frozen=True)
class Gains:
    k_pt: float = 1.0
    k_ptheta: float = 1.0
    dt: float = 0.05

    def __post_init__(self):
        if not (self.k_pt >= 0 and self.k_ptheta >= 0 and self.dt > 0):
            raise ValueError("gains must be non-negative, dt positive")


def translational_error(state: ServoState) -> np.ndarray:
    """Image-space offset of the target from the image center."""
    return state.object_image_position() - state.image_center


def rotational_error(theta: float) -> float:
    """-sign(sin(theta)) * (cos(theta) - 1); single equilibrium at 0."""
    return -_sign(math.sin(theta)) * (math.cos(theta) - 1.0)


def rotational_error_sym(theta: float) -> float:
    """sign(tan(theta)) * |sin(theta)|; equilibria at 0 and pi.

    Evaluated through the pi-periodic reduction of theta so that
    sign(tan(theta)) never touches the tan singularity and both equilibria
    are exact; sign(0) = 1.
    """
    m = math.fmod(theta, math.pi)
    if m < 0.0:
        m += math.pi
    return _sign(math.sin(m) * math.cos(m)) * abs(math.sin(m))


def step(state: ServoState, gains: Gains, symmetric: bool = False) -> ServoState:
    """One Euler step of the proportional law.

    The camera translates along the image-space error (expressed back in
    the world frame) and turns so the relative angle heads to its nearest
    equilibrium; both motions strictly reduce their error for K*dt < 1.
    """
    e_t = translational_error(state)
    rel = state.relative_theta
    e_th = rotational_error_sym(rel) if symmetric else rotational_error(rel)
    v = gains.k_pt * e_t
    omega = gains.k_ptheta * e_th
    c, s = math.cos(state.camera_heading), math.sin(state.camera_heading)
    world_step = np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]]) * gains.dt
    return ServoState(
        camera_position=state.camera_position + world_step,
        camera_heading=wrap_angle(state.camera_heading + omega * gains.dt),
        target_position=state.target_position,
        target_theta=state.target_theta,
        image_center=state.image_center,
    )


@dataclass(frozen=True)
class TrajectoryPoint:
    step: int
    error: np.ndarray
    relative_theta: float
    e_theta: float


@dataclass(frozen=True)
class SimulationResult:
    trajectory: tuple
    converged: bool
    steps: int
    final_state: ServoState


def _angular_distance_to_equilibrium(theta: float, symmetric: bool) -> float:
    d0 = abs(wrap_angle(theta + math.pi) - math.pi)
    if not symmetric:
        return d0
    return min(d0, abs(wrap_angle(theta) - math.pi))


def simulate(
    initial: ServoState,
    gains: Gains,
    symmetric: bool = False,
    max_steps: int = 10_000,
    tol_t: float = 0.5,
    tol_theta: float = math.radians(0.5),
    record_trajectory: bool = True,
) -> SimulationResult:
    """Iterate until both errors fall inside tolerance or the step budget
    runs out. Non-convergence is reported in the result, not raised.

    The loop runs on scalars for speed; it computes exactly what repeated
    ``step`` calls would (pinned by a test).
    """
    px, py = float(initial.camera_position[0]), float(initial.camera_position[1])
    heading = float(initial.camera_heading)
    tx, ty = float(initial.target_position[0]), float(initial.target_position[1])
    t_theta = float(initial.target_theta)
    k_pt, k_pth, dt = gains.k_pt, gains.k_ptheta, gains.dt
    err_fn = rotational_error_sym if symmetric else rotational_error

    traj = []
    converged = False
    steps = max_steps
    for i in range(max_steps + 1):
        c, s = math.cos(heading), math.sin(heading)
        dx, dy = tx - px, ty - py
        ex = c * dx + s * dy
        ey = -s * dx + c * dy
        rel = wrap_angle(t_theta - heading)
        e_th = err_fn(rel)
        if record_trajectory:
            traj.append(
                TrajectoryPoint(
                    step=i, error=np.array([ex, ey]), relative_theta=rel, e_theta=e_th
                )
            )
        if (
            math.hypot(ex, ey) < tol_t
            and _angular_distance_to_equilibrium(rel, symmetric) < tol_theta
        ):
            converged = True
            steps = i
            break
        if i == max_steps:
            break
        vx, vy = k_pt * ex * dt, k_pt * ey * dt
        px += c * vx - s * vy
        py += s * vx + c * vy
        heading = wrap_angle(heading + k_pth * e_th * dt)
    final = ServoState(
        camera_position=np.array([px, py]),
        camera_heading=heading,
        target_position=initial.target_position,
        target_theta=t_theta,
        image_center=initial.image_center,
    )
    return SimulationResult(
        trajectory=tuple(traj), converged=converged, steps=steps, final_state=final
    )


def write_trajectory_csv(path, result: SimulationResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "ex", "ey", "theta_deg", "e_theta"])
        for p in result.trajectory:
            writer.writerow(
                [
                    p.step,
                    f"{p.error[0]:.6f}",
                    f"{p.error[1]:.6f}",
                    f"{math.degrees(p.relative_theta):.6f}",
                    f"{p.e_theta:.9f}",
                ]
            )
