"""
Deterministic 2-D block pushing on the unit square.

A disc agent with damped velocity control pushes a square block into a
fixed square goal. The block translates when the agent overlaps it and
never rotates, so goal coverage is an exact polygon intersection.
"""
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

if TYPE_CHECKING:
    from envs.render import ScenePatch

AGENT_RADIUS = 0.025
BLOCK_SIDE = 0.10
GOAL_SIDE = 0.14
GOAL_CENTER = np.array([0.5, 0.5])
MAX_SPEED = 0.02
DAMPING = 0.5
SPAWN_ROTATION = math.radians(30.0)
BLOCK_SPAWN = (0.14, 0.86)
AGENT_SPAWN = (0.05, 0.95)
MAX_SPAWN_COVERAGE = 0.2
CONTACT_ITERATIONS = 4
SUCCESS_THRESHOLD = 0.9


@dataclass(frozen=True, eq=False)
class EnvState:
    agent_pos: np.ndarray
    agent_vel: np.ndarray
    block_pos: np.ndarray
    block_angle: float
    seed: int
    step: int = 0
    last_action: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def agent_state(self) -> np.ndarray:
        """Position and velocity, the low-dimensional part of an observation."""
        return np.concatenate([self.agent_pos, self.agent_vel])

    def same_as(self, other: "EnvState") -> bool:
        return (
            np.array_equal(self.agent_pos, other.agent_pos)
            and np.array_equal(self.agent_vel, other.agent_vel)
            and np.array_equal(self.block_pos, other.block_pos)
            and self.block_angle == other.block_angle
            and self.step == other.step
        )


# ============ Geometry ============

def rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def square_polygon(center: np.ndarray, side: float, angle: float = 0.0) -> np.ndarray:
    """Corners of a square in counter-clockwise order, shape (4, 2)."""
    h = side / 2.0
    corners = np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
    return corners @ rotation(angle).T + center


def polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def clip_polygon(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Intersection of a polygon with a convex counter-clockwise clipper (Sutherland-Hodgman)."""
    output = list(subject)
    for i in range(len(clipper)):
        a, b = clipper[i], clipper[(i + 1) % len(clipper)]
        edge = b - a

        def inside(p):
            return edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0]) >= 0

        def intersect(p, q):
            d = q - p
            denom = edge[0] * d[1] - edge[1] * d[0]
            t = (edge[1] * (p[0] - a[0]) - edge[0] * (p[1] - a[1])) / denom
            return p + t * d

        current, output = output, []
        if not current:
            break
        for j, p in enumerate(current):
            q = current[(j + 1) % len(current)]
            if inside(q):
                if not inside(p):
                    output.append(intersect(p, q))
                output.append(q)
            elif inside(p):
                output.append(intersect(p, q))
    return np.array(output).reshape(-1, 2)


def block_polygon(state: EnvState) -> np.ndarray:
    return square_polygon(state.block_pos, BLOCK_SIDE, state.block_angle)


def goal_polygon() -> np.ndarray:
    return square_polygon(GOAL_CENTER, GOAL_SIDE)


def coverage(block_pos: np.ndarray, block_angle: float) -> float:
    """Fraction of the block's area lying inside the goal square."""
    overlap = clip_polygon(square_polygon(block_pos, BLOCK_SIDE, block_angle), goal_polygon())
    return min(1.0, polygon_area(overlap) / BLOCK_SIDE ** 2)


def state_coverage(state: EnvState) -> float:
    return coverage(state.block_pos, state.block_angle)


def block_support(angle: float, direction: np.ndarray) -> float:
    """Distance from the block centre to its boundary tangent perpendicular to `direction`."""
    local = rotation(angle).T @ direction
    return BLOCK_SIDE / 2.0 * (abs(local[0]) + abs(local[1]))


# ============ Contact ============

def _penetration(agent: np.ndarray, block: np.ndarray, angle: float) -> float:
    r = rotation(angle)
    local = r.T @ (agent - block)
    h = BLOCK_SIDE / 2.0
    closest = np.clip(local, -h, h)
    if np.all(np.abs(local) < h):
        return AGENT_RADIUS + float(np.min(h - np.abs(local)))
    return max(0.0, AGENT_RADIUS - float(np.linalg.norm(local - closest)))


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    return v / norm if norm > 1e-12 else np.array([1.0, 0.0])


def _wall_overflow(block: np.ndarray, angle: float) -> np.ndarray:
    poly = square_polygon(block, BLOCK_SIDE, angle)
    low = np.minimum(poly.min(axis=0), 0.0)
    high = np.maximum(poly.max(axis=0) - 1.0, 0.0)
    return -low - high


def _resolve_contact(agent: np.ndarray, block: np.ndarray, angle: float) -> tuple[np.ndarray, np.ndarray]:
    for _ in range(CONTACT_ITERATIONS):
        depth = _penetration(agent, block, angle)
        if depth <= 0:
            break
        block = block + _unit(block - agent) * depth
        shift = _wall_overflow(block, angle)
        if np.any(shift != 0):
            # the wall holds the block, so the agent gives way
            block = block + shift
            agent = agent - _unit(block - agent) * _penetration(agent, block, angle)
            agent = np.clip(agent, AGENT_RADIUS, 1.0 - AGENT_RADIUS)
    return agent, block


# ============ Dynamics ============

def reset(seed: int) -> EnvState:
    """Seeded spawn: block away from the goal, agent clear of the block."""
    rng = np.random.default_rng(seed)
    while True:
        block = rng.uniform(*BLOCK_SPAWN, size=2)
        angle = float(rng.uniform(-SPAWN_ROTATION, SPAWN_ROTATION))
        if coverage(block, angle) <= MAX_SPAWN_COVERAGE:
            break
    while True:
        agent = rng.uniform(*AGENT_SPAWN, size=2)
        if _penetration(agent, block, angle) == 0 and np.linalg.norm(agent - block) > BLOCK_SIDE:
            break
    return EnvState(agent, np.zeros(2), block, angle, int(seed))


def step(state: EnvState, action: Sequence[float]) -> tuple[EnvState, float]:
    """Advance one tick; returns the new state and its goal coverage."""
    action = np.clip(np.asarray(action, dtype=np.float64).reshape(2), -1.0, 1.0)
    velocity = state.agent_vel + DAMPING * (MAX_SPEED * action - state.agent_vel)
    unclamped = state.agent_pos + velocity
    agent = np.clip(unclamped, AGENT_RADIUS, 1.0 - AGENT_RADIUS)
    velocity = np.where(agent != unclamped, 0.0, velocity)
    agent, block = _resolve_contact(agent, state.block_pos, state.block_angle)
    new_state = replace(
        state,
        agent_pos=agent,
        agent_vel=velocity,
        block_pos=block,
        step=state.step + 1,
        last_action=action,
    )
    return new_state, state_coverage(new_state)


def score_episode(coverages: Sequence[float], threshold: float = SUCCESS_THRESHOLD) -> tuple[float, bool]:
    """Maximum coverage over the trace and whether it reached the success threshold."""
    if len(coverages) == 0:
        raise ValueError("score_episode needs at least one coverage value")
    score = float(np.clip(max(coverages), 0.0, 1.0))
    return score, score >= threshold


class PushEnv:
    """Stateful wrapper over `reset`/`step` holding the current state and coverage history."""

    def __init__(self, seed: int, resolution: int = 64, patch: Optional["ScenePatch"] = None):
        self.seed = seed
        self.resolution = resolution
        self.patch = patch
        self.state = reset(seed)
        self.coverages = [state_coverage(self.state)]

    def step(self, action: Sequence[float]) -> float:
        self.state, score = step(self.state, action)
        self.coverages.append(score)
        return score

    def render(self) -> np.ndarray:
        from envs.render import render
        return render(self.state, self.patch, self.resolution)

    def observe(self) -> np.ndarray:
        """The rendered frame at camera precision, matching recorded demonstrations."""
        from envs.render import quantize_frame
        return quantize_frame(self.render()).astype(np.float64) / 255.0

    def score(self, threshold: float = SUCCESS_THRESHOLD) -> tuple[float, bool]:
        return score_episode(self.coverages, threshold)
