"""
Scripted waypoint expert used as the demonstration source.
"""
import numpy as np

from envs.push import (
    AGENT_RADIUS,
    GOAL_CENTER,
    MAX_SPEED,
    EnvState,
    block_support,
    state_coverage,
)

SLEW_LIMIT = 0.5
GAIN = 0.5
STOP_COVERAGE = 0.98
STOP_DISTANCE = 0.004
ALIGN_TOLERANCE = 0.012
STANDOFF = 0.015
CLEARANCE = 0.03


def _toward(agent: np.ndarray, target: np.ndarray) -> np.ndarray:
    command = (target - agent) * GAIN / MAX_SPEED
    norm = np.linalg.norm(command)
    return command / norm if norm > 1.0 else command


def _inside_table(point: np.ndarray) -> bool:
    return bool(np.all(point >= AGENT_RADIUS) and np.all(point <= 1.0 - AGENT_RADIUS))


def desired_action(state: EnvState) -> np.ndarray:
    """Unsmoothed command: get behind the block on the block->goal axis, then push."""
    to_goal = GOAL_CENTER - state.block_pos
    distance = float(np.linalg.norm(to_goal))
    if state_coverage(state) >= STOP_COVERAGE or distance < STOP_DISTANCE:
        return np.zeros(2)

    u = to_goal / distance
    perp = np.array([-u[1], u[0]])
    rel = state.agent_pos - state.block_pos
    along, lateral = float(rel @ u), float(rel @ perp)
    back = block_support(state.block_angle, u) + AGENT_RADIUS
    side = block_support(state.block_angle, perp) + AGENT_RADIUS + CLEARANCE

    if along < -back + 0.5 * STANDOFF and abs(lateral) < ALIGN_TOLERANCE:
        # aligned behind the block: drive through it toward the goal
        speed = float(np.clip(distance / 0.05, 0.25, 1.0))
        return np.clip(u * speed - perp * lateral * GAIN / MAX_SPEED, -1.0, 1.0)

    behind = state.block_pos - u * (back + STANDOFF)
    if along < -back:
        return _toward(state.agent_pos, behind)

    sign = 1.0 if lateral >= 0 else -1.0
    if not _inside_table(state.block_pos + perp * sign * side):
        sign = -sign
    if abs(lateral) < side:
        # step sideways out of the block's path first
        return _toward(state.agent_pos, state.block_pos + u * along + perp * sign * side)
    return _toward(state.agent_pos, behind + perp * sign * side)


def scripted_expert(state: EnvState) -> np.ndarray:
    """Waypoint controller with the per-step action change limited to the slew limit."""
    target = desired_action(state)
    change = np.clip(target - state.last_action, -SLEW_LIMIT, SLEW_LIMIT)
    return np.clip(state.last_action + change, -1.0, 1.0)
