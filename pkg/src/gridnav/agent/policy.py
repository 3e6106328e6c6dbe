"""Action selection: epsilon-greedy draws and the flight-safety correction.

Every executed action carries a provenance label: Random (exploration
draw), Predicted (greedy network output executed as-is), or Corrected (an
unsafe prediction replaced by the valid action closest to the target
cell).  The mission reports count these labels.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from ..mapping import (
    ACTION_DELTAS,
    ACTIONS,
    Action,
    BoxedInError,
    ConstraintClass,
    LocalMap,
    classify_action,
    valid_action_mask,
)


class PolicyDecision(Enum):
    RANDOM = "random"
    PREDICTED = "predicted"
    CORRECTED = "corrected"


def epsilon_greedy(
    q_values: np.ndarray,
    valid_actions: np.ndarray,
    epsilon: float,
    rng: np.random.Generator,
    restrict_greedy: bool = False,
    literal_branch: bool = False,
) -> tuple[Action, PolicyDecision]:
    """Pick an action from a 4-vector of Q-values.

    A uniform draw mu <= epsilon yields a random action from the valid set;
    otherwise the greedy argmax is returned (ties broken in the fixed
    N, S, E, W order).  The greedy branch deliberately ranges over all four
    actions so that unsafe predictions surface and can be voided or
    corrected downstream; ``restrict_greedy`` masks them out instead.
    ``literal_branch`` swaps which side of the draw is greedy.
    """
    valid_actions = np.asarray(valid_actions, dtype=bool)
    if valid_actions.shape != (len(ACTIONS),):
        raise ValueError("valid_actions must be a 4-element mask")
    if not valid_actions.any():
        raise BoxedInError("no valid action to choose from")

    mu = rng.random()
    explore = (mu > epsilon) if literal_branch else (mu <= epsilon)
    if explore:
        choice = rng.choice(np.flatnonzero(valid_actions))
        return Action(int(choice)), PolicyDecision.RANDOM

    q = np.asarray(q_values, dtype=float)
    if restrict_greedy:
        q = np.where(valid_actions, q, -np.inf)
    return Action(int(np.argmax(q))), PolicyDecision.PREDICTED


def correct_action(
    local: LocalMap, predicted: Action
) -> tuple[Action, PolicyDecision]:
    """Exploitation-time safety net for predicted actions.

    A prediction landing in a free or previously visited cell passes
    through.  Otherwise the valid action whose destination is nearest
    (Euclidean) to the target cell replaces it, ties broken in N, S, E, W
    order.  With no valid action at all the agent is boxed in, which is a
    mission-level failure.
    """
    if classify_action(local, predicted) != ConstraintClass.HARD:
        return predicted, PolicyDecision.PREDICTED

    mask = valid_action_mask(local)
    if not mask.any():
        raise BoxedInError("agent is boxed in: all four destinations are blocked")

    target = local.target_cell
    best_action = None
    best_d2 = None
    for action in ACTIONS:
        if not mask[action]:
            continue
        dr, dc = ACTION_DELTAS[action]
        dest_r = local.agent_local.row + dr
        dest_c = local.agent_local.col + dc
        d2 = (dest_r - target.row) ** 2 + (dest_c - target.col) ** 2
        if best_d2 is None or d2 < best_d2:
            best_d2 = d2
            best_action = action
    return best_action, PolicyDecision.CORRECTED
