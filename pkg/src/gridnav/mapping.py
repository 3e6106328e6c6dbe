"""Dual-map grid representation: egocentric decision map and mission-wide map.

The navigation stack plans on two grids.  A 10x10 *decision map* is spawned
around the agent and carries the local picture (free / visited / blocked
cells, the agent itself, and the target cell that steers it toward the
mission goal).  A *global map* the size of the search area accumulates
everything the decision maps learned.  One grid cell is one square metre
and the agent moves exactly one cell per step.

All operations here are value-level: they return new map objects and never
mutate their inputs, so maps can be shared freely across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from typing import Iterable, NamedTuple

import numpy as np

LOCAL_SIZE = 10
#: Local cell the agent occupies in a freshly spawned decision map.  A 10x10
#: grid has no exact centre; (5, 5) gives five steps toward low indices and
#: four toward high ones.
LOCAL_CENTER_ROW = 5
LOCAL_CENTER_COL = 5

REWARD_REACHED = 1.0
REWARD_BLOCKED = -1.50
REWARD_VISITED = -0.25
REWARD_VALID = -0.04
REWARD_INVALID = -0.75

REWARD_VALUES = (
    REWARD_REACHED,
    REWARD_BLOCKED,
    REWARD_VISITED,
    REWARD_VALID,
    REWARD_INVALID,
)


class GridCoord(NamedTuple):
    row: int
    col: int


class CellState(IntEnum):
    FREE = 0
    VISITED = 1
    BLOCKED = 2
    CURRENT = 3
    TARGET = 4


#: JSON names for each cell state (and the reverse lookup).
CELL_STATE_NAMES = {
    CellState.FREE: "free",
    CellState.VISITED: "visited",
    CellState.BLOCKED: "blocked",
    CellState.CURRENT: "current",
    CellState.TARGET: "target",
}
CELL_STATE_FROM_NAME = {name: state for state, name in CELL_STATE_NAMES.items()}


class Action(IntEnum):
    """Grid-frame moves, in the fixed ordering used for Q-value vectors."""

    NORTH = 0
    SOUTH = 1
    EAST = 2
    WEST = 3


ACTION_DELTAS: dict[Action, tuple[int, int]] = {
    Action.NORTH: (-1, 0),
    Action.SOUTH: (1, 0),
    Action.EAST: (0, 1),
    Action.WEST: (0, -1),
}

ACTIONS = (Action.NORTH, Action.SOUTH, Action.EAST, Action.WEST)


class ConstraintClass(Enum):
    HARD = "hard"
    SOFT = "soft"
    NONE = "none"


#: Decision-map raster coding.  Symmetric in [-1, 1] with obstacles most
#: negative so that "more traversable" reads as "brighter".
RASTER_CODING = {
    CellState.FREE: 1.0,
    CellState.TARGET: 0.5,
    CellState.VISITED: 0.0,
    CellState.CURRENT: -0.5,
    CellState.BLOCKED: -1.0,
}

#: Local coordinates of the 36-cell boundary ring, in row-major order so a
#: first-minimum scan implements the row-major tie-break.
BOUNDARY_RING: tuple[GridCoord, ...] = tuple(
    GridCoord(r, c)
    for r in range(LOCAL_SIZE)
    for c in range(LOCAL_SIZE)
    if r in (0, LOCAL_SIZE - 1) or c in (0, LOCAL_SIZE - 1)
)

_RING_ROWS = np.array([c.row for c in BOUNDARY_RING])
_RING_COLS = np.array([c.col for c in BOUNDARY_RING])


class HardConstraintError(ValueError):
    """A hard-constrained move was applied instead of being voided."""


class BoxedInError(RuntimeError):
    """No valid action exists: every neighbouring cell is off-limits."""


@dataclass(frozen=True)
class LocalMap:
    """10x10 egocentric decision map.

    ``cells`` is a read-only (10, 10) int8 array of :class:`CellState`
    values.  ``origin_global`` is the global coordinate of local cell
    (0, 0); ``world_shape`` is the (height, width) of the search area so
    that clipped border cells can be told apart from sensed obstacles.
    ``target_cell`` is in local coordinates.
    """

    cells: np.ndarray
    agent_local: GridCoord
    origin_global: GridCoord
    target_cell: GridCoord
    world_shape: tuple[int, int]

    def __post_init__(self) -> None:
        self.cells.flags.writeable = False

    @property
    def agent_global(self) -> GridCoord:
        return local_to_global(self, self.agent_local)

    @property
    def target_global(self) -> GridCoord:
        return local_to_global(self, self.target_cell)


@dataclass(frozen=True)
class GlobalMap:
    """Search-area map accumulating knowledge from completed decision maps."""

    width: int
    height: int
    cells: np.ndarray
    start: GridCoord
    goal: GridCoord

    def __post_init__(self) -> None:
        self.cells.flags.writeable = False

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


def new_global_map(width: int, height: int, start: GridCoord, goal: GridCoord) -> GlobalMap:
    if not (0 <= start.row < height and 0 <= start.col < width):
        raise ValueError(f"start {start} outside {height}x{width} map")
    if not (0 <= goal.row < height and 0 <= goal.col < width):
        raise ValueError(f"goal {goal} outside {height}x{width} map")
    cells = np.zeros((height, width), dtype=np.int8)
    return GlobalMap(width=width, height=height, cells=cells, start=start, goal=goal)


def local_to_global(local: LocalMap, coord: GridCoord) -> GridCoord:
    return GridCoord(local.origin_global.row + coord.row, local.origin_global.col + coord.col)


def global_to_local(local: LocalMap, coord: GridCoord) -> GridCoord:
    return GridCoord(coord.row - local.origin_global.row, coord.col - local.origin_global.col)


def in_local_bounds(coord: GridCoord) -> bool:
    return 0 <= coord.row < LOCAL_SIZE and 0 <= coord.col < LOCAL_SIZE


def spawn_local_map(
    agent_global: GridCoord,
    goal_global: GridCoord,
    world_shape: tuple[int, int],
) -> LocalMap:
    """Spawn a fresh decision map centred on the agent.

    All cells start free except the agent cell; window cells that fall
    outside the search area are blocked so the hard-constraint machinery
    keeps the agent inside.  The target cell is selected toward the goal.
    """
    height, width = world_shape
    if not (0 <= agent_global.row < height and 0 <= agent_global.col < width):
        raise ValueError(f"agent {agent_global} outside {height}x{width} world")

    origin = GridCoord(agent_global.row - LOCAL_CENTER_ROW, agent_global.col - LOCAL_CENTER_COL)
    cells = np.zeros((LOCAL_SIZE, LOCAL_SIZE), dtype=np.int8)

    rows = origin.row + np.arange(LOCAL_SIZE)
    cols = origin.col + np.arange(LOCAL_SIZE)
    outside = ((rows < 0) | (rows >= height))[:, None] | ((cols < 0) | (cols >= width))[None, :]
    cells[outside] = CellState.BLOCKED
    cells[LOCAL_CENTER_ROW, LOCAL_CENTER_COL] = CellState.CURRENT

    local = LocalMap(
        cells=cells,
        agent_local=GridCoord(LOCAL_CENTER_ROW, LOCAL_CENTER_COL),
        origin_global=origin,
        target_cell=GridCoord(LOCAL_CENTER_ROW, LOCAL_CENTER_COL),
        world_shape=world_shape,
    )
    target = select_target_cell(local, goal_global)
    cells = cells.copy()
    if target != local.agent_local:
        cells[target] = CellState.TARGET
    return replace(local, cells=cells, target_cell=target)


def select_target_cell(local: LocalMap, goal_global: GridCoord) -> GridCoord:
    """Pick the local cell that steers the agent toward the global goal.

    If the goal lies inside the window (and is not blocked), its own local
    cell is the target.  Otherwise the target is the boundary-ring cell
    whose global position is nearest (Euclidean) to the goal, with ties
    broken in row-major order.  Blocked ring cells, which include every
    cell clipped off by the search-area border, are not eligible: a target
    the agent can never enter would deadlock the mission.
    """
    goal_local = global_to_local(local, goal_global)
    if in_local_bounds(goal_local) and local.cells[goal_local] != CellState.BLOCKED:
        return goal_local

    ring_rows_g = _RING_ROWS + local.origin_global.row
    ring_cols_g = _RING_COLS + local.origin_global.col
    d2 = (ring_rows_g - goal_global.row) ** 2 + (ring_cols_g - goal_global.col) ** 2
    blocked = local.cells[_RING_ROWS, _RING_COLS] == CellState.BLOCKED
    if blocked.all():
        raise BoxedInError("every boundary cell of the decision map is blocked")
    d2 = np.where(blocked, np.iinfo(np.int64).max, d2)
    best = int(np.argmin(d2))
    return BOUNDARY_RING[best]


def classify_action(local: LocalMap, action: Action) -> ConstraintClass:
    """Constraint level of a move: hard moves are voided, soft ones penalised."""
    dr, dc = ACTION_DELTAS[action]
    dest = GridCoord(local.agent_local.row + dr, local.agent_local.col + dc)
    if not in_local_bounds(dest):
        return ConstraintClass.HARD
    state = CellState(local.cells[dest])
    if state == CellState.BLOCKED:
        return ConstraintClass.HARD
    if state == CellState.VISITED:
        return ConstraintClass.SOFT
    return ConstraintClass.NONE


def valid_action_mask(local: LocalMap) -> np.ndarray:
    """Boolean mask over (N, S, E, W): destinations in free or visited cells."""
    return np.array(
        [classify_action(local, a) != ConstraintClass.HARD for a in ACTIONS],
        dtype=bool,
    )


def action_destination(local: LocalMap, action: Action) -> GridCoord:
    """Global coordinate of the cell the action drives at (may be anywhere)."""
    dr, dc = ACTION_DELTAS[action]
    return GridCoord(local.agent_global.row + dr, local.agent_global.col + dc)


def apply_move(local: LocalMap, action: Action) -> LocalMap:
    """Execute a permitted move: the old cell becomes visited, the new current."""
    if classify_action(local, action) == ConstraintClass.HARD:
        raise HardConstraintError(f"{action.name} is hard-constrained from {local.agent_local}")
    dr, dc = ACTION_DELTAS[action]
    dest = GridCoord(local.agent_local.row + dr, local.agent_local.col + dc)
    cells = local.cells.copy()
    cells[local.agent_local] = CellState.VISITED
    cells[dest] = CellState.CURRENT
    return replace(local, cells=cells, agent_local=dest)


def mark_blocked(local: LocalMap, blocked_global: Iterable[GridCoord]) -> LocalMap:
    """Record sensed obstacles.  Blocking is absorbing; the agent cell is immune."""
    cells = None
    for coord in blocked_global:
        loc = global_to_local(local, coord)
        if not in_local_bounds(loc) or loc == local.agent_local:
            continue
        if cells is None:
            cells = local.cells.copy()
        cells[loc] = CellState.BLOCKED
    if cells is None:
        return local
    return replace(local, cells=cells)


def retarget(local: LocalMap, goal_global: GridCoord) -> LocalMap:
    """Re-select the target cell (used when sensing blocked the current one)."""
    target = select_target_cell(local, goal_global)
    if target == local.target_cell:
        return local
    cells = local.cells.copy()
    if CellState(cells[local.target_cell]) == CellState.TARGET:
        cells[local.target_cell] = CellState.FREE
    if target != local.agent_local and CellState(cells[target]) == CellState.FREE:
        cells[target] = CellState.TARGET
    return replace(local, cells=cells, target_cell=target)


def reward(
    outcome_cell_global: GridCoord,
    constraint: ConstraintClass,
    local: LocalMap,
    goal_global: GridCoord,
) -> float:
    """Reward for the cell an attempted action drove at.

    Precedence: reached > blocked > visited > valid > invalid.  Blocked
    cells that merely stand in for territory beyond the search area fall
    through to the invalid branch, since the offence there is leaving the
    search area rather than hitting an obstacle.
    """
    del constraint  # the cell membership fully determines the branch
    if outcome_cell_global == goal_global:
        return REWARD_REACHED

    loc = global_to_local(local, outcome_cell_global)
    height, width = local.world_shape
    inside_world = 0 <= outcome_cell_global.row < height and 0 <= outcome_cell_global.col < width
    if not in_local_bounds(loc) or not inside_world:
        return REWARD_INVALID
    state = CellState(local.cells[loc])
    if state == CellState.BLOCKED:
        return REWARD_BLOCKED
    if state == CellState.VISITED:
        return REWARD_VISITED
    if state in (CellState.FREE, CellState.TARGET, CellState.CURRENT):
        return REWARD_VALID
    return REWARD_INVALID


def merge_into_global(global_map: GlobalMap, local: LocalMap) -> GlobalMap:
    """Write the decision map's visited and blocked cells into the big map.

    Cells outside the global bounds (the clipped border padding) are
    ignored, and a blocked cell in the global map is never downgraded.
    """
    cells = global_map.cells.copy()
    height, width = global_map.height, global_map.width
    for r in range(LOCAL_SIZE):
        gr = local.origin_global.row + r
        if not 0 <= gr < height:
            continue
        for c in range(LOCAL_SIZE):
            gc = local.origin_global.col + c
            if not 0 <= gc < width:
                continue
            state = CellState(local.cells[r, c])
            if cells[gr, gc] == CellState.BLOCKED:
                continue
            if state == CellState.VISITED:
                cells[gr, gc] = CellState.VISITED
            elif state == CellState.BLOCKED:
                cells[gr, gc] = CellState.BLOCKED
    return replace(global_map, cells=cells)


def render_decision_map(local: LocalMap) -> np.ndarray:
    """Row-major 100-vector of the map raster coding, in [-1, 1]."""
    lut = np.empty(len(CellState), dtype=np.float32)
    for state, value in RASTER_CODING.items():
        lut[state] = value
    return lut[local.cells.reshape(-1)]


def global_map_to_dict(global_map: GlobalMap) -> dict:
    """JSON document for a global map; free cells are omitted."""
    cells = []
    nonfree = np.argwhere(global_map.cells != CellState.FREE)
    for r, c in nonfree:
        cells.append(
            {
                "r": int(r),
                "c": int(c),
                "state": CELL_STATE_NAMES[CellState(global_map.cells[r, c])],
            }
        )
    return {
        "width": global_map.width,
        "height": global_map.height,
        "start": [global_map.start.row, global_map.start.col],
        "goal": [global_map.goal.row, global_map.goal.col],
        "cells": cells,
    }


def global_map_from_dict(doc: dict) -> GlobalMap:
    gmap = new_global_map(
        width=int(doc["width"]),
        height=int(doc["height"]),
        start=GridCoord(*doc["start"]),
        goal=GridCoord(*doc["goal"]),
    )
    cells = gmap.cells.copy()
    for entry in doc["cells"]:
        cells[entry["r"], entry["c"]] = CELL_STATE_FROM_NAME[entry["state"]]
    return replace(gmap, cells=cells)


def save_global_map(global_map: GlobalMap, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(global_map_to_dict(global_map), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_global_map(path) -> GlobalMap:
    with open(path, "r", encoding="utf-8") as fh:
        return global_map_from_dict(json.load(fh))
