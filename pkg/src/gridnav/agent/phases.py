"""The two operating phases: teleport-mode training and continuous missions.

Phase one trains episodically: the agent respawns at a seeded random free
cell each episode, picks actions epsilon-greedily with no correction
(unsafe predictions are simply voided and punished), and the episode ends
when the target cell is reached or the step cap hits.  Training stops
after a configurable run of consecutive successes or at the episode cap.

Phase two flies one continuous mission: obstacle sensing runs every step,
unsafe predictions are corrected toward the target cell, fresh decision
maps respawn each time a target cell is reached, and the network keeps
learning online from the replay buffer as it flies.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .. import nn
from ..harness.reports import MissionReport
from ..mapping import (
    Action,
    BoxedInError,
    CellState,
    ConstraintClass,
    GridCoord,
    LocalMap,
    action_destination,
    apply_move,
    classify_action,
    mark_blocked,
    new_global_map,
    merge_into_global,
    render_decision_map,
    retarget,
    reward,
    spawn_local_map,
    valid_action_mask,
)
from ..world import (
    CLEAR,
    WeatherCondition,
    WeatherKind,
    World,
    apply_weather,
    occupied_cells,
    render_frame,
    sense_obstacles,
    step_dynamics,
)
from .config import AgentConfig
from .learning import sync_target, train_step
from .policy import PolicyDecision, correct_action, epsilon_greedy
from .replay import ReplayBuffer, Transition

TRAINING_LOG_COLUMNS = ("episode", "steps", "reward_sum", "success", "streak", "loss_mean")


@dataclass
class NavigationEnv:
    """A world plus the mission endpoints inside it."""

    world: World
    start: GridCoord
    goal: GridCoord

    @property
    def shape(self) -> tuple[int, int]:
        return self.world.shape


@dataclass
class EpisodeLog:
    episode: int
    steps: int
    reward_sum: float
    success: bool
    streak: int
    loss_mean: float


@dataclass
class ExplorationResult:
    value_net: nn.QNetwork
    target_net: nn.QNetwork
    adam: nn.AdamState
    buffer: ReplayBuffer
    episodes: list[EpisodeLog]
    converged: bool
    train_steps: int


@dataclass
class _Learner:
    """Mutable training state threaded through both phases."""

    value_net: nn.QNetwork
    target_net: nn.QNetwork
    adam: nn.AdamState
    buffer: ReplayBuffer
    config: AgentConfig
    train_steps: int = 0

    def __post_init__(self) -> None:
        # trunk features of the target net, keyed by transition.next_key;
        # valid until the next target sync
        self._target_features: dict = {}

    def update(self, rng: np.random.Generator) -> float | None:
        result = train_step(self.buffer, self.value_net, self.target_net, self.adam,
                            self.config, rng,
                            target_feature_cache=self._target_features)
        if result is None:
            return None
        self.value_net, self.adam, loss = result
        self.train_steps += 1
        if self.train_steps % self.config.target_sync_every == 0:
            self.target_net = sync_target(self.value_net, self.target_net,
                                          self.train_steps,
                                          self.config.target_sync_every)
            self._target_features.clear()
        return loss


class _QEvaluator:
    """Eval-mode Q-values with trunk-feature caching.

    The image trunk dominates evaluation cost but its output depends only
    on (position, facing) while the world, weather and parameters stay
    fixed, so those feature rows are memoised and thrown away whenever the
    parameters change or the scene does.
    """

    def __init__(self, cacheable: bool):
        self.cacheable = cacheable
        self._features: dict[tuple[GridCoord, Action], np.ndarray] = {}

    def invalidate(self) -> None:
        self._features.clear()

    def q_values(self, net: nn.QNetwork, frame: np.ndarray, raster: np.ndarray,
                 pos: GridCoord, facing: Action) -> np.ndarray:
        if not self.cacheable:
            return nn.forward(net, frame[None], raster[None], mode="eval")[0]
        key = (pos, facing)
        feats = self._features.get(key)
        if feats is None:
            feats = nn.image_features(net, frame[None])
            self._features[key] = feats
        return nn.q_from_features(net, feats, raster[None])[0]


def _sensed_local_map(local: LocalMap, world: World, goal: GridCoord
                      ) -> tuple[LocalMap, set[GridCoord]]:
    """Mark freshly sensed obstacles and re-aim the target if it got buried."""
    sensed = sense_obstacles(world, local.agent_global)
    local = mark_blocked(local, sensed)
    if local.cells[local.target_cell] == CellState.BLOCKED:
        local = retarget(local, goal)
    return local, sensed


def run_exploration_phase(
    env: NavigationEnv,
    config: AgentConfig,
    seed: int,
    arch: nn.ArchitectureSpec | None = None,
    learner: "_Learner | None" = None,
    progress=None,
) -> ExplorationResult:
    """Teleport-mode training until the success streak or the episode cap.

    Every episode spawns the agent at a random obstacle-free cell, aims a
    fresh decision map at the environment goal, and runs epsilon-greedy
    with random draws restricted to valid actions and predictions executed
    uncorrected (hard-constrained predictions are voided in place with
    their penalty).  Mini-batch updates run after each episode.
    """
    rng = np.random.default_rng(seed)
    if learner is None:
        if arch is None:
            arch = nn.ArchitectureSpec(recurrent=config.trace_length is not None)
        value_net = nn.init_network(arch, seed=seed)
        learner = _Learner(
            value_net=value_net,
            target_net=nn.clone_params(value_net),
            adam=nn.init_adam(value_net.params, learning_rate=config.learning_rate),
            buffer=ReplayBuffer(config.replay_capacity),
            config=config,
        )

    world = env.world
    blocked_world = occupied_cells(world)
    free_cells = [
        GridCoord(r, c)
        for r in range(world.shape[0])
        for c in range(world.shape[1])
        if GridCoord(r, c) not in blocked_world
    ]
    if not free_cells:
        raise ValueError("world has no free cell to spawn in")

    use_sequences = config.trace_length is not None
    frame_size = learner.value_net.arch.frame_size
    evaluator = _QEvaluator(cacheable=not world.has_dynamics)
    logs: list[EpisodeLog] = []
    streak = 0
    converged = False

    for episode in range(1, config.max_episodes + 1):
        agent = free_cells[int(rng.integers(len(free_cells)))]
        local = spawn_local_map(agent, env.goal, world.shape)
        local, _ = _sensed_local_map(local, world, env.goal)
        facing = Action.NORTH
        frame = render_frame(world, agent, facing, size=frame_size)
        raster = render_decision_map(local)

        reward_sum = 0.0
        success = local.agent_local == local.target_cell
        steps = 0
        losses = []
        for _ in range(config.max_steps_per_episode):
            if success:
                break
            steps += 1
            try:
                q = evaluator.q_values(learner.value_net, frame, raster, agent, facing)
                action, _ = epsilon_greedy(
                    q, valid_action_mask(local), config.epsilon_train, rng,
                    literal_branch=config.literal_eq5_branch,
                )
            except BoxedInError:
                break

            constraint = classify_action(local, action)
            dest = action_destination(local, action)
            r = reward(dest, constraint, local, local.target_global)
            reward_sum += r

            if constraint == ConstraintClass.HARD:
                next_local, next_agent, next_facing = local, agent, facing
                next_frame, next_raster = frame, raster
            else:
                next_local = apply_move(local, action)
                next_agent = next_local.agent_global
                next_facing = action
                next_local, _ = _sensed_local_map(next_local, world, env.goal)
                next_frame = render_frame(world, next_agent, next_facing, size=frame_size)
                next_raster = render_decision_map(next_local)

            success = next_local.agent_local == next_local.target_cell
            learner.buffer.push(
                Transition(
                    frame=frame,
                    raster=raster,
                    action=int(action),
                    reward=r,
                    gamma=config.gamma,
                    next_frame=next_frame,
                    next_raster=next_raster,
                    terminal=success,
                    valid_next=valid_action_mask(next_local),
                    episode_id=episode,
                    next_key=(next_agent, next_facing) if evaluator.cacheable else None,
                )
            )
            local, agent, facing = next_local, next_agent, next_facing
            frame, raster = next_frame, next_raster

            # mid-episode updates keep a stalled greedy policy from wasting
            # the whole episode on a wall it has not yet been punished for
            if (config.exploration_train_interval is not None
                    and steps % config.exploration_train_interval == 0
                    and (not use_sequences
                         or learner.buffer.sequence_starts(config.trace_length))):
                loss = learner.update(rng)
                if loss is not None:
                    losses.append(loss)
                    evaluator.invalidate()

        streak = streak + 1 if success else 0
        if not use_sequences or learner.buffer.sequence_starts(config.trace_length):
            for _ in range(config.train_steps_per_episode):
                loss = learner.update(rng)
                if loss is not None:
                    losses.append(loss)
                    evaluator.invalidate()
        logs.append(
            EpisodeLog(
                episode=episode,
                steps=steps,
                reward_sum=reward_sum,
                success=success,
                streak=streak,
                loss_mean=float(np.mean(losses)) if losses else math.nan,
            )
        )
        if progress is not None:
            progress(logs[-1])
        if streak >= config.success_streak:
            converged = True
            break

    return ExplorationResult(
        value_net=learner.value_net,
        target_net=learner.target_net,
        adam=learner.adam,
        buffer=learner.buffer,
        episodes=logs,
        converged=converged,
        train_steps=learner.train_steps,
    )


def write_training_log(episodes: list[EpisodeLog], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAINING_LOG_COLUMNS)
        for log in episodes:
            writer.writerow(
                [
                    log.episode,
                    log.steps,
                    repr(log.reward_sum),
                    int(log.success),
                    log.streak,
                    "" if math.isnan(log.loss_mean) else repr(log.loss_mean),
                ]
            )


@dataclass
class ExploitationResult:
    report: MissionReport
    value_net: nn.QNetwork
    target_net: nn.QNetwork
    adam: nn.AdamState
    buffer: ReplayBuffer
    global_map: "object"
    train_steps: int = 0


def run_exploitation_phase(
    env: NavigationEnv,
    value_net: nn.QNetwork,
    target_net: nn.QNetwork,
    adam: nn.AdamState,
    config: AgentConfig,
    seed: int,
    weather: WeatherCondition = CLEAR,
    buffer: ReplayBuffer | None = None,
    step_budget: int | None = None,
    method: str = "",
) -> ExploitationResult:
    """Fly one continuous mission with online learning.

    The agent senses obstacles every step, corrects unsafe predictions
    toward the target cell, merges each completed decision map into the
    global map, and keeps running mini-batch updates as it flies.  The
    mission ends on reaching the goal, exhausting the step budget, or
    getting boxed in (reported as a failure with partial metrics).
    """
    rng = np.random.default_rng(seed)
    budget = config.mission_step_budget if step_budget is None else step_budget
    if buffer is None:
        buffer = ReplayBuffer(config.replay_capacity)
    learner = _Learner(
        value_net=value_net,
        target_net=target_net,
        adam=adam,
        buffer=buffer,
        config=config,
    )
    world = env.world
    global_map = new_global_map(world.shape[1], world.shape[0], env.start, env.goal)

    agent = env.start
    facing = Action.NORTH
    local = spawn_local_map(agent, env.goal, world.shape)
    local, sensed = _sensed_local_map(local, world, env.goal)
    obstacles_seen: set[GridCoord] = set(sensed)

    # Dust and snow speckle changes every step, so trunk features are only
    # reusable under clear skies or fog over a static world.
    cacheable = not world.has_dynamics and weather.kind in (WeatherKind.CLEAR, WeatherKind.FOG)
    frame_size = learner.value_net.arch.frame_size
    evaluator = _QEvaluator(cacheable=cacheable)

    route = [agent]
    counts = {PolicyDecision.PREDICTED: 0, PolicyDecision.CORRECTED: 0, PolicyDecision.RANDOM: 0}
    completed = False
    episode_id = 0
    use_sequences = config.trace_length is not None

    def make_report(steps_taken: int) -> MissionReport:
        return MissionReport(
            completed=completed,
            distance_m=math.dist(env.start, env.goal),
            time_s=steps_taken,
            obstacles=len(obstacles_seen),
            predictions=counts[PolicyDecision.PREDICTED],
            corrections=counts[PolicyDecision.CORRECTED],
            random=counts[PolicyDecision.RANDOM],
            route=route,
            method=method,
            domain=world.spec.domain.value,
            weather_kind=weather.kind.value,
            weather_intensity=weather.intensity,
        )

    steps = 0
    while steps < budget:
        if agent == env.goal:
            completed = True
            break
        steps += 1
        if world.has_dynamics:
            world = step_dynamics(world, 1.0)
        frame = apply_weather(render_frame(world, agent, facing, size=frame_size),
                              weather, rng_seed=seed + steps)
        raster = render_decision_map(local)
        try:
            q = evaluator.q_values(learner.value_net, frame, raster, agent, facing)
            action, decision = epsilon_greedy(
                q, valid_action_mask(local), config.epsilon_test, rng,
                literal_branch=config.literal_eq5_branch,
            )
            if decision == PolicyDecision.PREDICTED:
                action, decision = correct_action(local, action)
        except BoxedInError:
            steps -= 1
            break

        constraint = classify_action(local, action)
        dest = action_destination(local, action)
        r = reward(dest, constraint, local, local.target_global)
        counts[decision] += 1

        next_local = apply_move(local, action)
        agent = next_local.agent_global
        facing = action
        next_local, sensed = _sensed_local_map(next_local, world, env.goal)
        obstacles_seen.update(sensed)
        route.append(agent)

        reached_target = next_local.agent_local == next_local.target_cell
        terminal = reached_target or agent == env.goal
        next_frame = apply_weather(render_frame(world, agent, facing, size=frame_size),
                                   weather, rng_seed=seed + steps + 1)
        learner.buffer.push(
            Transition(
                frame=frame,
                raster=raster,
                action=int(action),
                reward=r,
                gamma=config.gamma,
                next_frame=next_frame,
                next_raster=render_decision_map(next_local),
                terminal=terminal,
                valid_next=valid_action_mask(next_local),
                episode_id=episode_id,
                next_key=(agent, facing) if cacheable else None,
            )
        )

        local = next_local
        if reached_target:
            global_map = merge_into_global(global_map, local)
            episode_id += 1
            if agent != env.goal:
                local = spawn_local_map(agent, env.goal, world.shape)
                local, sensed = _sensed_local_map(local, world, env.goal)
                obstacles_seen.update(sensed)

        if steps % config.online_train_interval == 0:
            if not use_sequences or learner.buffer.sequence_starts(config.trace_length):
                loss = learner.update(rng)
                if loss is not None:
                    evaluator.invalidate()

        if agent == env.goal:
            completed = True
            break

    return ExploitationResult(
        report=make_report(steps),
        value_net=learner.value_net,
        target_net=learner.target_net,
        adam=learner.adam,
        buffer=learner.buffer,
        global_map=global_map,
        train_steps=learner.train_steps,
    )
