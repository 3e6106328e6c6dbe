"""Command-line entry point: generate-world, train, evaluate, decay.

Configuration comes from an optional plain ``key = value`` file plus
command-line flags, with flags winning.  Unknown keys are rejected.  Every
command is a deterministic function of (config, seed): reruns produce
byte-identical artifacts.  The master seed falls back to the ``NAV_SEED``
environment variable when neither a flag nor a config key supplies one.

Exit codes: 0 success (for ``train``: the success-streak criterion was
met), 1 runtime failure, 2 usage or config error, 3 ``train`` stopped at
the episode cap without converging.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, fields

from . import nn
from .agent import AgentConfig, NavigationEnv, UpdateRule, run_exploration_phase, \
    write_training_log
from .harness import (
    AgentCheckpoint,
    MissionSpec,
    decay_experiment,
    decay_results_to_csv,
    emit_report,
    route_trace_svg,
    run_mission,
    run_test_sequence,
)
from .mapping import GridCoord
from .world import (
    Domain,
    GenerationError,
    WeatherCondition,
    WeatherKind,
    WorldSpec,
    generate_world,
    load_world,
    save_world,
)

RULE_CHOICES = ("dqn", "ddqn", "eddqn", "drqn100", "drqn1000")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_EPISODE_CAP = 3


@dataclass
class RunConfig:
    """Every tunable of the workbench, file- and flag-addressable by name."""

    # agent hyper-parameters
    epsilon_train: float = 0.1
    epsilon_test: float = 0.05
    gamma: float = 0.95
    replay_capacity: int = 800
    target_sync_every: int = 10
    learning_rate: float = 0.001
    batch_size: int = 32
    rule: str = "eddqn"
    max_episodes: int = 1500
    success_streak: int = 50
    max_steps_per_episode: int = 150
    mission_step_budget: int = 5000
    train_steps_per_episode: int = 1
    exploration_train_interval: int | None = 25
    online_train_interval: int = 1
    bootstrap_coefficient: float | None = None
    literal_eq5_branch: bool = False
    # world
    domain: str = "forest"
    world_width: int = 100
    world_height: int = 100
    obstacle_density: float | None = None
    dynamic_count: int = 0
    world_seed: int = 0
    world_file: str = ""
    # missions
    start_row: int | None = None
    start_col: int | None = None
    goal_row: int | None = None
    goal_col: int | None = None
    weather: str = "clear"
    intensity: float = 0.0
    missions: str = ""
    sequence_scale: float = 1.0
    step_budget: int | None = None
    # run control
    seed: int = 0
    out_dir: str = "out"
    checkpoint: str = ""
    # decay experiment
    decay_updates: int = 500
    decay_alpha: float = 0.5
    decay_population: int = 100
    decay_reward: float = -0.04
    decay_gamma: float = 0.95

    def agent_config(self) -> AgentConfig:
        rule = self.rule.lower()
        trace = None
        if rule.startswith("drqn"):
            trace = int(rule[len("drqn"):])
            base_rule = UpdateRule.DQN
        else:
            base_rule = UpdateRule(rule)
        return AgentConfig(
            epsilon_train=self.epsilon_train,
            epsilon_test=self.epsilon_test,
            gamma=self.gamma,
            replay_capacity=self.replay_capacity,
            target_sync_every=self.target_sync_every,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            rule=base_rule,
            trace_length=trace,
            max_episodes=self.max_episodes,
            success_streak=self.success_streak,
            max_steps_per_episode=self.max_steps_per_episode,
            mission_step_budget=self.mission_step_budget,
            train_steps_per_episode=self.train_steps_per_episode,
            exploration_train_interval=self.exploration_train_interval,
            online_train_interval=self.online_train_interval,
            bootstrap_coefficient=self.bootstrap_coefficient,
            literal_eq5_branch=self.literal_eq5_branch,
        )

    def world_spec(self) -> WorldSpec:
        return WorldSpec(
            domain=Domain(self.domain.lower()),
            width_m=self.world_width,
            height_m=self.world_height,
            obstacle_density=self.obstacle_density,
            dynamic_count=self.dynamic_count,
            seed=self.world_seed,
        )

    def weather_condition(self) -> WeatherCondition:
        return WeatherCondition(WeatherKind(self.weather.lower()), self.intensity)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key: str, raw: str):
    ftype = _FIELD_TYPES[key]
    raw = raw.strip()
    if ftype == "bool":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if ftype in ("int | None", "float | None") and raw.lower() in ("none", ""):
        return None
    if ftype.startswith("int"):
        return int(raw)
    if ftype.startswith("float"):
        return float(raw)
    return raw


def load_config_file(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment; unknown keys fail."""
    values: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in _FIELD_TYPES:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _parse_value(key, raw)
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        values.update(load_config_file(args.config))
    for key in _FIELD_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if "seed" not in values and os.environ.get("NAV_SEED"):
        values["seed"] = int(os.environ["NAV_SEED"])
    return RunConfig(**values)


def dump_effective_config(config: RunConfig, path) -> None:
    lines = [f"{f.name} = {getattr(config, f.name)}" for f in fields(RunConfig)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _ensure_out(config: RunConfig) -> str:
    os.makedirs(config.out_dir, exist_ok=True)
    dump_effective_config(config, os.path.join(config.out_dir, "effective_config.txt"))
    return config.out_dir


def _default_endpoints(config: RunConfig) -> tuple[GridCoord, GridCoord]:
    height, width = config.world_height, config.world_width
    start = GridCoord(
        config.start_row if config.start_row is not None else min(1, height - 1),
        config.start_col if config.start_col is not None else min(1, width - 1),
    )
    goal = GridCoord(
        config.goal_row if config.goal_row is not None else max(height - 2, 0),
        config.goal_col if config.goal_col is not None else max(width - 2, 0),
    )
    return start, goal


def cmd_generate_world(config: RunConfig) -> int:
    out = _ensure_out(config)
    start, goal = _default_endpoints(config)
    try:
        world = generate_world(config.world_spec(), start=start, goal=goal)
    except (GenerationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    path = os.path.join(out, "world.json")
    save_world(world, path)
    print(f"wrote {path}: {len(world.obstacles)} obstacles (seed {world.spec.seed})")
    return EXIT_OK


def cmd_train(config: RunConfig) -> int:
    out = _ensure_out(config)
    if config.world_file:
        world = load_world(config.world_file)
    else:
        start, goal = _default_endpoints(config)
        world = generate_world(config.world_spec(), start=start, goal=goal)
    start, goal = _default_endpoints(config)
    env = NavigationEnv(world=world, start=start, goal=goal)
    agent_config = config.agent_config()

    def report_progress(log):
        if log.episode % 50 == 0 or log.streak >= agent_config.success_streak:
            print(f"episode {log.episode}: steps {log.steps} "
                  f"reward {log.reward_sum:.2f} streak {log.streak}")

    result = run_exploration_phase(env, agent_config, seed=config.seed,
                                   progress=report_progress)
    ckpt_path = os.path.join(out, "checkpoint.npz")
    AgentCheckpoint(result.value_net, result.target_net, result.adam, agent_config).save(
        ckpt_path
    )
    write_training_log(result.episodes, os.path.join(out, "training_log.csv"))
    status = "converged" if result.converged else "episode cap reached"
    print(
        f"{status}: {len(result.episodes)} episodes, {result.train_steps} updates, "
        f"checkpoint {ckpt_path}"
    )
    return EXIT_OK if result.converged else EXIT_EPISODE_CAP


def _parse_mission_list(config: RunConfig) -> list[MissionSpec]:
    specs: list[MissionSpec] = []
    weather = config.weather_condition()
    entries = [m for m in config.missions.split(";") if m.strip()] if config.missions else []
    if not entries and config.start_row is not None and config.goal_row is not None:
        entries = [
            f"{config.start_row},{config.start_col}:{config.goal_row},{config.goal_col}"
        ]
    for i, entry in enumerate(entries):
        try:
            start_s, goal_s = entry.split(":")
            start = GridCoord(*(int(v) for v in start_s.split(",")))
            goal = GridCoord(*(int(v) for v in goal_s.split(",")))
        except ValueError as exc:
            raise ValueError(f"bad mission entry {entry!r}: {exc}") from exc
        specs.append(
            MissionSpec(
                world=config.world_spec(),
                start=start,
                goal=goal,
                weather=weather,
                seed=config.seed + i,
                name=f"M{i + 1}",
            )
        )
    return specs


def cmd_evaluate(config: RunConfig) -> int:
    out = _ensure_out(config)
    if not config.checkpoint:
        print("error: evaluate requires --checkpoint", file=sys.stderr)
        return EXIT_USAGE
    if not os.path.exists(config.checkpoint):
        print(f"error: checkpoint {config.checkpoint!r} not found", file=sys.stderr)
        return EXIT_USAGE
    agent_config = config.agent_config()
    checkpoint = AgentCheckpoint.load(config.checkpoint, agent_config)

    missions = _parse_mission_list(config)
    reports = []
    if missions:
        for spec in missions:
            report, checkpoint, env = run_mission(spec, checkpoint,
                                                  step_budget=config.step_budget)
            report.domain = f"{report.domain}:{spec.name}"
            reports.append(report)
            svg_path = os.path.join(out, f"route_{spec.name}.svg")
            with open(svg_path, "w", encoding="utf-8") as fh:
                fh.write(route_trace_svg(report, env.world, start=spec.start,
                                         goal=spec.goal))
    else:
        reports, checkpoint = run_test_sequence(
            checkpoint,
            config.seed,
            scale=config.sequence_scale,
            obstacle_density=config.obstacle_density,
            step_budget=config.step_budget,
        )
    paths = emit_report(reports, out)
    completed = sum(r.completed for r in reports)
    print(f"wrote {paths['csv']} and {paths['json']}: "
          f"{completed}/{len(reports)} missions completed")
    return EXIT_OK


def cmd_decay(config: RunConfig) -> int:
    out = _ensure_out(config)
    results = [
        decay_experiment(
            rule,
            population=config.decay_population,
            reward=config.decay_reward,
            gamma=config.decay_gamma,
            alpha=config.decay_alpha,
            updates=config.decay_updates,
        )
        for rule in (UpdateRule.DDQN, UpdateRule.EDDQN)
    ]
    path = os.path.join(out, "decay.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(decay_results_to_csv(results))
    finals = {r.rule: r.summary[-1, 2] for r in results}
    print(f"wrote {path}: medians after {config.decay_updates} updates "
          + ", ".join(f"{rule}={value:.6f}" for rule, value in sorted(finals.items())))
    return EXIT_OK


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--seed", type=int, dest="seed", help="master seed")
    parser.add_argument("--out", dest="out_dir", help="output directory")
    parser.add_argument("--rule", choices=RULE_CHOICES, dest="rule")
    parser.add_argument("--weather", choices=[w.value for w in WeatherKind],
                        dest="weather")
    parser.add_argument("--intensity", type=float, choices=[0.0, 0.15, 0.30],
                        dest="intensity")
    parser.add_argument("--domain", choices=[d.value for d in Domain], dest="domain")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridnav",
        description="Dual-map deep-RL navigation workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-world", help="write a deterministic world file")
    _add_common_flags(p)
    p.add_argument("--width", type=int, dest="world_width")
    p.add_argument("--height", type=int, dest="world_height")
    p.add_argument("--density", type=float, dest="obstacle_density")
    p.add_argument("--dynamic-count", type=int, dest="dynamic_count")
    p.add_argument("--world-seed", type=int, dest="world_seed")
    p.set_defaults(func=cmd_generate_world)

    p = sub.add_parser("train", help="run the teleport-mode training phase")
    _add_common_flags(p)
    p.add_argument("--episodes", type=int, dest="max_episodes")
    p.add_argument("--world-file", dest="world_file")
    p.add_argument("--width", type=int, dest="world_width")
    p.add_argument("--height", type=int, dest="world_height")
    p.add_argument("--density", type=float, dest="obstacle_density")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="fly the ten-test sequence or listed missions")
    _add_common_flags(p)
    p.add_argument("--checkpoint", dest="checkpoint")
    p.add_argument("--scale", type=float, dest="sequence_scale")
    p.add_argument("--budget", type=int, dest="step_budget")
    p.add_argument("--missions", dest="missions",
                   help="semicolon-separated r,c:r,c start/goal pairs")
    p.add_argument("--width", type=int, dest="world_width")
    p.add_argument("--height", type=int, dest="world_height")
    p.add_argument("--density", type=float, dest="obstacle_density")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("decay", help="run the repeated-update decay experiment")
    _add_common_flags(p)
    p.add_argument("--updates", type=int, dest="decay_updates")
    p.add_argument("--alpha", type=float, dest="decay_alpha")
    p.add_argument("--population", type=int, dest="decay_population")
    p.set_defaults(func=cmd_decay)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        config = build_config(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(config)
    except (GenerationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
