"""Evaluators for trained agents and training traces.

Five views: burn-in detection on reward curves, convergence training with
early stopping, interarrival-noise robustness, disruption (blockage)
analysis, and multi-agent robustness with sample-size estimation.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .agent import AgentParams, DdpgAgent
from .errors import ConfigError, InsufficientData, UnknownNode
from .exploration import train_with_blockage_exploration
from .netsim import TopologyConfig
from .rl_env import RlEnv

T_FLOOR = 1e-6  # smallest admissible interarrival gap after perturbation


# -- burn-in ---------------------------------------------------------------------


@dataclass
class BurnInReport:
    stabilization_index: Optional[int]
    smoothed_curve: list[float]
    derivative_curve: list[float]
    window_size: int
    threshold: float
    consecutive_points: int


def detect_burn_in(
    rewards: list[float], window_size: int, threshold: float, consecutive_points: int
) -> BurnInReport:
    """Find where a reward curve stabilizes.

    A trailing moving average of width window_size smooths the curve; its
    first differences are scanned for the first run of consecutive_points
    entries below threshold in magnitude. The reported index refers to the
    original curve (the position of the first difference in the run, i.e.
    at least window_size - 1).
    """
    if window_size < 1 or consecutive_points < 1:
        raise ValueError("window_size and consecutive_points must be >= 1")
    n = len(rewards)
    if n < window_size + consecutive_points:
        raise InsufficientData(
            f"need at least {window_size + consecutive_points} rewards, got {n}"
        )
    smoothed = [
        sum(rewards[k - window_size + 1 : k + 1]) / window_size
        for k in range(window_size - 1, n)
    ]
    derivative = [b - a for a, b in zip(smoothed, smoothed[1:])]

    idx = None
    run = 0
    for i, d in enumerate(derivative):
        run = run + 1 if abs(d) < threshold else 0
        if run >= consecutive_points:
            idx = (i - consecutive_points + 1) + window_size - 1
            break
    return BurnInReport(idx, smoothed, derivative, window_size, threshold, consecutive_points)


# -- shared rollout helpers --------------------------------------------------------


def evaluate_policy(
    agent: DdpgAgent,
    env_config: TopologyConfig,
    timesteps: int = 100,
    seed: int = 0,
    events_per_step: int = 100,
    reward_skip: int = 0,
) -> float:
    """Total reward of the frozen (noise-free) policy over a fresh rollout."""
    env = RlEnv(env_config, seed=seed, events_per_step=events_per_step, reward_skip=reward_skip)
    state = env.get_state()
    total = 0.0
    for _ in range(timesteps):
        state = env.get_next_state(agent.select_action(state))
        total += env.get_reward()
    return total


def _throughput_rollout(agent: DdpgAgent, env: RlEnv, timesteps: int) -> list[float]:
    """Cumulative throughput rate (total exits / clock) after each step."""
    state = env.get_state()
    series = []
    for _ in range(timesteps):
        state = env.get_next_state(agent.select_action(state))
        series.append(sum(env.net.exits_total.values()) / env.net.clock)
    return series


# -- convergence -------------------------------------------------------------------


EVAL_INTERVAL = 10  # episodes between policy evaluations
EVAL_TIMESTEPS = 100


@dataclass
class ConvergenceReport:
    evaluations: list[tuple[int, float]]  # (episodes trained, total eval reward)
    stop_reason: str  # local_maximum | plateau | completed
    episodes_trained: int


def _tail_stop(series: list[float], threshold: float, consecutive_points: int) -> Optional[str]:
    """Stop reason if the last consecutive_points differences all decrease
    by more than threshold (local maximum) or all move less than threshold
    (plateau); None otherwise."""
    c = consecutive_points
    if len(series) < c + 1:
        return None
    diffs = [series[i + 1] - series[i] for i in range(len(series) - c - 1, len(series) - 1)]
    if all(d < -threshold for d in diffs):
        return "local_maximum"
    if all(abs(d) < threshold for d in diffs):
        return "plateau"
    return None


def early_stop_index(
    series: list[float], threshold: float, consecutive_points: int
) -> tuple[Optional[int], str]:
    """First position at which a left-to-right scan would stop, with reason."""
    for k in range(len(series)):
        reason = _tail_stop(series[: k + 1], threshold, consecutive_points)
        if reason is not None:
            return k, reason
    return None, "completed"


def _trailing_ma(series: list[float], window: int) -> list[float]:
    if window <= 1:
        return list(series)
    return [
        sum(series[max(0, k - window + 1) : k + 1]) / len(series[max(0, k - window + 1) : k + 1])
        for k in range(len(series))
    ]


def convergence_train(
    agent_params: AgentParams,
    env_config: TopologyConfig,
    window_size: int = 1,
    threshold: float = 1.0,
    consecutive_points: int = 3,
) -> ConvergenceReport:
    """Train with periodic frozen-policy evaluations and early stopping.

    Every EVAL_INTERVAL episodes the policy runs EVAL_TIMESTEPS steps in a
    fresh identically-seeded env; its total reward extends the evaluation
    series. The series (smoothed by a trailing moving average of width
    window_size) stops training at the first local maximum or plateau.
    """
    env = RlEnv(
        env_config,
        seed=agent_params.seed,
        events_per_step=agent_params.events_per_step,
        reward_skip=agent_params.reward_skip,
    )
    agent = DdpgAgent(env.state_dim, env.action_dim, agent_params)

    evaluations: list[tuple[int, float]] = []
    series: list[float] = []
    episodes_done = 0
    reason = "completed"
    while episodes_done < agent_params.num_episodes:
        chunk = min(EVAL_INTERVAL, agent_params.num_episodes - episodes_done)
        agent.train(env, num_episodes=chunk, episode_seed=agent_params.seed + episodes_done)
        episodes_done += chunk
        score = evaluate_policy(
            agent,
            env_config,
            timesteps=EVAL_TIMESTEPS,
            seed=agent_params.seed,
            events_per_step=agent_params.events_per_step,
            reward_skip=agent_params.reward_skip,
        )
        evaluations.append((episodes_done, score))
        series.append(score)
        stop = _tail_stop(_trailing_ma(series, window_size), threshold, consecutive_points)
        if stop is not None:
            reason = stop
            break
    return ConvergenceReport(evaluations, reason, episodes_done)


# -- noise -------------------------------------------------------------------------


@dataclass
class NoiseConfig:
    mean: float = 0.0
    variance: float = 1.0
    frequency: float = 0.5

    def validate(self) -> None:
        if self.variance < 0:
            raise ConfigError("noise variance must be >= 0")
        if not 0.0 <= self.frequency <= 1.0:
            raise ConfigError("noise frequency must be in [0, 1]")


def noisy_interarrival(base: float, cfg: NoiseConfig, rng: random.Random) -> float:
    """Perturb an interarrival gap with probability cfg.frequency by a
    normal increment, floored at T_FLOOR."""
    if base <= 0:
        raise ValueError("base interarrival time must be > 0")
    if rng.random() >= cfg.frequency:
        return base
    delta = rng.gauss(cfg.mean, math.sqrt(cfg.variance))
    return max(base + delta, T_FLOOR)


def make_noise_hook(cfg: NoiseConfig, seed: int) -> Callable[[float], float]:
    """Interarrival transform with its own RNG, so zero-noise configs leave
    the network's random stream untouched."""
    cfg.validate()
    rng = random.Random(seed)
    return lambda base: noisy_interarrival(base, cfg, rng)


@dataclass
class NoiseReport:
    standard_series: list[float]
    noisy_series: list[float]
    mode: str


def evaluate_noise(
    agent: DdpgAgent,
    env_config: TopologyConfig,
    cfg: NoiseConfig,
    mode: str = "evaluate",
    timesteps: int = 100,
    seed: int = 0,
    events_per_step: int = 100,
) -> NoiseReport:
    """Matched rollouts in a standard and a noise-perturbed environment.

    mode "retrain" first trains the agent inside the noisy environment;
    mode "evaluate" uses the agent as-is.
    """
    cfg.validate()
    if mode not in ("evaluate", "retrain"):
        raise ConfigError(f"unknown noise mode {mode!r}")
    if mode == "retrain":
        noisy_train_env = RlEnv(
            env_config,
            seed=agent.params.seed,
            events_per_step=agent.params.events_per_step,
            reward_skip=agent.params.reward_skip,
            interarrival_noise=make_noise_hook(cfg, agent.params.seed + 1),
        )
        agent.train(noisy_train_env)

    standard_env = RlEnv(env_config, seed=seed, events_per_step=events_per_step)
    noisy_env = RlEnv(
        env_config,
        seed=seed,
        events_per_step=events_per_step,
        interarrival_noise=make_noise_hook(cfg, seed + 1),
    )
    return NoiseReport(
        standard_series=_throughput_rollout(agent, standard_env, timesteps),
        noisy_series=_throughput_rollout(agent, noisy_env, timesteps),
        mode=mode,
    )


# -- disruption --------------------------------------------------------------------


@dataclass
class DisruptionReport:
    pre_probas: dict[int, dict[int, float]]
    post_probas: dict[int, dict[int, float]]
    pre_throughput: float
    post_throughput: float
    affected_node: int


def evaluate_disruption(
    agent: DdpgAgent,
    env_config: TopologyConfig,
    node: int,
    steps: int = 50,
    seed: int = 0,
    events_per_step: int = 100,
) -> DisruptionReport:
    """Roll out, block a node, roll out again; report routing and throughput
    snapshots from both phases."""
    if not 0 <= node < env_config.num_nodes:
        raise UnknownNode(f"node {node} not in network")
    if node not in env_config.blockable_nodes():
        raise ConfigError(f"node {node} is not blockable")

    env = RlEnv(env_config, seed=seed, events_per_step=events_per_step)
    state = env.get_state()
    probas = None
    for _ in range(steps):
        action = agent.select_action(state)
        probas = env.action_to_transition_probas(action)
        state = env.get_next_state(action)
    pre_probas = probas
    pre_exits = sum(env.net.exits_total.values())
    pre_clock = env.net.clock
    pre_throughput = pre_exits / pre_clock

    env.net.set_blockage(node)
    for _ in range(steps):
        action = agent.select_action(state)
        probas = env.action_to_transition_probas(action)
        state = env.get_next_state(action)
    post_exits = sum(env.net.exits_total.values())
    post_throughput = (post_exits - pre_exits) / (env.net.clock - pre_clock)

    return DisruptionReport(pre_probas, probas, pre_throughput, post_throughput, node)


# -- robustness --------------------------------------------------------------------


@dataclass
class RobustnessReport:
    per_agent_final_probas: list[dict[int, dict[int, float]]]
    entry_std: dict[tuple[int, int], float]
    sigma: float
    z: float
    margin: float
    required_runs: int
    agent_seeds: list[int] = field(default_factory=list)


def required_runs(z: float, sigma: float, margin: float) -> int:
    """Sample size for a confidence level and error margin: the squared
    (z * sigma / margin), rounded up, never below one run."""
    if margin <= 0:
        raise ConfigError("margin must be > 0")
    if sigma < 0 or z < 0:
        raise ConfigError("sigma and z must be >= 0")
    return max(1, math.ceil((z * sigma / margin) ** 2))


def _train_and_snapshot(args) -> dict[int, dict[int, float]]:
    params, env_config, eval_seed, time_steps = args
    env = RlEnv(env_config, seed=params.seed, events_per_step=params.events_per_step,
                reward_skip=params.reward_skip)
    agent = DdpgAgent(env.state_dim, env.action_dim, params)
    train_with_blockage_exploration(agent, env_config, params)

    eval_env = RlEnv(env_config, seed=eval_seed, events_per_step=params.events_per_step)
    state = eval_env.get_state()
    probas = None
    for _ in range(time_steps):
        action = agent.select_action(state)
        probas = eval_env.action_to_transition_probas(action)
        state = eval_env.get_next_state(action)
    return probas


def robustness_evaluate(
    agent_params: AgentParams,
    env_config: TopologyConfig,
    num_agents: int = 10,
    time_steps: int = 50,
    z: float = 1.96,
    margin: float = 0.1,
    seeds: Optional[list[int]] = None,
    workers: int = 1,
) -> RobustnessReport:
    """Train independent agents, replay them under identical initial
    conditions, and estimate how many runs the decision spread requires.

    sigma is the largest across-agent standard deviation over individual
    (node, successor) probabilities of the final transition maps.
    """
    if num_agents < 2:
        raise ConfigError("num_agents must be >= 2")
    if margin <= 0:
        raise ConfigError("margin must be > 0")
    if seeds is None:
        seeds = [agent_params.seed + i for i in range(num_agents)]
    elif len(seeds) != num_agents:
        raise ConfigError("seeds length must equal num_agents")

    eval_seed = agent_params.seed
    jobs = [
        (replace(agent_params, seed=s), env_config, eval_seed, time_steps) for s in seeds
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            maps = list(pool.map(_train_and_snapshot, jobs))
    else:
        maps = [_train_and_snapshot(j) for j in jobs]

    entry_std: dict[tuple[int, int], float] = {}
    for node, row in maps[0].items():
        for succ in row:
            values = np.array([m[node][succ] for m in maps])
            entry_std[(node, succ)] = float(np.std(values))
    sigma = max(entry_std.values()) if entry_std else 0.0
    return RobustnessReport(
        per_agent_final_probas=maps,
        entry_std=entry_std,
        sigma=sigma,
        z=z,
        margin=margin,
        required_runs=required_runs(z, sigma, margin),
        agent_seeds=list(seeds),
    )
