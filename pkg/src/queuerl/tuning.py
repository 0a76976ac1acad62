"""Seeded random search over agent hyperparameters.

A SearchSpace names a subset of AgentParams fields and gives each either a
finite choice list or a (low, high) range with linear or log scaling.
Each trial trains one agent and scores the frozen policy over a fixed
evaluation rollout.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, fields, replace
from typing import Union

from .agent import AgentParams, DdpgAgent
from .errors import ConfigError
from .evaluation import evaluate_policy
from .exploration import train_with_blockage_exploration
from .netsim import TopologyConfig
from .rl_env import RlEnv

EVAL_TIMESTEPS = 100

_INT_FIELDS = {
    "num_epochs",
    "batch_size",
    "planning_steps",
    "num_samples",
    "num_episodes",
    "num_timesteps",
    "target_update_frequency",
    "buffer_capacity",
    "events_per_step",
    "reward_skip",
}


@dataclass
class RangeSpec:
    low: float
    high: float
    scale: str = "linear"  # or "log"


@dataclass
class ChoiceSpec:
    choices: list


@dataclass
class SearchSpace:
    specs: dict[str, Union[RangeSpec, ChoiceSpec]]
    trials: int = 10
    objective: str = "final_eval_reward"

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.objective != "final_eval_reward":
            raise ConfigError(f"unknown objective {self.objective!r}")
        known = {f.name for f in fields(AgentParams)}
        for name, spec in self.specs.items():
            if name not in known:
                raise ConfigError(f"{name} is not an agent hyperparameter")
            if isinstance(spec, ChoiceSpec):
                if not spec.choices:
                    raise ConfigError(f"{name}: empty choice list")
            elif isinstance(spec, RangeSpec):
                if spec.scale not in ("linear", "log"):
                    raise ConfigError(f"{name}: scale must be linear or log")
                if not spec.low < spec.high:
                    raise ConfigError(f"{name}: low must be < high")
                if spec.scale == "log" and spec.low <= 0:
                    raise ConfigError(f"{name}: log scale requires low > 0")
            else:
                raise ConfigError(f"{name}: unknown spec type {type(spec).__name__}")


def sample_params(space: SearchSpace, base: AgentParams, rng: random.Random) -> AgentParams:
    """Draw one parameter set from the space on top of the base params."""
    overrides = {}
    for name, spec in space.specs.items():
        if isinstance(spec, ChoiceSpec):
            value = spec.choices[rng.randrange(len(spec.choices))]
        elif spec.scale == "log":
            value = math.exp(rng.uniform(math.log(spec.low), math.log(spec.high)))
        else:
            value = rng.uniform(spec.low, spec.high)
        if name in _INT_FIELDS:
            value = int(round(value))
        elif name == "hidden_sizes":
            value = tuple(value)
        overrides[name] = value
    return replace(base, **overrides)


@dataclass
class TrialResult:
    params: AgentParams
    objective: float
    trial_index: int = 0


def random_search(
    space: SearchSpace,
    env_config: TopologyConfig,
    base_params: AgentParams,
    seed: int = 0,
) -> list[TrialResult]:
    """Run `space.trials` training runs with sampled params; results come
    back sorted by objective, best first. Each trial gets its own training
    seed derived from `seed`, so the search is reproducible end to end."""
    space.validate()
    rng = random.Random(seed)
    results = []
    for trial in range(space.trials):
        trial_seed = rng.randrange(2**31)
        params = replace(sample_params(space, base_params, rng), seed=trial_seed)
        params.validate()

        env = RlEnv(
            env_config,
            seed=params.seed,
            events_per_step=params.events_per_step,
            reward_skip=params.reward_skip,
        )
        agent = DdpgAgent(env.state_dim, env.action_dim, params)
        train_with_blockage_exploration(agent, env_config, params)
        score = evaluate_policy(
            agent,
            env_config,
            timesteps=EVAL_TIMESTEPS,
            seed=params.seed,
            events_per_step=params.events_per_step,
            reward_skip=params.reward_skip,
        )
        results.append(TrialResult(params=params, objective=score, trial_index=trial))
    results.sort(key=lambda r: r.objective, reverse=True)
    return results
