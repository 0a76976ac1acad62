"""Blockage-exploration training regime.

Each episode starts either under normal conditions or with one interior
node's server blocked; the w1/w2 weights set the split. A StateTracker
keeps the highest-reward-impact states and visit counts of coarse state
signatures as training telemetry.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .agent import AgentParams, DdpgAgent, TrainingTrace
from .errors import NoBlockableNodes
from .netsim import TopologyConfig
from .rl_env import RlEnv


@dataclass(frozen=True)
class StartMode:
    node: Optional[int] = None  # None means a normal start

    def __str__(self) -> str:
        return "normal" if self.node is None else f"blocked:{self.node}"


class StateTracker:
    """Bounded record of key states (by |reward|) and visit counts."""

    def __init__(self, key_capacity: int = 32, peripheral_capacity: int = 1024):
        self.key_capacity = key_capacity
        self.peripheral_capacity = peripheral_capacity
        self.key_states: list[tuple[np.ndarray, float]] = []  # sorted by |reward| desc
        self.peripheral_states: dict[tuple[float, ...], int] = {}

    @staticmethod
    def signature(state: np.ndarray) -> tuple[float, ...]:
        return tuple(round(float(v), 1) for v in state)

    def record_visit(self, state: np.ndarray, reward: float) -> None:
        sig = self.signature(state)
        if sig in self.peripheral_states:
            self.peripheral_states[sig] += 1
        elif len(self.peripheral_states) < self.peripheral_capacity:
            self.peripheral_states[sig] = 1

        entry = (np.array(state, dtype=float), float(reward))
        if len(self.key_states) < self.key_capacity:
            self.key_states.append(entry)
        elif abs(reward) > abs(self.key_states[-1][1]):
            self.key_states[-1] = entry
        else:
            return
        self.key_states.sort(key=lambda e: abs(e[1]), reverse=True)


def choose_start_mode(
    w1: float, w2: float, topology: TopologyConfig, rng: random.Random
) -> StartMode:
    """Normal with probability w1/(w1+w2); otherwise block a uniformly
    drawn interior node."""
    if w1 < 0 or w2 < 0 or w1 + w2 <= 0:
        raise ValueError("w1 and w2 must be nonnegative with a positive sum")
    blockable = topology.blockable_nodes()
    if w2 > 0 and not blockable:
        raise NoBlockableNodes("topology has no interior node to block")
    if rng.random() < w1 / (w1 + w2):
        return StartMode()
    return StartMode(node=blockable[rng.randrange(len(blockable))])


def train_with_blockage_exploration(
    agent: DdpgAgent,
    env_config: TopologyConfig,
    params: AgentParams,
    tracker: Optional[StateTracker] = None,
) -> TrainingTrace:
    """agent.train with per-episode start modes drawn from w1/w2.

    Blocked episodes apply the blockage right after the reset and feed
    (state, reward) visits into the tracker. With w2 = 0 this reduces to
    plain training.
    """
    env = RlEnv(
        env_config,
        seed=params.seed,
        events_per_step=params.events_per_step,
        reward_skip=params.reward_skip,
    )
    mode_rng = random.Random(params.seed ^ 0x5EED)
    if params.w2 > 0:
        chooser = lambda: choose_start_mode(params.w1, params.w2, env_config, mode_rng)
    else:
        chooser = None
    return agent.train(env, start_mode_chooser=chooser, tracker=tracker)
