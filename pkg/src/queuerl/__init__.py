"""Simulation-driven reinforcement learning for queueing-network routing."""

from .netsim import (
    JobRecord,
    QueueNetwork,
    TopologyConfig,
    build_network,
    feed_forward_topology,
    figure_topology,
    mm1_topology,
)
from .rl_env import RlEnv
from .buffer import Experience, ReplayBuffer
from .model import Adam, Mlp
from .agent import AgentParams, DdpgAgent, TrainingTrace, load_agent, save_agent
from .exploration import StartMode, StateTracker, choose_start_mode, train_with_blockage_exploration

__all__ = [
    "Adam",
    "AgentParams",
    "DdpgAgent",
    "Experience",
    "JobRecord",
    "Mlp",
    "QueueNetwork",
    "ReplayBuffer",
    "RlEnv",
    "StartMode",
    "StateTracker",
    "TopologyConfig",
    "TrainingTrace",
    "build_network",
    "choose_start_mode",
    "feed_forward_topology",
    "figure_topology",
    "load_agent",
    "mm1_topology",
    "save_agent",
    "train_with_blockage_exploration",
]
