"""Adaptive traffic signal control with deep Q-learning on a simulated intersection."""

from .agent import DQNAgent, Experience, Hyperparams, ReplayMemory
from .network import Architecture, NetworkParams, forward, init_params
from .observation import Observation, encode
from .sim import Intersection, RouteTable, SignalSchedule

__version__ = "0.1.0"
