"""Multi-tier underwater computing: acoustic links, AUV routing in vortex
currents, offloading and caching economics, and an actor-critic planner."""

__version__ = "0.1.0"
