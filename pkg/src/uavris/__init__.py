"""UAV-mounted RIS downlink simulator with nonlinear energy harvesting and
actor-critic agents (DDPG, TD3, SSD3) for time-switching, power and phase control."""

__version__ = "0.1.0"
