"""Freezing-of-gait onset prediction: DMD-based TI features, prioritized
replay and a double DQN agent that decides when to place a prediction."""

__version__ = "0.1.0"
