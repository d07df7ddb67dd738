"""Desk-scale deterministic RTS with macro-action RL and scripted agents."""
from __future__ import annotations

__version__ = "0.1.0"
