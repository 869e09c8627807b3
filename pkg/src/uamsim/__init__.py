"""uamsim: a deterministic simulation of a small urban-air-mobility ecosystem."""
from __future__ import annotations

__version__ = "0.1.0"
