"""Reference/unknown plant simulation, Lyapunov region analysis and compensator design."""

__version__ = "0.1.0"
