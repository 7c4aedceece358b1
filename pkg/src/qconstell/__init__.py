"""Construct, verify and search for discrete quantum structures: SIC POVMs,
mutually unbiased bases, orthogonal quantum Latin squares / AME states, and
distillability witnesses for Werner states."""

__version__ = "0.1.0"
