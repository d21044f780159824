"""A kernel for multimodal dependent type theory over a user-chosen mode theory."""

from .mode_theory import ModeTheory, builtin, parse_theory

__version__ = "0.1.0"

__all__ = ["ModeTheory", "builtin", "parse_theory", "__version__"]
