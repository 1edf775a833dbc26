"""Finite possible-worlds model checker for Hardy-type nonlocality arguments."""

from .experiment import HARDY_CAUSAL, HARDY_SETUP, CausalStructure, Setup, World, WorldSet
from .formula import parse, to_text
from .report import Verdict
from .semantics import Model

__all__ = [
    "HARDY_CAUSAL",
    "HARDY_SETUP",
    "CausalStructure",
    "Model",
    "Setup",
    "Verdict",
    "World",
    "WorldSet",
    "parse",
    "to_text",
]
__version__ = "0.1.0"
