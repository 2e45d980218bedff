"""Satisfiability and validity for the multi-agent logic of knowing that and knowing how."""

__version__ = "0.1.0"

from .formula import (  # noqa: E402
    And, Bottom, BOTTOM, Formula, Know, KnowHow, Not, Prop, TOP, complement, depth, parse,
    pretty, sub_plus,
)
from .engine import Verdict, decide  # noqa: E402
from .extract import build_model, extract, truth_lemma_check  # noqa: E402
from .kripke import Model, evaluate, kh_classes, load_model  # noqa: E402
from .oracle import bounded_model_search, strategy_enumerate  # noqa: E402


def satisfiable(phi) -> bool:
    """Convenience wrapper: ``phi`` may be a formula or formula text."""
    if isinstance(phi, str):
        phi = parse(phi)
    return decide(phi).open


def valid(phi) -> bool:
    if isinstance(phi, str):
        phi = parse(phi)
    return decide(complement(phi)).closed
