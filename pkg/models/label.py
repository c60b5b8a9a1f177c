"""
Bounded epoch labels and their partial order
"""
from dataclasses import dataclass
from enum import Enum
from typing import FrozenSet, Optional


class Order(Enum):
    LESS = '<'
    EQUAL = '='
    GREATER = '>'
    INCOMPARABLE = '?'


@dataclass(frozen=True)
class EpochLabel:
    creator: int
    sting: int
    antistings: FrozenSet[int]

    def sort_key(self):
        """Deterministic tie-break among incomparable labels"""
        return (self.creator, self.sting, tuple(sorted(self.antistings)))

    def __str__(self):
        return f"L({self.creator}:{self.sting})"


def label_precedes(a, b):
    """a ≺ b: lower creator, or same creator with a's sting cancelled by b"""
    if a.creator != b.creator:
        return a.creator < b.creator
    return a.sting in b.antistings and b.sting not in a.antistings


def label_cmp(a, b):
    if a == b:
        return Order.EQUAL
    if label_precedes(a, b):
        return Order.LESS
    if label_precedes(b, a):
        return Order.GREATER
    return Order.INCOMPARABLE


def label_leq(a, b):
    return a == b or label_precedes(a, b)


@dataclass(frozen=True)
class LabelPair:
    """A label (ml) and, once cancelled, the label that cancelled it (cl)"""
    ml: Optional[EpochLabel]
    cl: Optional[EpochLabel] = None

    @property
    def primary(self):
        return self.ml

    @property
    def canceling(self):
        return self.cl

    @property
    def label(self):
        return self.ml

    @property
    def canceling_label(self):
        return self.cl

    @property
    def legit(self):
        return self.ml is not None and self.cl is None

    @property
    def empty(self):
        return self.ml is None

    def cancelled_by(self, other):
        return LabelPair(self.ml, other)


EMPTY_LABEL_PAIR = LabelPair(None, None)
