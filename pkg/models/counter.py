"""
Counters built on epoch labels
"""
from dataclasses import dataclass
from typing import Optional

from models.label import EpochLabel, Order, label_cmp


@dataclass(frozen=True)
class CounterTriple:
    lbl: EpochLabel
    seqn: int
    wid: int

    def exhausted(self, bits):
        return self.seqn >= 2 ** bits

    def __str__(self):
        return f"C({self.lbl},{self.seqn},{self.wid})"


def counter_cmp(a, b):
    """≺_ct: label order first, then sequence number, then writer id"""
    order = label_cmp(a.lbl, b.lbl)
    if order is not Order.EQUAL:
        return order
    if (a.seqn, a.wid) < (b.seqn, b.wid):
        return Order.LESS
    if (a.seqn, a.wid) > (b.seqn, b.wid):
        return Order.GREATER
    return Order.EQUAL


def counter_precedes(a, b):
    return counter_cmp(a, b) is Order.LESS


def counter_leq(a, b):
    return counter_cmp(a, b) in (Order.LESS, Order.EQUAL)


@dataclass(frozen=True)
class CounterPair:
    """A counter (mct) and, once cancelled, the counter that cancelled it (cct)"""
    mct: Optional[CounterTriple]
    cct: Optional[CounterTriple] = None

    @property
    def primary(self):
        return self.mct

    @property
    def canceling(self):
        return self.cct

    @property
    def label(self):
        return self.mct.lbl if self.mct is not None else None

    @property
    def canceling_label(self):
        return self.cct.lbl if self.cct is not None else None

    @property
    def legit(self):
        return self.mct is not None and self.cct is None

    @property
    def empty(self):
        return self.mct is None

    def cancelled_by(self, other):
        return CounterPair(self.mct, other)


EMPTY_COUNTER_PAIR = CounterPair(None, None)
