"""
Configuration values and replacement proposals
"""
from dataclasses import dataclass
from enum import Enum
from typing import FrozenSet, Union


class Marker(Enum):
    """Non-set configuration values"""
    BOTTOM = '⊥'  # reset in progress
    HASH = '#'    # not a participant


BOTTOM = Marker.BOTTOM
HASH = Marker.HASH

ConfigValue = Union[FrozenSet[int], Marker]


def is_set(value):
    return isinstance(value, frozenset)


def as_config(value):
    """Normalize a scenario or test literal into a ConfigValue"""
    if isinstance(value, Marker):
        return value
    if value in ('⊥', 'bottom', 'BOTTOM', None):
        return BOTTOM
    if value in ('#', 'hash', 'HASH'):
        return HASH
    return frozenset(value)


def value_key(value):
    """Total order on configuration values: Bottom first, then sets, Hash last"""
    if value is BOTTOM:
        return (0, ())
    if value is HASH:
        return (2, ())
    return (1, tuple(sorted(value)))


def describe(value):
    if isinstance(value, Marker):
        return value.value
    return '{' + ','.join(str(p) for p in sorted(value)) + '}'


@dataclass(frozen=True)
class Proposal:
    """Notification driving a delicate replacement; phase 0 with Bottom is the default"""
    phase: int
    value: ConfigValue

    @property
    def is_default(self):
        return self.phase == 0 and self.value is BOTTOM

    def key(self):
        return (self.phase, value_key(self.value))

    def __str__(self):
        return f"<{self.phase},{describe(self.value)}>"


DEFAULT_PROPOSAL = Proposal(0, BOTTOM)
