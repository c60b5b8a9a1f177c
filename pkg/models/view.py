"""
Replicated state records exchanged by the virtual synchrony layer
"""
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import FrozenSet, Optional, Tuple

from models.counter import CounterTriple


class Status(Enum):
    MULTICAST = 'Multicast'
    PROPOSE = 'Propose'
    INSTALL = 'Install'


@dataclass(frozen=True)
class View:
    id: Optional[CounterTriple]
    members: FrozenSet[int] = frozenset()

    def __str__(self):
        return f"V({self.id},{sorted(self.members)})"


NO_VIEW = View(None, frozenset())


@dataclass(frozen=True)
class ViewState:
    """One processor's replication record; msg holds (pid, message) pairs sorted by pid"""
    view: View = NO_VIEW
    status: Status = Status.MULTICAST
    rnd: int = 0
    replica: Tuple = ()
    msg: Tuple = ()
    input: Optional[object] = None
    prop_v: View = NO_VIEW
    no_crd: bool = True
    suspend: bool = False
    reconf_ready: bool = False
    fd_part: FrozenSet[int] = frozenset()
    crd: Optional[int] = None
    admit: bool = True

    def evolve(self, **changes):
        return replace(self, **changes)

    def messages(self):
        return dict(self.msg)

    def synch_key(self):
        """Order used when choosing the most advanced replica"""
        view_id = self.view.id
        if view_id is None:
            return (-1, (), -1, -1, self.rnd)
        return (0, view_id.lbl.sort_key(), view_id.seqn, view_id.wid, self.rnd)


INITIAL_VIEW_STATE = ViewState()
