"""
Replicated append-only log, the reference application of the virtual synchrony layer
"""
import itertools
from collections import deque

TAINT = 'taint'


class AppendLog:
    """
    fetch() pops the next scripted input; once the script runs dry it
    generates "<pid>:<n>" inputs unless auto is off.

    Replica entries are (view id, round, sender, message) so the messages
    delivered in a view can be read back from any replica.
    """

    def __init__(self, me, script=None, auto=True):
        self.me = me
        self.script = deque(script or ())
        self.auto = auto
        self._numbers = itertools.count(1)
        self.fetched = 0

    def fetch(self):
        if self.script:
            value = self.script.popleft()
        elif self.auto:
            value = f"{self.me}:{next(self._numbers)}"
        else:
            return None
        self.fetched += 1
        return value

    def apply(self, replica, msg, tag):
        view_id, rnd = tag
        return tuple(replica) + tuple((view_id, rnd, j, m) for j, m in msg if m is not None)

    def synch_state(self, states):
        return max(states, key=lambda s: s.synch_key()).replica

    def synch_msgs(self, states):
        return max(states, key=lambda s: s.synch_key()).msg


def delivered_in(replica, view_id):
    return tuple(entry for entry in replica if entry[0] == view_id)


def is_tainted(value):
    if isinstance(value, tuple):
        if value and value[0] == TAINT:
            return True
        return any(is_tainted(item) for item in value)
    return False
