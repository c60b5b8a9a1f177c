"""
Heartbeat-counting failure detector
"""
import logging

from ordered_set import OrderedSet

logger = logging.getLogger(__name__)


class HeartbeatVector:
    """
    Heartbeat ages of the peers of `owner`.

    Every heartbeat from p_j resets counts[j] to 0 and ages every other
    entry by one, so crashed peers drift to the end of the ranking.
    """

    def __init__(self, owner, n_bound, gap_factor=4, counts=None):
        self.owner = owner
        self.n_bound = n_bound
        self.gap_factor = gap_factor
        self.counts = dict(counts or {})
        self.override = None

    def on_heartbeat(self, j):
        if j == self.owner:
            return self
        for k in self.counts:
            if k != j:
                self.counts[k] += 1
        self.counts[j] = 0
        return self

    def ranking(self):
        return sorted(self.counts.items(), key=lambda kv: (kv[1], kv[0]))

    def estimate_n(self):
        """Number of peers ranked before the first significant gap, capped at N"""
        ranked = [count for _, count in self.ranking()][:self.n_bound]
        if not ranked:
            return 1
        n = len(ranked)
        highest = 0
        for k in range(len(ranked) - 1):
            highest = max(highest, ranked[k])
            if ranked[k + 1] > self.gap_factor * max(highest, 1):
                n = k + 1
                break
        return min(n, self.n_bound)

    def trusted(self):
        if self.override is not None:
            return OrderedSet([self.owner] + sorted(p for p in self.override if p != self.owner))
        keep = min(self.estimate_n(), max(self.n_bound - 1, 0))
        peers = [pid for pid, _ in self.ranking()][:keep]
        return OrderedSet([self.owner] + peers)

    def corrupt(self, rng, universe):
        self.counts = {pid: rng.randrange(0, 50) for pid in universe
                       if pid != self.owner and rng.random() < 0.8}

    def __repr__(self):
        return f'<HeartbeatVector {self.owner} {self.counts}>'
