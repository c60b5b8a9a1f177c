"""
Schedule parameters and fairness bookkeeping
"""
from dataclasses import dataclass


@dataclass(frozen=True)
class Schedule:
    seed: int
    step_budget: int
    fairness_window: int
    timer_probability: float = 0.3


class FairnessLedger:
    """
    Tracks how long each busy channel and each live processor has waited.

    A channel that stays non-empty for more than `window` steps without a
    delivery, or a live processor not activated for more than `window`
    steps, is served by a forced step.
    """

    def __init__(self, window):
        self.window = window
        self.channel_since = {}
        self.node_since = {}

    def channel_busy(self, key, step):
        self.channel_since.setdefault(key, step)

    def channel_served(self, key, step, still_busy):
        if still_busy:
            self.channel_since[key] = step
        else:
            self.channel_since.pop(key, None)

    def node_activated(self, pid, step):
        self.node_since[pid] = step

    def forget_node(self, pid):
        self.node_since.pop(pid, None)

    def overdue(self, step, busy_channels, live_nodes):
        """The most overdue item as ('deliver', key) or ('timer', pid), or None"""
        worst = None
        for key in busy_channels:
            waited = step - self.channel_since.get(key, step)
            if waited > self.window and (worst is None or waited > worst[0]):
                worst = (waited, ('deliver', key))
        for pid in live_nodes:
            waited = step - self.node_since.get(pid, step)
            if waited > self.window and (worst is None or waited > worst[0]):
                worst = (waited, ('timer', pid))
        return worst[1] if worst else None
