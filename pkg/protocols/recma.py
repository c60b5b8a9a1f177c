"""
Reconfiguration management: decides when to call estab()
"""
import logging
from dataclasses import dataclass

from models.types import BOTTOM, describe, is_set
from netsim.datalink import Outgoing

logger = logging.getLogger(__name__)

COLLAPSE = 'collapse'
PREDICTION = 'prediction'
DELICATE = 'delicate'


@dataclass(frozen=True)
class RecmaMessage:
    no_maj: bool
    need_reconf: bool


class Prediction:
    """
    evalConf() policies.

    off            never asks for a reconfiguration
    drift          the configuration differs from the trusted participant set
    fraction:x     fewer than x of the configuration members are trusted
    """

    def __init__(self, policy='off'):
        self.policy = policy
        self.threshold = None
        if policy.startswith('fraction:'):
            self.threshold = float(policy.split(':', 1)[1])
        elif policy not in ('off', 'drift'):
            raise ValueError(f"unknown prediction policy '{policy}'")

    def evaluate(self, current, recsa):
        if not is_set(current) or self.policy == 'off':
            return False
        if self.policy == 'drift':
            return current != recsa.part()
        trusted = current & frozenset(recsa.trusted)
        return len(trusted) < self.threshold * len(current)

    def __repr__(self):
        return f'<Prediction {self.policy}>'


class Recma:

    def __init__(self, me, prediction=None):
        self.me = me
        self.prediction = prediction or Prediction()
        self.delicate_hook = None
        self.need_reconf = {}
        self.no_maj = {}
        self.prev_config = BOTTOM
        self.events = []

    def flush_flags(self):
        for k in self.need_reconf:
            self.need_reconf[k] = False
        for k in self.no_maj:
            self.no_maj[k] = False

    def core(self, recsa):
        result = None
        for j in recsa.part():
            view = recsa.fd.get(j)
            snapshot = view.part if view is not None else frozenset()
            result = snapshot if result is None else result & snapshot
        return result or frozenset()

    def tick(self, recsa):
        if not recsa.is_participant():
            return []
        me = self.me
        self.need_reconf[me] = False
        self.no_maj[me] = False

        current = recsa.get_config()
        if self.prev_config is not BOTTOM and self.prev_config != current:
            self.flush_flags()

        if recsa.no_reco() and is_set(current):
            self.prev_config = current
            fd = frozenset(recsa.trusted)
            self.no_maj[me] = len(current & fd) < len(current) // 2 + 1
            core = self.core(recsa)
            if self.no_maj[me] and len(core) > 1 and all(self.no_maj.get(k, False) for k in core):
                self._trigger(recsa, COLLAPSE)
            elif self.delicate_hook is not None:
                if self.delicate_hook():
                    self._trigger(recsa, DELICATE)
            else:
                self.need_reconf[me] = self.prediction.evaluate(current, recsa)
                supporters = [k for k in current & fd if self.need_reconf.get(k, False)]
                if self.need_reconf[me] and len(supporters) > len(current) / 2:
                    self._trigger(recsa, PREDICTION)

        message = RecmaMessage(self.no_maj[me], self.need_reconf[me])
        return [Outgoing(k, 'recma', message) for k in sorted(recsa.part() - {me})]

    def _trigger(self, recsa, cause):
        target = recsa.part()
        effective = recsa.estab(target)
        self.events.append(('trigger', {'cause': cause, 'value': target, 'effective': effective}))
        logger.debug("p%s recMA trigger cause=%s estab(%s) effective=%s",
                     self.me, cause, describe(target), effective)
        self.flush_flags()

    def on_receive(self, recsa, j, message):
        if not recsa.is_participant():
            return
        self.no_maj[j] = message.no_maj
        self.need_reconf[j] = message.need_reconf

    def corrupt(self, values, rng, universe):
        if values is None:
            for k in universe:
                self.no_maj[k] = rng.random() < 0.5
                self.need_reconf[k] = rng.random() < 0.5
            self.prev_config = frozenset(k for k in universe if rng.random() < 0.5)
            return
        self.no_maj.update({k: bool(v) for k, v in values.get('no_maj', {}).items()})
        self.need_reconf.update({k: bool(v) for k, v in values.get('need_reconf', {}).items()})
        if 'prev_config' in values:
            stale = values['prev_config']
            self.prev_config = BOTTOM if stale is None else frozenset(stale)
