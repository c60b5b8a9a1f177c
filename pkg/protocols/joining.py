"""
Joining: a non-participant collects passes from a majority of the
configuration members before it calls participate()
"""
import logging
from dataclasses import dataclass

from models.types import is_set
from netsim.datalink import Outgoing

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class JoinRequest:
    pass


@dataclass(frozen=True)
class PassReply:
    granted: bool
    state: object


class StaticAdmission:
    """Application hooks for stacks without a replicated application: always admits, carries no state"""

    def reset_vars(self):
        pass

    def init_vars(self, states):
        pass

    def pass_query(self):
        return True

    def export_state(self):
        return None

    def tainted(self):
        return False


class Joining:

    def __init__(self, me, application=None):
        self.me = me
        self.application = application or StaticAdmission()
        self.passes = {}
        self.states = {}
        self.joining = False
        self.com_conf = None
        self.events = []

    def tick(self, recsa):
        if recsa.is_participant():
            self.joining = False
            return []
        if not self.joining:
            self.application.reset_vars()
            self.passes.clear()
            self.states.clear()
            self.joining = True

        com_conf = recsa.get_config()
        if com_conf != self.com_conf:
            self.passes.clear()
            self.states.clear()
            self.com_conf = com_conf

        no_reco = recsa.no_reco()
        if is_set(com_conf) and no_reco:
            granted = [j for j in sorted(com_conf & frozenset(recsa.trusted)) if self.passes.get(j)]
            if len(granted) > len(com_conf) / 2:
                self.application.init_vars({j: self.states[j] for j in granted})
                if recsa.participate():
                    self.events.append(('join', {'config': com_conf, 'passes': tuple(granted),
                                                 'no_reco': no_reco,
                                                 'tainted': self.application.tainted()}))
                    logger.debug("p%s joined with passes from %s", self.me, granted)
                    self.joining = False
                    return []

        return [Outgoing(j, 'join', JoinRequest()) for j in recsa.trusted if j != self.me]

    def on_join_request(self, recsa, j):
        config = recsa.get_config()
        if is_set(config) and self.me in config and recsa.no_reco():
            return [Outgoing(j, 'pass', PassReply(self.application.pass_query(),
                                                  self.application.export_state()))]
        return []

    def on_pass(self, recsa, j, reply):
        if recsa.is_participant():
            return
        self.passes[j] = reply.granted
        self.states[j] = reply.state

    def corrupt(self, values, rng, universe):
        if values is None:
            self.joining = rng.random() < 0.5
            self.passes = {k: rng.random() < 0.5 for k in universe if k != self.me}
            self.states = {k: None for k in self.passes}
            return
        if 'passes' in values:
            self.passes = {k: bool(v) for k, v in values['passes'].items()}
            self.states = {k: None for k in self.passes}
        if 'joining' in values:
            self.joining = bool(values['joining'])
