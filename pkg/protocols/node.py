"""
One processor: the protocol layers stacked on the failure detector
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

from models.view import ViewState
from protocols.app_log import AppendLog
from protocols.counter import CounterMessage, Counting, ReadReply, ReadRequest, WriteReply, WriteRequest
from protocols.fd import HeartbeatVector
from protocols.joining import JoinRequest, Joining, PassReply
from protocols.labeling import LabelMessage, Labeling
from protocols.recma import Prediction, Recma, RecmaMessage
from protocols.recsa import Recsa, RecsaMessage
from protocols.vssmr import VirtualSynchrony

logger = logging.getLogger(__name__)

ALL_LAYERS = ('recsa', 'recma', 'joining', 'labeling', 'counter', 'vs')

RECSA_KEYS = ('config', 'prp', 'all', 'fd', 'all_seen')
RECMA_KEYS = ('no_maj', 'need_reconf', 'prev_config')


@dataclass
class NodeSettings:
    n_bound: int
    cap: int
    gap_factor: float = 4
    counter_bits: int = 64
    layers: Tuple[str, ...] = ALL_LAYERS
    prediction: str = 'off'
    script: Optional[dict] = field(default=None)
    auto_inputs: bool = True

    def enabled(self, layer):
        return layer in self.layers


class Node:

    def __init__(self, pid, settings):
        self.pid = pid
        self.settings = settings
        self.fd = HeartbeatVector(pid, settings.n_bound, settings.gap_factor)
        self.recsa = Recsa(pid)
        self.prediction = Prediction(settings.prediction)

        self.recma = Recma(pid, self.prediction) if settings.enabled('recma') else None
        self.labeling = Labeling(pid, settings.cap) if settings.enabled('labeling') else None
        wants_vs = settings.enabled('vs')
        self.counter = Counting(pid, settings.cap, settings.counter_bits) \
            if settings.enabled('counter') or wants_vs else None
        self.vs = None
        if wants_vs:
            script = (settings.script or {}).get(pid)
            self.vs = VirtualSynchrony(pid, self.recsa, self.counter, self.prediction,
                                       AppendLog(pid, script, settings.auto_inputs))
            if self.recma is not None:
                self.recma.delicate_hook = self.vs.need_delicate_reconf
        self.joining = Joining(pid, self.vs) if settings.enabled('joining') else None

        self._handlers = {
            RecsaMessage: self._on_recsa,
            RecmaMessage: self._on_recma,
            JoinRequest: self._on_join_request,
            PassReply: self._on_pass,
            LabelMessage: self._on_label,
            CounterMessage: self._on_counter,
            ReadRequest: self._on_read,
            ReadReply: self._on_read_reply,
            WriteRequest: self._on_write,
            WriteReply: self._on_write_reply,
            ViewState: self._on_view_state,
        }

    @property
    def layers(self):
        return [layer for layer in (self.recsa, self.recma, self.joining, self.labeling, self.counter, self.vs)
                if layer is not None]

    def on_timer(self, step):
        outgoing = list(self.recsa.loop(self.fd.trusted()))
        if self.recma is not None:
            outgoing.extend(self.recma.tick(self.recsa))
        if self.joining is not None:
            outgoing.extend(self.joining.tick(self.recsa))
        if self.labeling is not None:
            outgoing.extend(self.labeling.tick(self.recsa))
        if self.counter is not None:
            outgoing.extend(self.counter.tick(self.recsa, step))
        if self.vs is not None:
            outgoing.extend(self.vs.tick(step))
        return outgoing

    def on_message(self, src, message, step):
        handler = self._handlers.get(type(message))
        if handler is None:
            logger.debug("p%s dropped unexpected %s from p%s", self.pid, type(message).__name__, src)
            return []
        return handler(src, message, step) or []

    def on_heartbeat(self, src):
        self.fd.on_heartbeat(src)

    def set_fd_override(self, live):
        self.fd.override = live

    def request_increment(self, tag=None):
        if self.counter is not None:
            self.counter.request_increment(tag)

    def counter_busy(self):
        return self.counter is not None and self.counter.busy

    def set_prediction(self, policy):
        replacement = Prediction(policy)
        self.prediction.policy = replacement.policy
        self.prediction.threshold = replacement.threshold

    def drain_records(self):
        records = []
        for layer in self.layers:
            records.extend(layer.events)
            layer.events.clear()
        return tuple(records)

    def _on_recsa(self, src, message, step):
        self.recsa.on_receive(src, message)

    def _on_recma(self, src, message, step):
        if self.recma is not None:
            self.recma.on_receive(self.recsa, src, message)

    def _on_join_request(self, src, message, step):
        if self.joining is not None:
            return self.joining.on_join_request(self.recsa, src)
        return []

    def _on_pass(self, src, message, step):
        if self.joining is not None:
            self.joining.on_pass(self.recsa, src, message)

    def _on_label(self, src, message, step):
        if self.labeling is not None:
            self.labeling.on_receive(self.recsa, src, message)

    def _on_counter(self, src, message, step):
        if self.counter is not None:
            self.counter.on_receive(self.recsa, src, message)

    def _on_read(self, src, message, step):
        if self.counter is not None:
            return self.counter.on_read(self.recsa, src, message, step)
        return []

    def _on_read_reply(self, src, message, step):
        if self.counter is not None:
            return self.counter.on_read_reply(self.recsa, src, message, step)
        return []

    def _on_write(self, src, message, step):
        if self.counter is not None:
            return self.counter.on_write(self.recsa, src, message, step)
        return []

    def _on_write_reply(self, src, message, step):
        if self.counter is not None:
            return self.counter.on_write_reply(self.recsa, src, message, step)
        return []

    def _on_view_state(self, src, message, step):
        if self.vs is not None:
            self.vs.on_receive(src, message)

    def corrupt(self, values, rng, universe):
        """
        Overwrite local variables.

        values None randomizes every layer; otherwise keys select what to
        overwrite: recsa variables (config, prp, all, fd, all_seen), recma
        flags (no_maj, need_reconf, prev_config), joining (passes, joining), heartbeats,
        labels/counters (true randomizes the stores),
        vs ({taint, suspend, reconf_ready, no_crd, admit}).
        """
        if values is None:
            self.fd.corrupt(rng, universe)
            for layer in self.layers:
                layer.corrupt(None, rng, universe)
            return
        recsa_values = {k: values[k] for k in RECSA_KEYS if k in values}
        if recsa_values:
            self.recsa.corrupt(recsa_values, rng, universe)
        recma_values = {k: values[k] for k in RECMA_KEYS if k in values}
        if recma_values and self.recma is not None:
            self.recma.corrupt(recma_values, rng, universe)
        join_values = {k: values[k] for k in ('passes', 'joining') if k in values}
        if join_values and self.joining is not None:
            self.joining.corrupt(join_values, rng, universe)
        if 'heartbeats' in values:
            self.fd.counts = {int(k): int(v) for k, v in values['heartbeats'].items() if k != self.pid}
        if values.get('labels') and self.labeling is not None:
            self.labeling.corrupt(None, rng, universe)
        if values.get('counters') and self.counter is not None:
            self.counter.corrupt(None, rng, universe)
        if 'vs' in values and self.vs is not None:
            self.vs.corrupt(values['vs'], rng, universe)

    def snapshot(self):
        snapshot = {'pid': self.pid, 'trusted': frozenset(self.fd.trusted())}
        snapshot.update(self.recsa.snapshot())
        if self.labeling is not None:
            snapshot.update(self.labeling.snapshot())
        if self.counter is not None:
            snapshot.update(self.counter.snapshot())
        if self.vs is not None:
            snapshot.update(self.vs.snapshot())
        if self.joining is not None:
            snapshot['tainted'] = self.joining.application.tainted()
        return snapshot

    def __repr__(self):
        return f'<Node {self.pid} {self.recsa.cfg(self.pid)}>'
