"""
Deterministic discrete-event simulation of asynchronous processors
"""
import itertools
import logging
import random
from dataclasses import dataclass, field

from netsim.channel import Adversary, Channel, Packet, PacketKind
from netsim.datalink import LinkEndpoint, LinkState
from netsim.schedule import FairnessLedger
from utils.helpers import FaultSpecError, SimulationHalted, UnknownEndpointError, stable_digest

logger = logging.getLogger(__name__)

ADMISSIBLE = 'admissible'
UNRELIABLE = 'unreliable'


@dataclass
class Event:
    step: int
    pid: object
    kind: str
    digest: str = '-'
    data: dict = field(default_factory=dict)

    def to_line(self):
        return f"{self.step}\t{self.pid}\t{self.kind}\t{self.digest}"


class Simulation:
    """
    One sequential state machine holding every processor, channel and link.

    Nodes are supplied by node_factory(pid) and must provide on_timer,
    on_message, on_heartbeat, set_fd_override, drain_records and corrupt.
    """

    def __init__(self, schedule, cap, node_factory, adversary=None, fd_mode=ADMISSIBLE):
        self.schedule = schedule
        self.cap = cap
        self.adversary = adversary or Adversary()
        self.node_factory = node_factory
        self.fd_mode = fd_mode
        self.rng = random.Random(schedule.seed)

        self.nodes = {}
        self.crashed = set()
        self.channels = {}
        self.endpoints = {}
        self.step_no = 0
        self.fairness = FairnessLedger(schedule.fairness_window)
        self.listeners = []

        self._uids = itertools.count(1)
        self.last_session = 0
        self._sends = []

    @property
    def live(self):
        return sorted(pid for pid in self.nodes if pid not in self.crashed)

    def add_processor(self, pid, connect=True):
        """Register a processor and its channels to every registered peer"""
        if pid in self.nodes:
            raise FaultSpecError(f"processor {pid} already registered")
        node = self.node_factory(pid)
        for peer in sorted(self.nodes):
            for key in ((pid, peer), (peer, pid)):
                self.channels[key] = Channel(key[0], key[1], self.cap, self.adversary, self.rng)
                self.endpoints[key] = LinkEndpoint(key[0], key[1], self.cap)
        self.nodes[pid] = node
        self.fairness.node_activated(pid, self.step_no)
        if connect:
            for peer in self.live:
                if peer != pid:
                    self.establish_link(pid, peer)
        self._refresh_fd()
        return node

    def establish_link(self, pi, pj):
        """
        Reset both endpoints of the pair and start cleaning.

        The lower identifier cleans its direction first; the higher one starts
        when it receives the first token of the lower one.
        """
        lo, hi = min(pi, pj), max(pi, pj)
        for key in ((lo, hi), (hi, lo)):
            if key not in self.endpoints:
                raise UnknownEndpointError(f"no link between {pi} and {pj}")
            outbox = self.endpoints[key].outbox
            self.endpoints[key] = LinkEndpoint(key[0], key[1], self.cap)
            self.endpoints[key].outbox = outbox
        self.endpoints[(lo, hi)].start_cleaning(self._next_session())

    def crash(self, pid):
        if pid not in self.nodes:
            raise UnknownEndpointError(f"cannot crash unknown processor {pid}")
        self.crashed.add(pid)
        self.fairness.forget_node(pid)
        self._refresh_fd()
        logger.info("processor %s crashed at step %s", pid, self.step_no)
        return self._emit(Event(self.step_no, pid, 'crash'))

    def join(self, pid):
        self.add_processor(pid)
        logger.info("processor %s joined at step %s", pid, self.step_no)
        return self._emit(Event(self.step_no, pid, 'join'))

    def set_fd_mode(self, mode):
        self.fd_mode = mode
        self._refresh_fd()

    def _refresh_fd(self):
        live = frozenset(self.live) if self.fd_mode == ADMISSIBLE else None
        for pid in self.live:
            self.nodes[pid].set_fd_override(live)

    def send(self, src, dst, payload=(), kind=PacketKind.TOKEN, label=None, session=0, bit=0):
        """Wrap a payload in a packet and insert it into Channel(src, dst)"""
        key = (src, dst)
        if key not in self.channels:
            raise UnknownEndpointError(f"no channel from {src} to {dst}")
        if label is None:
            label = (src,) if kind in (PacketKind.TOKEN, PacketKind.CLEAN) else (dst, src)
        packet = Packet(next(self._uids), src, dst, kind, label, session, bit, tuple(payload))
        channel = self.channels[key]
        dropped = channel.send(packet)
        if channel.packets:
            self.fairness.channel_busy(key, self.step_no)
        self._sends.append((src, dst, packet.uid, dropped.uid if dropped else None))
        return packet

    def post(self, src, outgoing):
        """Queue upper-layer messages into the data-link outboxes of src"""
        for item in outgoing:
            endpoint = self.endpoints.get((src, item.dst))
            if endpoint is None:
                logger.debug("processor %s addressed unknown processor %s", src, item.dst)
                continue
            endpoint.outbox.put(item.key, item.message)

    def token_exchange_tick(self, pi, pj):
        endpoint = self.endpoints[(pi, pj)]
        out = endpoint.tick()
        if out is None:
            return None
        kind, bit, payload = out
        kind = PacketKind.CLEAN if kind == 'clean' else PacketKind.TOKEN
        return self.send(pi, pj, payload, kind=kind, session=endpoint.session, bit=bit)

    def inject_transient_fault(self, spec):
        """
        Overwrite processor variables and preload channels with stale packets

        Args:
            spec (dict): {'nodes': {pid: {...}}, 'randomize': [pids] | True,
                          'channels': [{'src', 'dst', 'count'}], 'fill_channels': bool}
        """
        spec = spec or {}
        loads = {}
        for entry in spec.get('channels', []):
            key = (entry['src'], entry['dst'])
            if key not in self.channels:
                raise FaultSpecError(f"no channel from {key[0]} to {key[1]}")
            loads[key] = loads.get(key, 0) + int(entry.get('count', 1))
        if spec.get('fill_channels'):
            for key in self.channels:
                loads[key] = self.cap - len(self.channels[key])
        for key, count in loads.items():
            if len(self.channels[key]) + count > self.cap:
                raise FaultSpecError(
                    f"channel {key[0]}->{key[1]} cannot hold {count} more packets (cap {self.cap})")
        for pid in spec.get('nodes', {}):
            if pid not in self.nodes:
                raise FaultSpecError(f"fault names unknown processor {pid}")

        universe = sorted(self.nodes)
        randomize = spec.get('randomize')
        targets = universe if randomize is True else list(randomize or [])
        for pid in targets:
            self.nodes[pid].corrupt(None, self.rng, universe)
        for pid, values in spec.get('nodes', {}).items():
            self.nodes[pid].corrupt(values, self.rng, universe)

        injected = []
        for key in sorted(loads):
            packets = [self._stale_packet(key) for _ in range(loads[key])]
            self.channels[key].preload(packets)
            if self.channels[key].packets:
                self.fairness.channel_busy(key, self.step_no)
            injected.extend(p.uid for p in packets)
        return self._emit(Event(self.step_no, '*', 'inject', stable_digest(spec), {'injected': injected}))

    def _next_session(self):
        self.last_session += 1
        return self.last_session

    def _stale_packet(self, key):
        """A packet with arbitrary fields, its session possibly the live one of the link it sits on"""
        src, dst = key
        kind = self.rng.choice(list(PacketKind))
        label = self.rng.choice([(src,), (dst, src), (src, dst)])
        uid = next(self._uids)
        owner = key if kind in (PacketKind.TOKEN, PacketKind.CLEAN) else (dst, src)
        sessions = [-uid, self.endpoints[owner].session]
        if self.last_session:
            sessions.append(self.rng.randint(1, self.last_session))
        session = self.rng.choice([s for s in sessions if s is not None])
        return Packet(uid, src, dst, kind, label, session,
                      self.rng.randrange(2), (('stale', uid),), origin='injected')

    def step(self):
        if self.step_no >= self.schedule.step_budget:
            raise SimulationHalted(f"step budget {self.schedule.step_budget} exhausted")
        self.step_no += 1
        self._sends = []

        choice, target, forced = self._choose()
        if choice == 'deliver':
            event = self._deliver(target, forced)
        else:
            event = self._activate(target, forced)

        load = max((len(c) for c in self.channels.values()), default=0)
        if load > self.cap:
            raise AssertionError(f"channel occupancy {load} exceeds cap {self.cap}")
        event.data['sends'] = self._sends
        event.data['load'] = load
        if event.digest == '-':
            event.digest = stable_digest([event.kind, self._sends, event.data.get('uid'),
                                          [r[0] for r in event.data.get('records', ())]])
        return self._emit(event)

    def annotate(self, pid, kind, data=None):
        """Record a scripted action in the trace without taking a step"""
        data = dict(data or {})
        return self._emit(Event(self.step_no, pid, kind, stable_digest([kind, data]), data))

    def _emit(self, event):
        for listener in self.listeners:
            listener(event)
        return event

    def _busy_channels(self):
        return [key for key in sorted(self.channels) if self.channels[key].packets]

    def _choose(self):
        busy = self._busy_channels()
        overdue = self.fairness.overdue(self.step_no, busy, self.live)
        if overdue:
            return overdue[0], overdue[1], True
        if busy and self.rng.random() >= self.schedule.timer_probability:
            return 'deliver', self.rng.choice(busy), False
        return 'timer', self.rng.choice(sorted(self.nodes)), False

    def _activate(self, pid, forced):
        if pid in self.crashed:
            return Event(self.step_no, pid, 'noop')
        self.fairness.node_activated(pid, self.step_no)
        node = self.nodes[pid]
        self.post(pid, node.on_timer(self.step_no))
        for peer in sorted(self.nodes):
            if peer != pid:
                self.token_exchange_tick(pid, peer)
        return Event(self.step_no, pid, 'timer', data={'forced': forced, 'records': node.drain_records()})

    def _deliver(self, key, forced):
        src, dst = key
        channel = self.channels[key]
        packet, lost, duplicated = channel.take(forced)
        self.fairness.channel_served(key, self.step_no, bool(channel.packets))
        data = {'channel': key, 'uid': packet.uid, 'origin': packet.origin,
                'forced': forced, 'duplicated': duplicated}
        if lost:
            return Event(self.step_no, dst, 'lost', data=data)
        if dst in self.crashed:
            return Event(self.step_no, dst, 'discard', data=data)

        endpoint = self.endpoints[(dst, src)]
        node = self.nodes[dst]
        delivered = ()
        if packet.kind in (PacketKind.TOKEN, PacketKind.CLEAN):
            expected = (src,)
        else:
            expected = (dst, src)
        if packet.label != expected:
            data['ignored'] = 'label'
            return Event(self.step_no, dst, 'receive', data=data)

        if packet.kind is PacketKind.CLEAN:
            endpoint.on_clean(packet.session)
            self.send(dst, src, kind=PacketKind.CLEAN_ACK, session=packet.session)
        elif packet.kind is PacketKind.CLEAN_ACK:
            endpoint.on_clean_ack(packet.session)
        elif packet.kind is PacketKind.TOKEN:
            acknowledge, delivered, beat = endpoint.on_token(packet.session, packet.bit, packet.payload)
            if acknowledge:
                self.send(dst, src, kind=PacketKind.ACK, session=packet.session, bit=packet.bit)
                if endpoint.state is LinkState.WAITING and dst > src:
                    endpoint.start_cleaning(self._next_session())
            for message in delivered:
                self.post(dst, node.on_message(src, message, self.step_no))
            if beat:
                node.on_heartbeat(src)
        else:
            if endpoint.on_ack(packet.session, packet.bit):
                node.on_heartbeat(src)

        data['delivered'] = len(delivered)
        data['records'] = node.drain_records()
        return Event(self.step_no, dst, 'receive', data=data)

    def run(self, steps):
        events = []
        for _ in range(steps):
            events.append(self.step())
        return events
