"""
Practically infinite counters on top of epoch labels

The counter store mirrors the label store with counter pairs instead of
label pairs. Increments are two-phase sessions: read the maximal counter
from a majority of the configuration, then write the incremented counter to
a majority. A reconfiguration anywhere along the way aborts the session.
"""
import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from models.counter import EMPTY_COUNTER_PAIR, CounterPair, CounterTriple, counter_leq, counter_precedes
from models.label import label_precedes
from models.types import is_set
from netsim.datalink import Outgoing
from protocols.labeling import Labeling, PairStore
from utils.helpers import majority

logger = logging.getLogger(__name__)

OK = 'ok'
ABORT = 'abort'
NO_MAX = 'no-max'

FIND_MAX_ROUNDS = 3


class CounterStore(PairStore):
    EMPTY = EMPTY_COUNTER_PAIR
    kind = 'counter'

    def __init__(self, me, config, cap, events=None, bits=64):
        self.bits = bits
        super().__init__(me, config, cap, events)

    def _precedes(self, a, b):
        return counter_precedes(a.mct, b.mct)

    def _sort_key(self, pair):
        return (pair.mct.lbl.sort_key(), pair.mct.seqn, pair.mct.wid)

    def _adopted(self, pair):
        return CounterPair(pair.mct, None)

    def _fresh(self, label):
        return CounterPair(CounterTriple(label, 0, self.me), None)

    def _prefer(self, kept, incoming):
        # per label the canceled copy wins, otherwise the greater counter
        if kept.legit != incoming.legit:
            return incoming if kept.legit else kept
        return incoming if counter_precedes(kept.mct, incoming.mct) else kept

    def _random_pair(self, primary, canceling, rng):
        mct = CounterTriple(primary, rng.randrange(0, 2 ** self.bits + 1), primary.creator)
        cct = CounterTriple(canceling, rng.randrange(0, 2 ** self.bits), canceling.creator) if canceling else None
        return CounterPair(mct, cct)

    def cancel_exhausted(self):
        for j, pair in self.max.items():
            if pair.legit and pair.mct.exhausted(self.bits):
                self.max[j] = CounterPair(pair.mct, pair.mct)
                self.events.append(('counter-exhausted', {'owner': j, 'counter': pair.mct}))

    def blocked(self, pair):
        """A legit counter whose label some known canceled counter dominates"""
        return any(not other.legit and label_precedes(pair.label, other.label)
                   for other in self.all_pairs() if not other.empty)

    def receipt_action(self, sent_max=None, last_sent=None, k=None):
        if k is not None and k in self.max:
            self.max[k] = sent_max if sent_max is not None else self.EMPTY
        self.cancel_exhausted()
        super().receipt_action(None, last_sent, None)

    def _adopt(self):
        legit = [pair for pair in self.max.values() if pair.legit and not self.blocked(pair)]
        if legit:
            self.max[self.me] = self._adopted(self._best(legit))
            return
        higher = [pair for pair in self.all_pairs()
                  if not pair.empty and not pair.legit and pair.label.creator > self.me]
        if higher:
            # only the creator can outgrow its canceled label; pass the news on
            self.max[self.me] = max(higher, key=self._sort_key)
            return
        self._use_own_label()

    def get_max_seq(self):
        """Greatest (seqn, wid) among legit counters sharing max[me]'s label"""
        own = self.max[self.me]
        if not own.legit:
            return own
        queue = self.stored.get(own.label.creator)
        candidates = [p for p in self.max.values() if p.legit and p.label == own.label]
        if queue is not None:
            candidates.extend(p for p in queue if p.legit and p.label == own.label)
        best = max(candidates, key=lambda p: (p.mct.seqn, p.mct.wid))
        return CounterPair(best.mct, None)

    def find_max_counter(self):
        self.cancel_exhausted()
        self.receipt_action(None, None, None)
        self.max[self.me] = self.get_max_seq()
        return self.max[self.me]

    def acceptable(self, pair):
        return pair.legit and not pair.mct.exhausted(self.bits) and not self.blocked(pair)

    def merge_into(self, target, counter):
        """max[target] keeps the ≺_ct-greater of its counter and the written one"""
        old = self.max.get(target, self.EMPTY)
        if old.empty or not counter_leq(counter, old.mct):
            self.max[target] = self.clean(CounterPair(counter, None))
        if counter.lbl.creator == self.me:
            self._record(self.stored[self.me], CounterPair(counter, None))
        self.cancel_exhausted()


@dataclass(frozen=True)
class CounterMessage:
    sent_max: object
    last_sent: object


@dataclass(frozen=True)
class ReadRequest:
    sid: tuple


@dataclass(frozen=True)
class ReadReply:
    sid: tuple
    pair: object
    abort: bool = False


@dataclass(frozen=True)
class WriteRequest:
    sid: tuple
    counter: CounterTriple


@dataclass(frozen=True)
class WriteReply:
    sid: tuple
    ack: bool


@dataclass
class IncrementSession:
    sid: tuple
    tag: object
    start: int
    config: frozenset
    member: bool
    phase: str = 'read'
    replies: dict = field(default_factory=dict)
    acks: set = field(default_factory=set)
    counter: Optional[CounterTriple] = None
    callback: object = None
    rounds: int = 0


class Counting(Labeling):
    """Counter maintenance at members plus increment sessions at every participant"""
    store_class = CounterStore
    message_class = CounterMessage
    key = 'counter'

    def __init__(self, me, cap, bits=64):
        super().__init__(me, cap)
        self.bits = bits
        self.pending = deque()
        self.session = None
        self._sids = itertools.count(1)
        self.now = 0

    def _new_store(self, config):
        return CounterStore(self.me, config, self.cap, self.events, bits=self.bits)

    def before_transmit(self):
        self.store.cancel_exhausted()

    def max_counter(self):
        if self.store is None:
            return None
        own = self.store.max.get(self.me)
        return own.mct if own is not None and own.legit else None

    def request_increment(self, tag=None, callback=None):
        self.pending.append((tag, callback))

    @property
    def busy(self):
        return self.session is not None or bool(self.pending)

    def tick(self, recsa, step=None):
        if step is not None:
            self.now = step
        outgoing = super().tick(recsa)
        if self.session is None and self.pending:
            self._start(recsa)
        if self.session is not None:
            outgoing.extend(self._advance(recsa))
        return outgoing

    def _start(self, recsa):
        tag, callback = self.pending.popleft()
        config = recsa.get_config()
        sid = (self.me, next(self._sids))
        if not recsa.is_participant() or not is_set(config):
            self._finish(IncrementSession(sid, tag, self.now, frozenset(), False, callback=callback),
                         ABORT, None)
            return
        self.session = IncrementSession(sid, tag, self.now, config, self.me in config, callback=callback)
        logger.debug("p%s starts increment %s over %s", self.me, sid, sorted(config))

    def _member_ready(self, recsa):
        store = self.store
        return store is not None and not store.conf_change(recsa.get_config())

    def _advance(self, recsa):
        session = self.session
        config = recsa.get_config()
        if config != session.config or not recsa.no_reco():
            self._finish(session, ABORT, None)
            return []
        if session.member and not self._member_ready(recsa):
            return []

        need = majority(len(session.config))
        if session.phase == 'read':
            if session.member and self.me not in session.replies:
                session.replies[self.me] = self.store.find_max_counter()
            if len(session.replies) >= need:
                self._complete_read(session)
                if self.session is None:
                    return []
        if session.phase == 'read':
            return [Outgoing(k, ('counter-read', self.me), ReadRequest(session.sid))
                    for k in sorted(session.config) if k != self.me and k not in session.replies]

        if session.member and self.me not in session.acks:
            self.store.merge_into(self.me, session.counter)
            session.acks.add(self.me)
        if len(session.acks) >= need:
            self._complete_write(session)
            return []
        return [Outgoing(k, ('counter-write', self.me), WriteRequest(session.sid, session.counter))
                for k in sorted(session.config) if k != self.me and k not in session.acks]

    def _complete_read(self, session):
        if session.member:
            store = self.store
            for j, pair in session.replies.items():
                if j != self.me and j in store.max:
                    store.max[j] = store.clean(pair)
            pair = store.max[self.me]
            for _ in range(FIND_MAX_ROUNDS):
                session.rounds += 1
                pair = store.find_max_counter()
                if store.acceptable(pair):
                    break
            if not store.acceptable(pair):
                return
            base = pair.mct
        else:
            base = self._dominating(session.replies.values())
            if base is None:
                self._finish(session, NO_MAX, None)
                return
        session.counter = CounterTriple(base.lbl, base.seqn + 1, self.me)
        session.phase = 'write'

    def _dominating(self, pairs):
        counters = [p.mct for p in pairs if p is not None and not p.empty]
        candidates = [p.mct for p in pairs
                      if p is not None and p.legit and not p.mct.exhausted(self.bits)]
        for candidate in candidates:
            if all(counter_leq(other, candidate) for other in counters):
                return candidate
        return None

    def _complete_write(self, session):
        if session.member:
            self.store.merge_into(self.me, session.counter)
            if self.store.acceptable(CounterPair(session.counter)):
                self.store.max[self.me] = CounterPair(session.counter)
        self._finish(session, OK, session.counter)

    def _finish(self, session, outcome, result):
        if self.session is session:
            self.session = None
        self.events.append(('increment', {
            'sid': session.sid,
            'caller': self.me,
            'tag': session.tag,
            'start': session.start,
            'end': self.now,
            'result': result,
            'outcome': outcome,
            'readers': tuple(sorted(session.replies)),
            'writers': tuple(sorted(session.acks)),
            'config': session.config,
        }))
        logger.debug("p%s increment %s finished %s -> %s", self.me, session.sid, outcome, result)
        if session.callback is not None:
            session.callback(result)

    def _serving(self, recsa):
        config = self._membership(recsa)
        return config is not None and recsa.no_reco() and self.store is not None \
            and not self.store.conf_change(config)

    def on_read(self, recsa, j, request, step=None):
        if step is not None:
            self.now = step
        if not self._serving(recsa):
            return [Outgoing(j, ('counter-reply', j), ReadReply(request.sid, None, abort=True))]
        pair = self.store.clean(self.store.find_max_counter())
        return [Outgoing(j, ('counter-reply', j), ReadReply(request.sid, pair))]

    def on_write(self, recsa, j, request, step=None):
        if step is not None:
            self.now = step
        if not self._serving(recsa):
            return [Outgoing(j, ('counter-ack', j), WriteReply(request.sid, False))]
        store = self.store
        store.merge_into(j if j in store.members else self.me, request.counter)
        return [Outgoing(j, ('counter-ack', j), WriteReply(request.sid, True))]

    def on_read_reply(self, recsa, j, reply, step=None):
        if step is not None:
            self.now = step
        session = self.session
        if session is None or reply.sid != session.sid or session.phase != 'read':
            return []
        if reply.abort:
            self._finish(session, ABORT, None)
            return []
        session.replies[j] = reply.pair
        return self._advance(recsa)

    def on_write_reply(self, recsa, j, reply, step=None):
        if step is not None:
            self.now = step
        session = self.session
        if session is None or reply.sid != session.sid or session.phase != 'write':
            return []
        if not reply.ack:
            self._finish(session, ABORT, None)
            return []
        session.acks.add(j)
        return self._advance(recsa)

    def snapshot(self):
        snapshot = super().snapshot()
        snapshot['counter_value'] = self.max_counter()
        snapshot['counter_busy'] = self.session is not None
        return snapshot
