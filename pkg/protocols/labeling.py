"""
Bounded epoch labeling over the current configuration

Members keep, per configuration member, the largest label pair they know
(max) and a most-recently-used queue of the label pairs created by that
member (stored). Exchanging max pairs lets every member converge to one
legit label that dominates everything in the system.
"""
import logging
from dataclasses import dataclass

from models.label import EMPTY_LABEL_PAIR, EpochLabel, LabelPair, label_leq, label_precedes
from models.types import is_set
from netsim.datalink import Outgoing
from utils.helpers import LabelDomainError

logger = logging.getLogger(__name__)


def queue_bounds(v, m):
    """(peer queue bound, own queue bound) for a configuration of v members and m labels in transit"""
    return v + m, v * (v * v + m) + v


def sting_domain(own_bound):
    """
    Antisting set size k and sting domain size d

    An own queue holds up to own_bound pairs, so a new label must cancel up to
    2·own_bound stings (ml and cl of each pair) and avoid the antistings of
    all of them.
    """
    k = 2 * own_bound
    return k, k * (k + 1) + 1


def next_label(me, own_pairs, k, d):
    labels = [x for pair in own_pairs for x in (pair.label, pair.canceling_label) if x is not None]
    antistings = {label.sting for label in labels}
    if len(antistings) > k:
        raise LabelDomainError(f"{len(antistings)} stored stings exceed antisting size {k}")
    candidate = 1
    while len(antistings) < k:
        if candidate not in antistings:
            antistings.add(candidate)
        candidate += 1

    excluded = set(antistings)
    for label in labels:
        excluded |= label.antistings
    sting = next((s for s in range(1, d + 1) if s not in excluded), None)
    if sting is None:
        raise LabelDomainError(f"no free sting in [1..{d}]")
    return EpochLabel(me, sting, frozenset(antistings))


class MruQueue:
    """Bounded queue; index 0 is the most recently used entry"""

    def __init__(self, bound):
        self.bound = bound
        self.items = []

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def add(self, pair):
        self.items.insert(0, pair)
        del self.items[self.bound:]

    def touch(self, index):
        self.items.insert(0, self.items.pop(index))

    def replace(self, index, pair):
        self.items.pop(index)
        self.items.insert(0, pair)

    def find(self, label, legit=None):
        for index, pair in enumerate(self.items):
            if pair.label == label and (legit is None or pair.legit == legit):
                return index
        return None

    def clear(self):
        self.items = []


class PairStore:
    """max[] and stored[] over label pairs; CounterStore reuses the same receipt logic"""
    EMPTY = EMPTY_LABEL_PAIR
    kind = 'label'

    def __init__(self, me, config, cap, events=None):
        self.me = me
        self.cap = cap
        self.events = events if events is not None else []
        self.created = 0
        self.max = {}
        self.stored = {}
        self.members = frozenset()
        self.rebuild(config)

    def rebuild(self, config):
        self.members = frozenset(config)
        v = len(self.members)
        self.peer_bound, self.own_bound = queue_bounds(v, self.cap * max(v - 1, 0))
        self.k, self.d = sting_domain(self.own_bound)
        self.max = {k: self.max.get(k, self.EMPTY) for k in sorted(self.members)}
        self.stored = {k: MruQueue(self.own_bound if k == self.me else self.peer_bound)
                       for k in sorted(self.members)}

    def conf_change(self, config):
        return frozenset(config) != self.members

    def empty_queues(self, reason):
        for queue in self.stored.values():
            queue.clear()
        self.events.append((f'{self.kind}-flush', {'reason': reason}))

    def clean(self, pair):
        if pair is None or pair.empty:
            return self.EMPTY
        if pair.label.creator not in self.members:
            return self.EMPTY
        if pair.canceling_label is not None and pair.canceling_label.creator not in self.members:
            return self.EMPTY
        return pair

    def clean_max(self):
        for k in self.max:
            self.max[k] = self.clean(self.max[k])

    def _queue_of(self, pair):
        return self.stored.get(pair.label.creator)

    def _precedes(self, a, b):
        return label_precedes(a.primary, b.primary)

    def _sort_key(self, pair):
        return pair.primary.sort_key()

    def _adopted(self, pair):
        return LabelPair(pair.ml, None)

    def _fresh(self, label):
        return LabelPair(label, None)

    def _prefer(self, kept, incoming):
        """Which of two records sharing a label survives"""
        if kept.legit and not incoming.legit:
            return incoming
        return kept

    def _stale_info(self):
        for owner, queue in self.stored.items():
            seen = set()
            for pair in queue:
                if pair.empty or pair.label.creator != owner or pair.label in seen:
                    return True
                if pair.canceling_label is not None and pair.canceling_label.creator not in self.members:
                    return True
                seen.add(pair.label)
        return False

    def _record(self, queue, pair):
        index = queue.find(pair.label)
        if index is None:
            queue.add(pair)
        else:
            queue.replace(index, self._prefer(queue.items[index], pair))

    def _cancel_not_geq(self, queue):
        items = queue.items
        for index, pair in enumerate(items):
            if not pair.legit:
                continue
            for other_index, other in enumerate(items):
                if other_index != index and not label_leq(other.label, pair.label):
                    items[index] = pair.cancelled_by(other.primary)
                    break

    def _drop_doubles(self, queue):
        kept = []
        position = {}
        for pair in queue.items:
            index = position.get(pair.label)
            if index is None:
                position[pair.label] = len(kept)
                kept.append(pair)
            else:
                kept[index] = self._prefer(kept[index], pair)
        queue.items = kept

    def receipt_action(self, sent_max=None, last_sent=None, k=None):
        me = self.me
        if k is not None and k in self.max:
            self.max[k] = sent_max if sent_max is not None else self.EMPTY
        own = self.max.get(me, self.EMPTY)
        if last_sent is not None and not last_sent.empty and not last_sent.legit \
                and not own.empty and own.label == last_sent.label:
            self.max[me] = last_sent

        if self._stale_info():
            self.empty_queues('stale')

        for pair in self.max.values():
            if pair.empty:
                continue
            queue = self._queue_of(pair)
            if queue is not None:
                self._record(queue, pair)

        for queue in self.stored.values():
            self._cancel_not_geq(queue)

        for pair in list(self.max.values()):
            if pair.empty or pair.legit:
                continue
            queue = self._queue_of(pair)
            if queue is None:
                continue
            index = queue.find(pair.label, legit=True)
            while index is not None:
                queue.replace(index, pair)
                index = queue.find(pair.label, legit=True)

        for queue in self.stored.values():
            self._drop_doubles(queue)

        for j, pair in self.max.items():
            if not pair.legit:
                continue
            queue = self._queue_of(pair)
            index = queue.find(pair.label, legit=False) if queue is not None else None
            if index is not None:
                queue.touch(index)
                self.max[j] = queue.items[0]

        self._adopt()

    def _best(self, pairs):
        candidates = [p for p in pairs if not any(self._precedes(p, o) for o in pairs)]
        return max(candidates or pairs, key=self._sort_key)

    def _adopt(self):
        legit = [pair for pair in self.max.values() if pair.legit]
        if legit:
            self.max[self.me] = self._adopted(self._best(legit))
        else:
            self._use_own_label()

    def _use_own_label(self):
        queue = self.stored[self.me]
        for index, pair in enumerate(queue.items):
            if pair.legit:
                queue.touch(index)
                self.max[self.me] = pair
                return
        label = next_label(self.me, queue.items, self.k, self.d)
        pair = self._fresh(label)
        queue.add(pair)
        self.max[self.me] = pair
        self.created += 1
        self.events.append(('next-label', {'store': self.kind, 'label': label}))
        logger.debug("p%s created %s label %s", self.me, self.kind, label)

    def all_pairs(self):
        pairs = [p for p in self.max.values() if not p.empty]
        for queue in self.stored.values():
            pairs.extend(queue.items)
        return pairs

    def foreign_creators(self):
        creators = set()
        for pair in self.all_pairs():
            for label in (pair.label, pair.canceling_label):
                if label is not None and label.creator not in self.members:
                    creators.add(label.creator)
        return frozenset(creators)

    def corrupt(self, rng, universe, own_only=False):
        """Fill max[] and the queues with arbitrary, possibly misfiled or foreign, pairs"""
        def label():
            creator = rng.choice(universe + [max(universe) + 1])
            return EpochLabel(creator, rng.randrange(1, 50),
                              frozenset(rng.randrange(1, 50) for _ in range(rng.randrange(1, 6))))

        def pair():
            return self._random_pair(label(), label() if rng.random() < 0.3 else None, rng)

        for k in self.max:
            self.max[k] = pair()
        for queue in self.stored.values():
            for _ in range(rng.randrange(0, 3)):
                queue.add(pair())

    def _random_pair(self, primary, canceling, rng):
        return LabelPair(primary, canceling)


class LabelStore(PairStore):
    pass


@dataclass(frozen=True)
class LabelMessage:
    sent_max: object
    last_sent: object


class Labeling:
    """Runs the labeling loop at configuration members"""
    store_class = LabelStore
    message_class = LabelMessage
    key = 'label'

    def __init__(self, me, cap):
        self.me = me
        self.cap = cap
        self.store = None
        self.events = []
        self.received = False

    def _membership(self, recsa):
        config = recsa.get_config()
        if is_set(config) and self.me in config:
            return config
        return None

    def _new_store(self, config):
        return self.store_class(self.me, config, self.cap, self.events)

    def _ensure_store(self):
        if self.store is None:
            self.store = self._new_store(())
        return self.store

    def tick(self, recsa):
        config = self._membership(recsa)
        if config is None:
            return []
        store = self._ensure_store()
        no_reco = recsa.no_reco()
        if no_reco and store.conf_change(config):
            last = store.max.get(self.me, store.EMPTY)
            store.rebuild(config)
            store.empty_queues('reconfiguration')
            store.clean_max()
            store.receipt_action(store.EMPTY, store.clean(last), self.me)
            self.events.append((f'{store.kind}-rebuild', {'members': store.members}))
        if not no_reco or store.conf_change(config):
            return []
        self.before_transmit()
        mine = store.clean(store.max[self.me])
        return [Outgoing(k, self.key, self.message_class(mine, store.clean(store.max[k])))
                for k in sorted(store.members) if k != self.me]

    def before_transmit(self):
        pass

    def on_receive(self, recsa, j, message):
        config = self._membership(recsa)
        store = self.store
        if config is None or store is None or store.conf_change(config) \
                or j not in store.members or not recsa.no_reco():
            return
        store.clean_max()
        store.receipt_action(store.clean(message.sent_max), store.clean(message.last_sent), j)
        if not self.received:
            self.received = True
            self.events.append((f'{store.kind}-first-receipt', {}))

    def corrupt(self, values, rng, universe):
        self.store = self.store or self._new_store(universe)
        self.store.corrupt(rng, list(universe))
        self.received = False

    def max_label(self):
        if self.store is None:
            return None
        own = self.store.max.get(self.me)
        return own.label if own is not None and own.legit else None

    def snapshot(self):
        store = self.store
        return {
            f'{self.key}_max': self.max_label(),
            f'{self.key}_foreign': store.foreign_creators() if store else frozenset(),
            f'{self.key}_created': store.created if store else 0,
            f'{self.key}_received': self.received,
        }
