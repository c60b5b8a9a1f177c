"""
Token-passing data link with link cleaning

Each ordered pair (me, peer) has one LinkEndpoint at me. The endpoint is the
alternating-bit sender for the me -> peer direction and the receiver for the
peer -> me direction. The direction whose sender has the greater identifier
carries the canonical token; only that token produces heartbeats.

Sessions are increasing positive nonces drawn by the simulation at every
cleaning. A receiver adopts the session of the latest clean request and
accepts tokens of that session only after more than cap clean requests of
it, so stale packets queued ahead of the cleaning stream are never delivered
even when they carry the live session.
"""
import logging
from collections import Counter
from enum import Enum

logger = logging.getLogger(__name__)


class LinkState(Enum):
    WAITING = 'waiting'    # higher endpoint waits for the lower one to finish cleaning
    CLEANING = 'cleaning'
    UP = 'up'


class Outbox:
    """Latest message per key, drained in insertion order"""

    def __init__(self):
        self._items = {}

    def put(self, key, message):
        self._items.pop(key, None)
        self._items[key] = message

    def drain(self):
        items = tuple(self._items.values())
        self._items.clear()
        return items

    def __len__(self):
        return len(self._items)


class LinkEndpoint:

    def __init__(self, me, peer, cap):
        self.me = me
        self.peer = peer
        self.cap = cap
        self.outbox = Outbox()

        self.state = LinkState.WAITING
        self.session = None
        self.bit = 0
        self.acks = 0
        self.clean_acks = 0
        self.in_flight = ()

        self.rx_session = None
        self.rx_bit = None
        self.rx_cleans = Counter()

    @property
    def canonical(self):
        """True when this endpoint sends the canonical token"""
        return self.me > self.peer

    @property
    def up(self):
        return self.state is LinkState.UP

    def start_cleaning(self, session):
        self.state = LinkState.CLEANING
        self.session = session
        self.clean_acks = 0
        self.bit = 0
        self.acks = 0
        self.in_flight = ()
        logger.debug("link %s->%s cleaning with session %s", self.me, self.peer, session)

    def tick(self):
        """The packet to retransmit on this activation as (kind, bit, payload), or None"""
        if self.state is LinkState.CLEANING:
            return 'clean', 0, ()
        if self.state is LinkState.UP:
            return 'token', self.bit, self.in_flight
        return None

    def on_clean(self, session):
        """A clean request of another session resets the receiving side; always acknowledged"""
        self.rx_cleans[session] += 1
        if session != self.rx_session:
            self.rx_session = session
            self.rx_bit = None

    @property
    def rx_cleaned(self):
        return self.rx_session is not None and self.rx_cleans[self.rx_session] > self.cap

    def on_clean_ack(self, session):
        """Returns True when this acknowledgment completes cleaning"""
        if self.state is not LinkState.CLEANING or session != self.session:
            return False
        self.clean_acks += 1
        if self.clean_acks > 2 * self.cap:
            self.state = LinkState.UP
            self.in_flight = self.outbox.drain()
            logger.debug("link %s->%s up after %s clean acks", self.me, self.peer, self.clean_acks)
            return True
        return False

    def on_token(self, session, bit, payload):
        """
        Receive a token from the peer

        Returns:
            tuple: (acknowledge, delivered messages, heartbeat)
        """
        if not self.rx_cleaned or session != self.rx_session:
            return False, (), False
        if bit == self.rx_bit:
            return True, (), False
        self.rx_bit = bit
        return True, payload, not self.canonical

    def on_ack(self, session, bit):
        """Returns True when the acknowledgment completes a canonical token round"""
        if self.state is not LinkState.UP or session != self.session or bit != self.bit:
            return False
        self.acks += 1
        if self.acks <= self.cap:
            return False
        self.bit ^= 1
        self.acks = 0
        self.in_flight = self.outbox.drain()
        return self.canonical

    def __repr__(self):
        return f'<LinkEndpoint {self.me}->{self.peer} {self.state.value}>'


class Outgoing:
    """A message handed to the data link for delivery to dst; key selects its outbox slot"""
    __slots__ = ('dst', 'key', 'message')

    def __init__(self, dst, key, message):
        self.dst = dst
        self.key = key
        self.message = message

    def __repr__(self):
        return f'<Outgoing {self.key}->{self.dst}>'
