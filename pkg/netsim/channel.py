"""
Bounded, lossy, reordering and duplicating channels
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

logger = logging.getLogger(__name__)


class PacketKind(Enum):
    TOKEN = 'token'
    ACK = 'ack'
    CLEAN = 'clean'
    CLEAN_ACK = 'clean-ack'


class DropPolicy(Enum):
    DROP_NEW = 'drop-new'
    DROP_OLD = 'drop-old'
    RANDOM = 'random'


@dataclass(frozen=True)
class Packet:
    """
    A packet on the wire.

    label is (sender,) for tokens and clean requests and (sender, receiver)
    for acknowledgments travelling back on the anti-parallel channel.
    """
    uid: int
    src: int
    dst: int
    kind: PacketKind
    label: Tuple[int, ...]
    session: int
    bit: int = 0
    payload: Tuple = ()
    origin: str = 'sent'


@dataclass(frozen=True)
class Adversary:
    policy: DropPolicy = DropPolicy.DROP_OLD
    reorder_window: int = 1
    loss: float = 0.0
    duplication: float = 0.0


class Channel:
    """Channel(src, dst) holding at most cap packets"""

    def __init__(self, src, dst, cap, adversary, rng):
        self.src = src
        self.dst = dst
        self.cap = cap
        self.adversary = adversary
        self.rng = rng
        self.packets = []

    def __len__(self):
        return len(self.packets)

    def send(self, packet):
        """
        Insert a packet, dropping one when the channel is full

        Returns:
            Packet or None: the dropped packet, if any
        """
        if len(self.packets) < self.cap:
            self.packets.append(packet)
            return None

        policy = self.adversary.policy
        if policy is DropPolicy.RANDOM:
            policy = self.rng.choice([DropPolicy.DROP_NEW, DropPolicy.DROP_OLD])
        if policy is DropPolicy.DROP_NEW:
            return packet
        dropped = self.packets.pop(0)
        self.packets.append(packet)
        return dropped

    def take(self, forced=False):
        """
        Remove one packet for delivery

        A forced take serves the oldest packet and is never lost or kept.

        Returns:
            tuple: (packet, lost, duplicated)
        """
        if not self.packets:
            return None, False, False
        if forced:
            return self.packets.pop(0), False, False

        window = min(self.adversary.reorder_window, len(self.packets))
        index = self.rng.randrange(window) if window > 1 else 0
        packet = self.packets[index]
        if self.adversary.duplication and self.rng.random() < self.adversary.duplication:
            return packet, False, True
        self.packets.pop(index)
        lost = bool(self.adversary.loss) and self.rng.random() < self.adversary.loss
        return packet, lost, False

    def preload(self, packets):
        if len(self.packets) + len(packets) > self.cap:
            raise ValueError(f"channel {self.src}->{self.dst} holds at most {self.cap} packets")
        self.packets.extend(packets)

    def __repr__(self):
        return f'<Channel {self.src}->{self.dst} {len(self.packets)}/{self.cap}>'
