import random

import pytest

from netsim.channel import Adversary, Channel, DropPolicy, Packet, PacketKind


def packet(uid):
    return Packet(uid, 1, 2, PacketKind.TOKEN, (1,), 1)


def channel(cap=1, **adversary):
    return Channel(1, 2, cap, Adversary(**adversary), random.Random(0))


def test_send_into_free_slot():
    ch = channel()
    assert ch.send(packet(1)) is None
    assert ch.packets == [packet(1)]


def test_full_channel_drops_new():
    ch = channel(policy=DropPolicy.DROP_NEW)
    ch.send(packet(1))
    dropped = ch.send(packet(2))
    assert dropped == packet(2)
    assert ch.packets == [packet(1)]


def test_full_channel_drops_old():
    ch = channel(policy=DropPolicy.DROP_OLD)
    ch.send(packet(1))
    dropped = ch.send(packet(2))
    assert dropped == packet(1)
    assert ch.packets == [packet(2)]
    assert len(ch) == 1


def test_forced_take_serves_oldest():
    ch = channel(cap=3, reorder_window=3, loss=1.0)
    for uid in (1, 2, 3):
        ch.send(packet(uid))
    taken, lost, duplicated = ch.take(forced=True)
    assert taken == packet(1)
    assert not lost and not duplicated


def test_lossy_take():
    ch = channel(loss=1.0)
    ch.send(packet(1))
    taken, lost, _ = ch.take()
    assert taken == packet(1) and lost
    assert ch.take() == (None, False, False)


def test_duplicating_take_keeps_packet():
    ch = channel(duplication=1.0)
    ch.send(packet(1))
    taken, _, duplicated = ch.take()
    assert duplicated
    assert ch.packets == [taken]


def test_preload_respects_cap():
    ch = channel(cap=2)
    ch.preload([packet(1), packet(2)])
    with pytest.raises(ValueError):
        ch.preload([packet(3)])
