from models.counter import CounterPair, CounterTriple, counter_cmp, counter_leq, counter_precedes
from models.label import EMPTY_LABEL_PAIR, EpochLabel, LabelPair, Order, label_cmp, label_precedes
from models.types import BOTTOM, DEFAULT_PROPOSAL, HASH, Proposal, as_config, is_set, value_key
from models.view import INITIAL_VIEW_STATE, Status, View


def label(creator, sting, *antistings):
    return EpochLabel(creator, sting, frozenset(antistings))


def test_as_config_literals():
    assert as_config(None) is BOTTOM
    assert as_config('#') is HASH
    assert as_config([2, 1]) == frozenset({1, 2})
    assert as_config([]) == frozenset()
    assert is_set(as_config([1])) and not is_set(BOTTOM)


def test_value_key_orders_bottom_sets_hash():
    ordered = sorted([HASH, frozenset({2}), BOTTOM, frozenset({1, 2})], key=value_key)
    assert ordered == [BOTTOM, frozenset({1, 2}), frozenset({2}), HASH]


def test_default_proposal():
    assert DEFAULT_PROPOSAL.is_default
    assert not Proposal(1, frozenset({1})).is_default
    assert str(Proposal(2, frozenset({3, 1}))) == '<2,{1,3}>'


def test_lower_creator_precedes():
    assert label_precedes(label(1, 40), label(2, 1))
    assert not label_precedes(label(2, 1), label(1, 40))


def test_same_creator_cancels_by_antisting():
    old = label(1, 5, 1, 2)
    new = label(1, 6, 5)
    assert label_cmp(old, new) is Order.LESS
    assert label_cmp(new, old) is Order.GREATER


def test_same_creator_incomparable():
    a = label(1, 5, 6)
    b = label(1, 6, 5)
    assert label_cmp(a, b) is Order.INCOMPARABLE
    assert label_cmp(label(1, 3), label(1, 4)) is Order.INCOMPARABLE


def test_label_pair_states():
    legit = LabelPair(label(1, 2))
    assert legit.legit and not legit.empty
    cancelled = legit.cancelled_by(label(1, 3, 2))
    assert not cancelled.legit and cancelled.canceling_label == label(1, 3, 2)
    assert EMPTY_LABEL_PAIR.empty


def test_counter_order():
    lbl = label(2, 1)
    low = CounterTriple(lbl, 3, 1)
    high = CounterTriple(lbl, 3, 2)
    assert counter_precedes(low, high)
    assert counter_leq(low, low)
    assert counter_cmp(CounterTriple(label(1, 9), 100, 3), low) is Order.LESS


def test_counter_exhaustion():
    counter = CounterTriple(label(1, 1), 2 ** 4, 1)
    assert counter.exhausted(4)
    assert not counter.exhausted(5)
    assert CounterPair(counter).label == label(1, 1)


def test_view_state_evolve_and_order():
    assert INITIAL_VIEW_STATE.synch_key()[0] == -1
    view = View(CounterTriple(label(1, 1), 1, 1), frozenset({1, 2}))
    installed = INITIAL_VIEW_STATE.evolve(view=view, rnd=2)
    assert installed.status is Status.MULTICAST
    assert installed.synch_key() > INITIAL_VIEW_STATE.synch_key()
    assert installed.evolve(rnd=3).synch_key() > installed.synch_key()
    assert INITIAL_VIEW_STATE.rnd == 0
