from protocols.joining import JoinRequest, Joining, PassReply, StaticAdmission
from protocols.recsa import Recsa

MEMBERS = frozenset({1, 2, 3})


def joiner():
    """p4 sees a quiet configuration {1,2,3} but is not a participant yet"""
    recsa = Recsa(4)
    view = {'trusted': [1, 2, 3, 4], 'part': [1, 2, 3]}
    recsa.corrupt({'config': {k: sorted(MEMBERS) for k in MEMBERS},
                   'fd': {k: view for k in MEMBERS}}, None, None)
    recsa.loop([1, 2, 3, 4])
    return recsa


def test_joiner_sees_members_configuration():
    recsa = joiner()
    assert not recsa.is_participant()
    assert recsa.no_reco()
    assert recsa.get_config() == MEMBERS


def test_joiner_asks_every_trusted_peer():
    joining = Joining(4)
    outgoing = joining.tick(joiner())
    assert sorted(out.dst for out in outgoing) == [1, 2, 3]
    assert all(isinstance(out.message, JoinRequest) for out in outgoing)


def test_majority_of_passes_lets_joiner_participate():
    recsa = joiner()
    joining = Joining(4)
    joining.tick(recsa)
    joining.on_pass(recsa, 1, PassReply(True, None))
    joining.on_pass(recsa, 2, PassReply(True, None))

    assert joining.tick(recsa) == []
    assert recsa.cfg(4) == MEMBERS
    kind, data = joining.events[-1]
    assert kind == 'join'
    assert data['passes'] == (1, 2)
    assert data['no_reco'] and not data['tainted']


def test_single_pass_is_not_enough():
    recsa = joiner()
    joining = Joining(4)
    joining.tick(recsa)
    joining.on_pass(recsa, 1, PassReply(True, None))
    joining.on_pass(recsa, 2, PassReply(False, None))
    assert joining.tick(recsa)
    assert not recsa.is_participant()


def test_passes_reset_when_configuration_changes():
    recsa = joiner()
    joining = Joining(4)
    joining.tick(recsa)
    joining.on_pass(recsa, 1, PassReply(True, None))
    recsa.corrupt({'config': {k: [1, 2] for k in MEMBERS}}, None, None)
    joining.tick(recsa)
    assert joining.passes == {}
    assert joining.com_conf == frozenset({1, 2})


def test_member_grants_pass_outside_reconfiguration(converged):
    nodes = converged((1, 2, 3))
    joining = Joining(1)
    (reply,) = joining.on_join_request(nodes[1], 4)
    assert reply.dst == 4
    assert reply.message == PassReply(True, None)

    nodes[1].estab([1, 2])
    assert joining.on_join_request(nodes[1], 4) == []


def test_non_member_grants_nothing(converged):
    nodes = converged((1, 2, 3), config=[2, 3])
    assert Joining(1).on_join_request(nodes[1], 4) == []


def test_participant_stops_joining(converged):
    nodes = converged((1, 2))
    joining = Joining(1)
    assert joining.tick(nodes[1]) == []
    joining.on_pass(nodes[1], 2, PassReply(True, None))
    assert joining.passes == {}


def test_static_admission():
    admission = StaticAdmission()
    assert admission.pass_query()
    assert admission.export_state() is None
    assert not admission.tainted()
