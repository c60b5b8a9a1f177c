import pytest

from harness.checkers import BUDGET, CHECKERS, Verdict, check, check_all, is_known
from harness.trace import Trace, TraceEntry
from models.counter import CounterTriple
from models.label import EpochLabel
from models.types import DEFAULT_PROPOSAL, Proposal
from models.view import NO_VIEW, View
from netsim.simulation import Event

S = frozenset({1, 2, 3})
LABEL = EpochLabel(3, 1, frozenset())


def snap(config=S, stale=(), participant=True, no_reco=True, **extra):
    return {'participant': participant, 'config': frozenset(config), 'stale': frozenset(stale),
            'trusted': S, 'no_reco': no_reco, 'prp': DEFAULT_PROPOSAL, 'degree': 0, **extra}


@pytest.fixture
def trace(make_scenario):
    scenario = make_scenario("""
        processors: [1, 2, 3, 4]
        cap: 2
    """)
    trace = Trace(scenario)
    trace.initial = {pid: snap() for pid in S}
    trace.initial_live = S
    return trace


def add(trace, step, pid, kind='timer', records=(), updates=None, live=S, **data):
    event = Event(step, pid, kind, data={'records': tuple(records), **data})
    trace.entries.append(TraceEntry(event, frozenset(live), updates or {}))
    return event


def increment(sid, start, end, seqn, outcome='ok', readers=(1, 2), writers=(1, 2)):
    result = CounterTriple(LABEL, seqn, 1) if seqn is not None else None
    return ('increment', {'sid': (1, sid), 'caller': 1, 'tag': None, 'start': start, 'end': end,
                          'result': result, 'outcome': outcome, 'readers': readers, 'writers': writers,
                          'config': S})


def test_registry():
    assert 'convergence' in CHECKERS
    assert is_known('determinism') and is_known('golden')
    assert not is_known('telepathy')
    with pytest.raises(KeyError):
        check(None, 'telepathy')


def test_failed_verdict_needs_witness():
    with pytest.raises(ValueError):
        Verdict('convergence', False)
    assert Verdict('convergence', True).to_dict()['witness'] is None


def test_convergence_from_first_agreeing_step(trace):
    add(trace, 1, 1, updates={1: snap({1, 2})})
    add(trace, 2, 2)
    add(trace, 3, 1, updates={1: snap()})
    add(trace, 4, 3)
    verdict = check(trace, 'convergence')
    assert verdict.passed
    assert verdict.measures['convergence_step'] == 3


def test_convergence_budget_witness(trace):
    add(trace, 1, 1, updates={1: snap(stale=('type2',))})
    add(trace, 2, 2)
    verdict = check(trace, 'convergence')
    assert not verdict.passed
    assert verdict.witness['reason'] == BUDGET
    assert verdict.witness['step'] == 2


def test_conflict_free_trace_passes(trace):
    for step in range(1, 6):
        add(trace, step, 1 + step % 3)
    assert check(trace, 'conflict-freedom').passed


def test_closure_reports_stale_processor(trace):
    add(trace, 1, 1)
    add(trace, 2, 2, updates={2: snap(stale=('type4',))})
    verdict = check(trace, 'closure')
    assert not verdict.passed
    assert verdict.witness['step'] == 2
    assert verdict.witness['stale'] == {2: ['type4']}
    assert any(line.startswith('2\t2\ttimer') for line in verdict.witness['slice'])


def test_sequential_equal_counters_break_monotonicity(trace):
    add(trace, 5, 1, records=[increment(1, 1, 5, seqn=4)])
    add(trace, 10, 1, records=[increment(2, 8, 10, seqn=4)])
    verdict = check(trace, 'counter-monotonicity')
    assert not verdict.passed
    assert verdict.witness['reason'] == 'non-monotonic counters'
    assert [call['sid'] for call in verdict.witness['calls']] == [(1, 1), (1, 2)]


def test_growing_counters_are_monotonic(trace):
    add(trace, 5, 1, records=[increment(1, 1, 5, seqn=4)])
    add(trace, 9, 1, records=[increment(2, 7, 9, seqn=None, outcome='abort')])
    add(trace, 10, 1, records=[increment(3, 8, 10, seqn=5)])
    verdict = check(trace, 'counter-monotonicity')
    assert verdict.passed
    assert verdict.measures == {'increments': 2, 'aborted': 1, 'configurations': 1}


def test_concurrent_duplicates_are_not_distinct(trace):
    add(trace, 5, 1, records=[increment(1, 1, 5, seqn=4)])
    add(trace, 6, 1, records=[increment(2, 3, 6, seqn=4)])
    assert check(trace, 'counter-monotonicity').passed
    assert not check(trace, 'counter-distinct').passed


def test_aborted_increment_must_not_return_a_value(trace):
    add(trace, 5, 1, records=[increment(1, 1, 5, seqn=4, outcome='abort')])
    assert not check(trace, 'counter-monotonicity').passed


def test_minority_quorum_rejected(trace):
    add(trace, 5, 1, records=[increment(1, 1, 5, seqn=4, readers=(1,))])
    verdict = check(trace, 'majority-intersection')
    assert not verdict.passed
    assert verdict.witness['quorum'] == [1]


def test_spurious_bound_for_four_processors(trace):
    for step in range(1, 37):
        add(trace, step, 1, records=[('trigger', {'cause': 'prediction', 'value': S, 'effective': True})])
    verdict = check(trace, 'spurious-bound')
    assert verdict.passed and verdict.measures == {'triggers': 36, 'bound': 36}

    add(trace, 37, 1, records=[('trigger', {'cause': 'prediction', 'value': S, 'effective': True})])
    verdict = check(trace, 'spurious-bound')
    assert not verdict.passed
    assert verdict.witness['step'] == 37


def test_repeated_trigger_without_installation(trace):
    trigger = ('trigger', {'cause': 'collapse', 'value': S, 'effective': False})
    add(trace, 1, 2, records=[trigger])
    add(trace, 2, 2, records=[('config-install', {'value': S})])
    add(trace, 3, 2, records=[trigger])
    assert check(trace, 'trigger-once').passed
    add(trace, 4, 2, records=[trigger])
    verdict = check(trace, 'trigger-once')
    assert not verdict.passed and verdict.witness['pid'] == 2


def test_occupancy_over_cap(trace):
    add(trace, 1, 1, load=2)
    assert check(trace, 'occupancy').measures == {'peak': 2}
    add(trace, 2, 1, load=3)
    assert not check(trace, 'occupancy').passed


def test_fabricated_packet(trace):
    add(trace, 1, 1, sends=[(1, 2, 7, None)])
    add(trace, 2, 2, kind='receive', uid=7, channel=(1, 2))
    assert check(trace, 'no-fabrication').passed
    add(trace, 3, 2, kind='receive', uid=8, channel=(1, 2))
    verdict = check(trace, 'no-fabrication')
    assert not verdict.passed and verdict.witness['uid'] == 8


def test_check_all_skips_runner_checks(trace):
    add(trace, 1, 1)
    names = [v.name for v in check_all(trace, ['occupancy', 'determinism', 'closure'])]
    assert names == ['occupancy', 'closure']


V1 = View(CounterTriple(LABEL, 1, 1), S)
V2 = View(CounterTriple(LABEL, 2, 1), S)


def install(prev, view, delivered=(), before=(), after=None):
    return ('view-install', {'prev': prev, 'view': view, 'delivered': tuple(delivered),
                             'previous_replica': tuple(before),
                             'replica': tuple(before if after is None else after)})


def entry(rnd, sender, message, view=V1):
    return (view.id, rnd, sender, message)


def test_equal_deliveries_between_views(trace):
    add(trace, 1, 1, records=[install(V1, V2, [entry(1, 1, 'a')])])
    add(trace, 2, 2, records=[install(V1, V2, [entry(1, 1, 'a')])])
    add(trace, 3, 3, records=[install(NO_VIEW, V2)])
    verdict = check(trace, 'vs-delivery')
    assert verdict.passed and verdict.measures == {'view_changes': 1}


def test_unequal_deliveries_between_views(trace):
    add(trace, 1, 1, records=[install(V1, V2, [entry(1, 1, 'a')])])
    add(trace, 2, 3, records=[install(V1, V2)])
    verdict = check(trace, 'vs-delivery')
    assert not verdict.passed
    assert verdict.witness['pids'] == [1, 3]


def test_view_change_extends_the_replica(trace):
    kept = [entry(1, 1, 'a')]
    add(trace, 1, 1, records=[install(V1, V2, before=kept, after=kept + [entry(2, 2, 'b')])])
    assert check(trace, 'vs-state-preservation').measures == {'installs': 1}

    add(trace, 2, 2, records=[install(V1, V2, before=kept, after=[entry(2, 2, 'b')])])
    verdict = check(trace, 'vs-state-preservation')
    assert not verdict.passed and verdict.witness['pid'] == 2


def test_members_settle_on_one_coordinator(trace):
    add(trace, 1, 1, updates={pid: snap(vs_crd=1) for pid in S})
    add(trace, 2, 2)
    verdict = check(trace, 'single-coordinator')
    assert verdict.passed and verdict.measures == {'coordinator_step': 1}

    add(trace, 3, 2, updates={2: snap(vs_crd=2)})
    verdict = check(trace, 'single-coordinator')
    assert not verdict.passed and verdict.witness['reason'] == BUDGET


def test_crashed_coordinator_is_not_agreement(trace):
    add(trace, 1, 1, updates={pid: snap(vs_crd=1) for pid in S}, live={2, 3})
    assert not check(trace, 'single-coordinator').passed


def drained(trace):
    add(trace, 1, 1, records=[('reconf-ready', {'view': V1})], updates={1: snap(vs_crd=1)})


def test_fetch_during_drain(trace):
    drained(trace)
    add(trace, 2, 2, records=[('fetch', {'view': V1, 'input': '2:1', 'role': 'follower'})])
    verdict = check(trace, 'no-fetch-during-drain')
    assert not verdict.passed
    assert (verdict.witness['step'], verdict.witness['pid']) == (2, 2)


def test_fetch_after_the_next_view(trace):
    drained(trace)
    add(trace, 2, 1, records=[install(V1, V2), ('fetch', {'view': V2, 'input': '1:1', 'role': 'coordinator'})])
    add(trace, 3, 2, records=[('fetch', {'view': V1, 'input': '2:1', 'role': 'follower'})])
    verdict = check(trace, 'no-fetch-during-drain')
    assert verdict.passed and verdict.measures == {'fetches': 2}


def test_drain_ends_with_the_coordinator_crash(trace):
    drained(trace)
    add(trace, 2, 1, kind='crash', live={2, 3})
    add(trace, 3, 2, records=[('fetch', {'view': V1, 'input': '2:1', 'role': 'follower'})], live={2, 3})
    assert check(trace, 'no-fetch-during-drain').passed


def test_drain_needs_the_coordinator(trace):
    add(trace, 1, 2, records=[('reconf-ready', {'view': V1})], updates={2: snap(vs_crd=1)})
    add(trace, 2, 3, records=[('fetch', {'view': V1, 'input': '3:1', 'role': 'follower'})])
    assert check(trace, 'no-fetch-during-drain').passed


PAIR = frozenset({1, 2})


def test_accepted_replacement_installed_everywhere(trace):
    add(trace, 10, 1, kind='estab-request', value=[1, 2], accepted=True)
    add(trace, 12, 1, records=[('config-install', {'value': PAIR})])
    add(trace, 13, 2, records=[('config-install', {'value': PAIR})],
        updates={pid: snap(PAIR) for pid in S})
    verdict = check(trace, 'replacement')
    assert verdict.passed
    assert verdict.measures == {'installed': 2, 'install_step': 13}


def test_rejected_replacement_requests_fail(trace):
    add(trace, 10, 1, kind='estab-request', value=[1, 2], accepted=False)
    add(trace, 11, 2, kind='estab-request', value=[2, 3], accepted=False)
    add(trace, 12, 1)
    verdict = check(trace, 'replacement')
    assert not verdict.passed
    assert verdict.witness['reason'] == 'no replacement request accepted'
    assert verdict.witness['requests'] == 2


def test_replacement_without_requests_is_vacuous(trace):
    add(trace, 1, 1)
    assert check(trace, 'replacement').measures == {'installed': 0}


def test_accepted_replacement_never_installed(trace):
    add(trace, 10, 1, kind='estab-request', value=[1, 2], accepted=True)
    add(trace, 12, 1)
    verdict = check(trace, 'replacement')
    assert not verdict.passed and verdict.witness['reason'] == BUDGET


def test_two_sets_installed(trace):
    add(trace, 10, 1, kind='estab-request', value=[1, 2], accepted=True)
    add(trace, 12, 1, records=[('config-install', {'value': PAIR})])
    add(trace, 13, 2, records=[('config-install', {'value': S})])
    verdict = check(trace, 'replacement')
    assert not verdict.passed
    assert verdict.witness['values'] == [[1, 2], [1, 2, 3]]


def test_replacement_left_unfinished(trace):
    add(trace, 10, 1, kind='estab-request', value=[1, 2], accepted=True)
    add(trace, 12, 1, records=[('config-install', {'value': PAIR})], updates={1: snap(PAIR)})
    assert not check(trace, 'replacement').passed


def proposing(degree):
    return snap(prp=Proposal(1, PAIR), degree=degree)


def test_degrees_one_apart(trace):
    add(trace, 1, 1, kind='estab-request', value=[1, 2], accepted=True)
    add(trace, 2, 1, updates={1: proposing(2), 2: proposing(1), 3: proposing(2)})
    verdict = check(trace, 'phase-unison')
    assert verdict.passed and verdict.measures == {'max_degree_gap': 1}


def test_degree_gap_during_replacement_before_convergence(trace):
    add(trace, 1, 1, updates={1: snap(PAIR)})
    add(trace, 2, 1, kind='estab-request', value=[1, 2], accepted=True)
    add(trace, 3, 2, updates={2: proposing(1), 3: proposing(3)})
    add(trace, 5, 1, updates={pid: snap() for pid in S})
    verdict = check(trace, 'phase-unison')
    assert not verdict.passed
    assert (verdict.witness['step'], verdict.witness['gap']) == (3, 2)


def test_degree_gap_after_triggered_replacement(trace):
    add(trace, 1, 1, updates={1: snap(PAIR)})
    add(trace, 2, 1, records=[('trigger', {'cause': 'collapse', 'value': PAIR, 'effective': True})])
    add(trace, 3, 2, updates={2: proposing(0), 3: proposing(2)})
    add(trace, 5, 1, updates={pid: snap() for pid in S})
    assert not check(trace, 'phase-unison').passed


def test_foreign_label_after_receipt(trace):
    add(trace, 1, 1, updates={1: snap(label_received=False, label_foreign=frozenset({4}))})
    add(trace, 2, 2, updates={2: snap(label_received=True, label_foreign=frozenset())})
    assert check(trace, 'label-purity').passed

    add(trace, 3, 3, updates={3: snap(counter_received=True, counter_foreign=frozenset({4}))})
    verdict = check(trace, 'label-purity')
    assert not verdict.passed
    assert verdict.witness['reason'] == 'foreign counter creator'
    assert verdict.witness['creators'] == [4]


def test_members_share_one_label(trace):
    add(trace, 1, 1, updates={pid: snap(label_max=LABEL) for pid in S})
    add(trace, 2, 2)
    assert check(trace, 'label-convergence').measures == {'label_convergence_step': 1}

    add(trace, 3, 2, updates={2: snap(label_max=None)})
    verdict = check(trace, 'label-convergence')
    assert not verdict.passed and verdict.witness['reason'] == BUDGET


def test_label_creations_within_bound(make_scenario):
    trace = Trace(make_scenario("""
        processors: [1, 2, 3]
        expect:
          label_creation_bound: 2
    """))
    add(trace, 1, 1, records=[('next-label', {'store': 'label'})] * 2 + [('next-label', {'store': 'counter'})])
    verdict = check(trace, 'creation-count')
    assert verdict.passed
    assert verdict.measures == {'label_creations': 2, 'counter_label_creations': 1, 'bound': 2}

    add(trace, 2, 2, records=[('next-label', {'store': 'label'})])
    verdict = check(trace, 'creation-count')
    assert not verdict.passed
    assert verdict.witness['reason'] == 'too many label labels' and verdict.witness['step'] == 2


def join(config=S, no_reco=True, tainted=False):
    return ('join', {'config': frozenset(config), 'passes': (1, 2), 'no_reco': no_reco, 'tainted': tainted})


def test_join_into_the_members_configuration(trace):
    add(trace, 1, 4, records=[join()], live={1, 2, 3, 4})
    assert check(trace, 'join-safety').measures == {'joins': 1}


def test_join_during_reconfiguration(trace):
    add(trace, 1, 4, records=[join(no_reco=False)], live={1, 2, 3, 4})
    verdict = check(trace, 'join-safety')
    assert not verdict.passed and verdict.witness['reason'] == 'join during reconfiguration'


def test_join_into_a_superseded_configuration(trace):
    add(trace, 1, 4, records=[join(config=PAIR)], live={1, 2, 3, 4})
    verdict = check(trace, 'join-safety')
    assert not verdict.passed and verdict.witness['pid'] == 4


def test_clean_joiner(trace):
    add(trace, 1, 4, records=[join()], updates={4: snap(tainted=False)})
    add(trace, 2, 4, updates={4: snap(tainted=False)})
    assert check(trace, 'taint-free').measures == {'joins': 1}


def test_tainted_joiner(trace):
    add(trace, 1, 4, records=[join(tainted=True)])
    assert check(trace, 'taint-free').witness['reason'] == 'tainted join'


def test_taint_showing_up_after_the_join(trace):
    add(trace, 1, 4, records=[join()])
    add(trace, 2, 4, updates={4: snap(tainted=True)})
    verdict = check(trace, 'taint-free')
    assert not verdict.passed
    assert (verdict.witness['reason'], verdict.witness['step']) == ('taint after join', 2)


def test_one_join_per_arrival(trace):
    add(trace, 1, 4, kind='join')
    add(trace, 5, 4, records=[join()])
    assert check(trace, 'corrupt-join-bound').measures == {'joins': 1}

    add(trace, 9, 4, records=[join()])
    verdict = check(trace, 'corrupt-join-bound')
    assert not verdict.passed
    assert (verdict.witness['step'], verdict.witness['pid']) == (9, 4)


def test_injected_fault_allows_a_rejoin(trace):
    add(trace, 1, 2, records=[join()])
    add(trace, 2, None, kind='inject')
    add(trace, 3, 2, records=[join()])
    assert check(trace, 'corrupt-join-bound').passed
    add(trace, 4, 2, records=[join()])
    assert not check(trace, 'corrupt-join-bound').passed


def test_trigger_after_majority_crash(trace):
    add(trace, 5, 2, kind='crash', live={1, 3})
    add(trace, 6, 3, kind='crash', live={1})
    assert check(trace, 'trigger-when-needed').witness['reason'] == BUDGET

    add(trace, 8, 1, records=[('trigger', {'cause': 'collapse', 'value': frozenset({1}), 'effective': True})],
        live={1})
    verdict = check(trace, 'trigger-when-needed')
    assert verdict.passed
    assert verdict.measures == {'collapse_step': 6, 'trigger_step': 8}


def test_minority_crash_needs_no_trigger(trace):
    add(trace, 5, 2, kind='crash', live={1, 3})
    assert check(trace, 'trigger-when-needed').measures == {'applicable': False}


def test_too_few_completed_increments(make_scenario):
    trace = Trace(make_scenario("""
        processors: [1, 2, 3]
        expect:
          min_increments: 2
    """))
    add(trace, 5, 1, records=[increment(1, 1, 5, seqn=4)])
    add(trace, 6, 1, records=[increment(2, 6, 6, seqn=None, outcome='abort')])
    verdict = check(trace, 'counter-monotonicity')
    assert not verdict.passed
    assert verdict.witness['reason'] == BUDGET
    assert verdict.measures['increments'] == 1

    add(trace, 9, 1, records=[increment(3, 7, 9, seqn=5)])
    assert check(trace, 'counter-monotonicity').passed
