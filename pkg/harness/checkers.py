"""
Property checkers

Each checker is a pure function of a finished trace and returns a Verdict.
Liveness properties are suffix properties: they pass when the predicate
holds from some step through the end of the run, and fail with a "budget"
witness otherwise.
"""
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import wraps
from typing import Optional

from models.counter import counter_precedes
from models.types import is_set
from utils.helpers import majority

CHECKERS = {}

# Verdicts the runner produces itself; they need more than one trace
RUNNER_CHECKS = ('determinism', 'golden')

BUDGET = 'budget'


@dataclass
class Verdict:
    name: str
    passed: bool
    witness: Optional[dict] = None
    measures: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.passed and not self.witness:
            raise ValueError(f"failed verdict '{self.name}' needs a witness")

    def to_dict(self):
        """Convert verdict to dictionary"""
        return {
            'name': self.name,
            'passed': self.passed,
            'witness': self.witness,
            'measures': dict(self.measures),
        }

    def __repr__(self):
        return f'<Verdict {self.name} {"pass" if self.passed else "fail"}>'


def checker(name):
    """Register a trace checker under `name`; the wrapped function returns (passed, witness, measures)"""
    def decorator(fn):
        @wraps(fn)
        def wrapper(trace):
            passed, witness, measures = fn(trace)
            return Verdict(name, passed, witness, measures or {})
        CHECKERS[name] = wrapper
        return wrapper
    return decorator


def is_known(name):
    return name in CHECKERS or name in RUNNER_CHECKS


def check(trace, name):
    """Run one registered checker over a trace"""
    if name not in CHECKERS:
        raise KeyError(f"unknown checker '{name}'")
    return CHECKERS[name](trace)


def check_all(trace, names):
    return [check(trace, name) for name in names if name in CHECKERS]


def _witness(trace, step, reason, **detail):
    witness = {'step': step, 'reason': reason, 'slice': trace.window(step)}
    witness.update(detail)
    return witness


def _budget(trace, what):
    return _witness(trace, trace.last_step, BUDGET, detail=f"{what} not reached by step {trace.last_step}")


def _participants(entry, states):
    return {pid: states[pid] for pid in sorted(entry.live)
            if pid in states and states[pid].get('participant')}


def _suffix_start(trace, predicate):
    """
    First step from which predicate(entry, states) holds through the end, or None

    Only scheduler steps are inspected; an empty run is judged on its initial state.
    """
    holds_from = None
    seen = False
    for entry, states in trace.steps():
        seen = True
        if predicate(entry, states):
            if holds_from is None:
                holds_from = entry.step
        else:
            holds_from = None
    if not seen:
        return None
    return holds_from


def _first_violation(trace, predicate, after=0):
    """(entry, states) of the first scheduler step at or after `after` violating predicate, or (None, None)"""
    for entry, states in trace.steps():
        if entry.step >= after and not predicate(entry, states):
            return entry, states
    return None, None


def _settled(entry, states, expect):
    nodes = _participants(entry, states)
    if not nodes:
        return False
    configs = set()
    for snapshot in nodes.values():
        if snapshot['stale'] or not is_set(snapshot['config']):
            return False
        if expect.get('config') == 'trusted' and snapshot['config'] != snapshot['trusted']:
            return False
        configs.add(snapshot['config'])
    return len(configs) == 1


def convergence_step(trace):
    expect = trace.scenario.expect
    return _suffix_start(trace, lambda entry, states: _settled(entry, states, expect))


@checker('convergence')
def check_convergence(trace):
    """Every live participant is stale-free and holds the same configuration set"""
    step = convergence_step(trace)
    if step is None:
        return False, _budget(trace, 'stale-free agreement'), {}
    limit = trace.scenario.expect.get('convergence_within')
    if limit is not None and step > limit:
        return False, _witness(trace, step, 'late', limit=limit), {'convergence_step': step}
    return True, None, {'convergence_step': step}


@checker('conflict-freedom')
def check_conflict_freedom(trace):
    """After convergence, participants reporting noReco never hold different configurations"""
    start = convergence_step(trace)
    if start is None:
        return False, _budget(trace, 'convergence'), {}

    def agree(entry, states):
        quiet = {s['config'] for s in _participants(entry, states).values()
                 if s['no_reco'] and is_set(s['config'])}
        return len(quiet) <= 1

    bad, _ = _first_violation(trace, agree, after=start)
    if bad is not None:
        return False, _witness(trace, bad.step, 'conflicting configurations'), {}
    return True, None, {'convergence_step': start}


@checker('closure')
def check_closure(trace):
    """No live processor ever detects stale information"""
    bad, states = _first_violation(
        trace, lambda entry, states: not any(states[pid]['stale'] for pid in entry.live if pid in states))
    if bad is not None:
        stale = {pid: sorted(states[pid]['stale']) for pid in bad.live if pid in states and states[pid]['stale']}
        return False, _witness(trace, bad.step, 'stale information', stale=stale), {}
    return True, None, {'steps': trace.last_step}


def _replacement_start(trace):
    """Step of the first accepted estab(), scripted or triggered, or None"""
    steps = [e.step for e in trace.events('estab-request') if e.event.data.get('accepted')]
    steps.extend(step for step, _, _, data in trace.records('trigger') if data.get('effective'))
    return min(steps, default=None)


@checker('phase-unison')
def check_phase_unison(trace):
    """Participants taking part in a replacement never drift more than one degree apart"""
    start = _replacement_start(trace)
    if start is None:
        start = convergence_step(trace) or 0
    worst = 0
    for entry, states in trace.steps():
        if entry.step < start:
            continue
        degrees = [s['degree'] for s in _participants(entry, states).values() if not s['prp'].is_default]
        if len(degrees) > 1:
            gap = max(degrees) - min(degrees)
            worst = max(worst, gap)
            if gap > 1:
                return False, _witness(trace, entry.step, 'degree gap', gap=gap), {'max_degree_gap': gap}
    return True, None, {'max_degree_gap': worst}


@checker('replacement')
def check_replacement(trace):
    """Requested replacements end with a single proposed set installed everywhere and phase 0 resumed"""
    asked = list(trace.events('estab-request'))
    requests = [e for e in asked if e.event.data.get('accepted')]
    if not requests:
        if asked:
            return False, _witness(trace, asked[-1].step, 'no replacement request accepted',
                                   requests=len(asked)), {'installed': 0}
        return True, None, {'installed': 0}
    first = requests[0].step
    installed = {(step, pid): data['value'] for step, pid, _, data in trace.records('config-install')
                 if step >= first}
    values = set(installed.values())
    if not values:
        return False, _budget(trace, 'installation'), {}
    if len(values) > 1:
        step = min(step for (step, _), value in installed.items())
        return False, _witness(trace, step, 'several sets installed',
                               values=sorted(sorted(v) for v in values)), {}
    (target,) = values
    requested = {frozenset(e.event.data['value']) for e in requests}
    if target not in requested:
        return False, _witness(trace, first, 'installed set was never proposed', value=sorted(target)), {}

    final_entry, final = None, None
    for final_entry, final in trace.states():
        pass
    participants = _participants(final_entry, final)
    for pid, snapshot in participants.items():
        if snapshot['config'] != target or not snapshot['prp'].is_default:
            return False, _budget(trace, f'installation at p{pid}'), {}
    last = max(step for step, _ in installed)
    return True, None, {'installed': len(installed), 'install_step': last}


def _triggers(trace):
    return list(trace.records('trigger'))


@checker('trigger-when-needed')
def check_trigger_when_needed(trace):
    """Crashing a majority of the configuration leads to an estab() call"""
    collapse = None
    for entry, states in trace.states():
        if entry.event.kind != 'crash':
            continue
        configs = [s['config'] for s in _participants(entry, states).values() if is_set(s['config'])]
        if not configs:
            continue
        config = Counter(configs).most_common(1)[0][0]
        crashed = trace.crashed_by(entry.step)
        if len(config & crashed) >= majority(len(config)) and collapse is None:
            collapse = entry.step
    if collapse is None:
        return True, None, {'applicable': False}
    fired = [step for step, _, _, data in _triggers(trace) if step >= collapse]
    if not fired:
        return False, _budget(trace, 'trigger after collapse'), {'collapse_step': collapse}
    return True, None, {'collapse_step': collapse, 'trigger_step': fired[0]}


@checker('trigger-once')
def check_trigger_once(trace):
    """Between two configuration installations each participant triggers at most once per cause"""
    counts = defaultdict(Counter)
    for step, pid, kind, data in trace.records('trigger', 'config-install', 'config-set'):
        if kind != 'trigger':
            counts[pid].clear()
            continue
        counts[pid][data['cause']] += 1
        if counts[pid][data['cause']] > 1:
            return False, _witness(trace, step, 'repeated trigger', pid=pid, cause=data['cause']), {}
    return True, None, {'triggers': len(_triggers(trace))}


@checker('spurious-bound')
def check_spurious_bound(trace):
    """Total estab() triggers stay within N·(1+cap·N)"""
    n, cap = trace.scenario.n_bound, trace.scenario.cap
    bound = n * (1 + cap * n)
    triggers = _triggers(trace)
    measures = {'triggers': len(triggers), 'bound': bound}
    if len(triggers) > bound:
        return False, _witness(trace, triggers[bound][0], 'too many triggers'), measures
    return True, None, measures


@checker('join-completion')
def check_join_completion(trace):
    """Every processor that joined the simulation and did not crash becomes a participant"""
    arrivals = {e.event.pid: e.step for e in trace.events('join')}
    joined = {pid: step for step, pid, _, _ in trace.records('join')}
    crashed = trace.crashed_by(trace.last_step)
    for pid, step in sorted(arrivals.items()):
        if pid not in joined and pid not in crashed:
            return False, _budget(trace, f'participation of p{pid}'), {}
    delays = {pid: joined[pid] - arrivals[pid] for pid in arrivals if pid in joined}
    return True, None, {'join_delay': max(delays.values(), default=0)}


@checker('join-safety')
def check_join_safety(trace):
    """Joins happen only outside reconfiguration, into the configuration the members hold"""
    for entry, states in trace.states():
        for kind, data in entry.records:
            if kind != 'join':
                continue
            if not data['no_reco'] or not is_set(data['config']):
                return False, _witness(trace, entry.step, 'join during reconfiguration', pid=entry.event.pid), {}
            members = [states[pid]['config'] for pid in entry.live
                       if pid in data['config'] and pid in states and states[pid].get('participant')]
            if members and Counter(members).most_common(1)[0][0] != data['config']:
                return False, _witness(trace, entry.step, 'joined a superseded configuration',
                                       pid=entry.event.pid), {}
    return True, None, {'joins': len(list(trace.records('join')))}


@checker('taint-free')
def check_taint_free(trace):
    """Joiners never carry stale application state into participation"""
    joined = {}
    for step, pid, _, data in trace.records('join'):
        if data.get('tainted'):
            return False, _witness(trace, step, 'tainted join', pid=pid), {}
        joined.setdefault(pid, step)
    for entry, states in trace.steps():
        for pid, step in joined.items():
            if entry.step >= step and pid in entry.updates and entry.updates[pid].get('tainted'):
                return False, _witness(trace, entry.step, 'taint after join', pid=pid), {}
    return True, None, {'joins': len(joined)}


@checker('corrupt-join-bound')
def check_corrupt_join_bound(trace):
    """Each processor joins at most once per arrival plus once per fault touching it"""
    allowance = Counter()
    for entry in trace.events('join'):
        allowance[entry.event.pid] += 1
    allowance.update(trace.initial_live)
    for entry in trace.events('inject'):
        allowance.update(entry.live)
    joins = Counter(pid for _, pid, _, _ in trace.records('join'))
    for pid, count in sorted(joins.items()):
        if count > allowance[pid]:
            step = [s for s, p, _, _ in trace.records('join') if p == pid][allowance[pid]]
            return False, _witness(trace, step, 'unexpected join', pid=pid), {}
    return True, None, {'joins': sum(joins.values())}


def _members(entry, states):
    nodes = _participants(entry, states)
    return {pid: s for pid, s in nodes.items() if is_set(s['config']) and pid in s['config']}


@checker('label-purity')
def check_label_purity(trace):
    """After its first receipt a member stores no label created by a non-member"""
    for entry, states in trace.steps():
        for pid, snapshot in entry.updates.items():
            for key in ('label', 'counter'):
                if snapshot.get(f'{key}_received') and snapshot.get(f'{key}_foreign'):
                    return False, _witness(trace, entry.step, f'foreign {key} creator', pid=pid,
                                           creators=sorted(snapshot[f'{key}_foreign'])), {}
    return True, None, {}


@checker('label-convergence')
def check_label_convergence(trace):
    """Members eventually share one legit maximal label"""
    def agree(entry, states):
        members = _members(entry, states)
        labels = {s.get('label_max') for s in members.values()}
        return bool(members) and len(labels) == 1 and None not in labels

    step = _suffix_start(trace, agree)
    if step is None:
        return False, _budget(trace, 'label agreement'), {}
    return True, None, {'label_convergence_step': step}


@checker('creation-count')
def check_creation_count(trace):
    """Label creations stay within N·(N²+m) for m = cap·N·(N−1) labels in transit"""
    n, cap = trace.scenario.n_bound, trace.scenario.cap
    bound = trace.scenario.expect.get('label_creation_bound', n * (n * n + cap * n * (n - 1)))
    created = Counter(data['store'] for _, _, _, data in trace.records('next-label'))
    measures = {'label_creations': created['label'], 'counter_label_creations': created['counter'],
                'bound': bound}
    for store in ('label', 'counter'):
        if created[store] > bound:
            over = [s for s, _, _, d in trace.records('next-label') if d['store'] == store][bound]
            return False, _witness(trace, over, f'too many {store} labels'), measures
    return True, None, measures


def _increments(trace):
    return [(step, pid, data) for step, pid, _, data in trace.records('increment')]


def _call(data):
    return {k: data[k] for k in ('sid', 'caller', 'start', 'end', 'outcome', 'result')}


@checker('counter-monotonicity')
def check_counter_monotonicity(trace):
    """
    Sequentially ordered completed increments return strictly increasing counters

    Calls are compared within the configuration they ran over; a
    reconfiguration rebuilds the counter structures from scratch.
    """
    by_config = defaultdict(list)
    for step, pid, data in _increments(trace):
        if data['outcome'] != 'ok':
            if data['result'] is not None:
                return False, _witness(trace, step, 'aborted increment returned a value', call=_call(data)), {}
            continue
        by_config[data['config']].append(data)
    for calls in by_config.values():
        calls.sort(key=lambda d: d['end'])
        for later in calls:
            for earlier in calls:
                if earlier['end'] >= later['start']:
                    break
                if not counter_precedes(earlier['result'], later['result']):
                    return False, _witness(trace, later['end'], 'non-monotonic counters',
                                           calls=[_call(earlier), _call(later)]), {}
    completed = sum(len(calls) for calls in by_config.values())
    aborted = sum(1 for _, _, d in _increments(trace) if d['outcome'] != 'ok')
    measures = {'increments': completed, 'aborted': aborted, 'configurations': len(by_config)}
    minimum = trace.scenario.expect.get('min_increments')
    if minimum is not None and completed < minimum:
        return False, _budget(trace, f'{minimum} completed increments'), measures
    return True, None, measures


@checker('counter-distinct')
def check_counter_distinct(trace):
    """Concurrent completed increments never return the same counter"""
    seen = {}
    for step, pid, data in _increments(trace):
        if data['outcome'] != 'ok':
            continue
        result = data['result']
        if result in seen:
            return False, _witness(trace, step, 'duplicate counter',
                                   calls=[_call(seen[result]), _call(data)]), {}
        seen[result] = data
    return True, None, {'increments': len(seen)}


@checker('majority-intersection')
def check_majority_intersection(trace):
    """Completed increments read from and wrote to a majority of their configuration"""
    for step, pid, data in _increments(trace):
        if data['outcome'] != 'ok':
            continue
        config = data['config']
        need = majority(len(config))
        for phase in ('readers', 'writers'):
            quorum = set(data[phase])
            if len(quorum) < need or not quorum <= config:
                return False, _witness(trace, step, f'{phase} are not a majority', call=_call(data),
                                       quorum=sorted(quorum)), {}
    return True, None, {}


def _installs(trace):
    return [(step, pid, data) for step, pid, _, data in trace.records('view-install')]


@checker('vs-delivery')
def check_vs_delivery(trace):
    """Processors moving between the same two views delivered the same messages in the earlier one"""
    groups = defaultdict(dict)
    for step, pid, data in _installs(trace):
        if data['prev'].id is None:
            continue
        key = (data['prev'], data['view'])
        delivered = Counter(data['delivered'])
        for other, (other_step, other_delivered) in groups[key].items():
            if other_delivered != delivered:
                return False, _witness(trace, step, 'delivery sets differ', pids=[other, pid],
                                       view=str(data['prev'])), {}
        groups[key][pid] = (step, delivered)
    return True, None, {'view_changes': len(groups)}


@checker('vs-state-preservation')
def check_vs_state_preservation(trace):
    """A view change never drops entries a processor already held"""
    for step, pid, data in _installs(trace):
        if data['prev'].id is None:
            continue
        before, after = data['previous_replica'], data['replica']
        if tuple(after[:len(before)]) != tuple(before):
            return False, _witness(trace, step, 'replica rewritten', pid=pid, view=str(data['view'])), {}
    return True, None, {'installs': len(_installs(trace))}


@checker('single-coordinator')
def check_single_coordinator(trace):
    """Members eventually agree on one live coordinator"""
    def agreed(entry, states):
        members = _members(entry, states)
        claimed = {s.get('vs_crd') for s in members.values()}
        return len(claimed) == 1 and None not in claimed and claimed <= set(entry.live)

    step = _suffix_start(trace, agreed)
    if step is None:
        return False, _budget(trace, 'coordinator agreement'), {}
    return True, None, {'coordinator_step': step}


@checker('no-fetch-during-drain')
def check_no_fetch_during_drain(trace):
    """Nobody fetches input in a view whose coordinator has declared itself ready to reconfigure"""
    draining = {}
    for entry, states in trace.states():
        if entry.event.kind == 'crash':
            draining = {view: pid for view, pid in draining.items() if pid != entry.event.pid}
        pid = entry.event.pid
        for kind, data in entry.records:
            if kind == 'reconf-ready' and states.get(pid, {}).get('vs_crd') == pid:
                draining[data['view']] = pid
            elif kind in ('resume', 'view-install'):
                for view in [v for v, owner in draining.items() if owner == pid]:
                    del draining[view]
            elif kind == 'fetch' and data['view'] in draining:
                return False, _witness(trace, entry.step, 'fetch during drain', pid=pid,
                                       view=str(data['view'])), {}
    fetches = len(list(trace.records('fetch')))
    return True, None, {'fetches': fetches}


@checker('fd-exclusion')
def check_fd_exclusion(trace):
    """Crashed processors are eventually trusted by no live processor"""
    def excluded(entry, states):
        crashed = trace.crashed_by(entry.step)
        return all(not (states[pid]['trusted'] & crashed) for pid in entry.live if pid in states)

    step = _suffix_start(trace, excluded)
    if step is None:
        return False, _budget(trace, 'exclusion of crashed processors'), {}
    return True, None, {'exclusion_step': step}


@checker('occupancy')
def check_occupancy(trace):
    """Channel occupancy never exceeds cap"""
    cap = trace.scenario.cap
    peak = 0
    for entry in trace.entries:
        load = entry.event.data.get('load', 0)
        peak = max(peak, load)
        if load > cap:
            return False, _witness(trace, entry.step, 'channel over capacity', load=load), {'peak': load}
    return True, None, {'peak': peak}


@checker('fairness')
def check_fairness(trace):
    """Every packet sent on a channel is followed by a delivery attempt on it within the fairness window"""
    slack = trace.scenario.fairness_window + len(trace.scenario.processors) ** 2 + len(trace.scenario.processors)
    waiting = {}
    for entry in trace.entries:
        channel = entry.event.data.get('channel')
        if channel is not None:
            waiting.pop(tuple(channel), None)
        for src, dst, _, _ in entry.event.data.get('sends', ()):
            waiting.setdefault((src, dst), entry.step)
        for key, since in waiting.items():
            if entry.step - since > slack:
                return False, _witness(trace, entry.step, 'channel starved', channel=list(key)), {}
    return True, None, {}


@checker('no-fabrication')
def check_no_fabrication(trace):
    """Every delivered packet was sent or injected before"""
    known = set()
    for entry in trace.entries:
        data = entry.event.data
        known.update(data.get('injected', ()))
        uid = data.get('uid')
        if uid is not None and uid not in known:
            return False, _witness(trace, entry.step, 'fabricated packet', uid=uid), {}
        for _, _, sent, _ in data.get('sends', ()):
            known.add(sent)
    return True, None, {'packets': len(known)}
