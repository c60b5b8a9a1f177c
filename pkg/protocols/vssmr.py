"""
Virtually synchronous state machine replication over the reconfigurable quorum

A coordinator, elected through counter-stamped view proposals, runs
multicast rounds: it applies the messages of the previous round to the
replica and collects the latest input of every view member. Followers copy
the coordinator's record. Before a delicate reconfiguration the coordinator
raises suspend, waits until every view member has suspended, and only then
lets the management layer ask for the new configuration.
"""
import logging

from models.counter import CounterTriple, counter_leq
from models.label import EpochLabel
from models.types import is_set
from models.view import INITIAL_VIEW_STATE, Status, View, ViewState
from netsim.datalink import Outgoing
from protocols.app_log import TAINT, AppendLog, delivered_in, is_tainted
from protocols.recma import Prediction

logger = logging.getLogger(__name__)


def compute_crd(states, cur_conf, fd_part, fd_parts):
    """
    (seemCrd, valCrd) from the latest known records

    Args:
        states (dict): pid -> ViewState, own record included
        cur_conf: current configuration value
        fd_part (frozenset): own trusted participants
        fd_parts (dict): pid -> that processor's trusted participants as last reported
    """
    if not is_set(cur_conf):
        return frozenset(), frozenset()
    half = len(cur_conf) // 2
    seem = set()
    for candidate in sorted(fd_part & cur_conf):
        record = states.get(candidate)
        if record is None or record.prop_v.id is None or record.prop_v.id.wid != candidate:
            continue
        members = record.prop_v.members
        if len(members & cur_conf) <= half or len(record.fd_part & cur_conf) <= half:
            continue
        if candidate not in members:
            continue
        if not all(candidate in fd_parts.get(k, frozenset()) for k in members):
            continue
        if record.status is Status.MULTICAST and not (record.view == record.prop_v and record.crd == candidate):
            continue
        if record.status is Status.INSTALL and record.crd != candidate:
            continue
        seem.add(candidate)

    valid = {l for l in seem
             if all(counter_leq(states[k].prop_v.id, states[l].prop_v.id) for k in seem)}
    return frozenset(seem), frozenset(valid)


class VirtualSynchrony:

    def __init__(self, me, recsa, counter, prediction=None, application=None):
        self.me = me
        self.recsa = recsa
        self.counter = counter
        self.prediction = prediction or Prediction()
        self.application = application or AppendLog(me)
        self.state = {me: INITIAL_VIEW_STATE}
        self.seem_crd = frozenset()
        self.val_crd = frozenset()
        self.view_conf = None
        self.inc_pending = False
        self.events = []

    @property
    def mine(self):
        return self.state[self.me]

    def evaluate(self, cur_conf):
        return self.prediction.evaluate(cur_conf, self.recsa)

    def need_delicate_reconf(self):
        return self.mine.reconf_ready and self.val_crd == frozenset([self.me]) \
            and self.evaluate(self.recsa.get_config())

    def _fetch(self, role, view):
        value = self.application.fetch()
        self.events.append(('fetch', {'input': value, 'role': role, 'view': view}))
        return value

    def tick(self, step=None):
        recsa = self.recsa
        if not recsa.is_participant():
            return []
        me = self.me
        before = self.mine
        cur = recsa.get_config()
        fd_part = recsa.part()
        fd_parts = {k: view.part for k, view in recsa.fd.items()}
        fd_parts[me] = fd_part

        mine = before.evolve(fd_part=fd_part)
        self.state[me] = mine
        self.seem_crd, self.val_crd = compute_crd(self.state, cur, fd_part, fd_parts)
        crd = next(iter(self.val_crd)) if len(self.val_crd) == 1 else None
        coordinator = crd == me
        mine = mine.evolve(no_crd=crd is None, crd=crd)

        no_reco = recsa.no_reco()
        # a drained view stays drained until a new view is installed, unless the configuration never moved
        settled = no_reco and cur == self.view_conf
        if coordinator and mine.status is Status.MULTICAST and mine.reconf_ready:
            if settled:
                flag = self.evaluate(cur)
                mine = mine.evolve(suspend=flag, reconf_ready=flag)
        elif crd is not None and not coordinator \
                and self.state.get(crd, INITIAL_VIEW_STATE).status in (Status.PROPOSE, Status.INSTALL):
            mine = mine.evolve(suspend=False, reconf_ready=False)
        if not no_reco:
            mine = mine.evolve(suspend=True)
        self.state[me] = mine
        self._note_transitions(before, mine, cur)
        before = mine

        if self._should_propose(mine, cur, fd_part, fd_parts, coordinator, no_reco):
            if not self.inc_pending:
                self.inc_pending = True
                self.counter.request_increment('view', self._on_view_counter)
        elif coordinator and self._in_unison(mine):
            mine = self._coordinate(mine, cur, no_reco)
        elif crd is not None and not coordinator:
            mine = self._follow(mine, self.state.get(crd, INITIAL_VIEW_STATE))
        self.state[me] = mine
        self._note_transitions(before, mine, cur)
        return self._send(mine, coordinator)

    def _should_propose(self, mine, cur, fd_part, fd_parts, coordinator, no_reco):
        if not (is_set(cur) and no_reco and self.me in cur):
            return False
        half = len(cur) // 2
        if len(fd_part & cur) <= half:
            return False
        if mine.no_crd:
            votes = [k for k in fd_part
                     if self.me in fd_parts.get(k, frozenset())
                     and self.state.get(k, INITIAL_VIEW_STATE).no_crd]
            return len(votes) > half
        if coordinator:
            followers = [k for k in fd_part if self.state.get(k, INITIAL_VIEW_STATE).prop_v == mine.prop_v]
            drifted = fd_part != mine.prop_v.members \
                or (mine.status is Status.MULTICAST and cur != self.view_conf)
            return drifted and len(followers) > half
        return False

    def _on_view_counter(self, result):
        self.inc_pending = False
        if result is None:
            return
        prop_v = View(result, self.recsa.part())
        self.state[self.me] = self.mine.evolve(status=Status.PROPOSE, prop_v=prop_v)
        self.events.append(('propose', {'prop_v': prop_v}))
        logger.debug("p%s proposes view %s", self.me, prop_v)

    def _in_unison(self, mine):
        def record(j):
            return self.state.get(j, INITIAL_VIEW_STATE)

        if mine.status is Status.MULTICAST:
            return all((record(j).view, record(j).status, record(j).rnd) == (mine.view, mine.status, mine.rnd)
                       for j in mine.view.members)
        if mine.status is Status.PROPOSE:
            return all((record(j).prop_v, record(j).status) == (mine.prop_v, Status.PROPOSE)
                       for j in mine.prop_v.members)
        return all((record(j).prop_v, record(j).view, record(j).status, record(j).rnd)
                   == (mine.prop_v, mine.view, mine.status, mine.rnd)
                   for j in mine.prop_v.members)

    def _coordinate(self, mine, cur, no_reco=True):
        if mine.status is Status.MULTICAST:
            if mine.reconf_ready:
                return mine
            replica = self.application.apply(mine.replica, mine.msg, (mine.view.id, mine.rnd))
            suspend = self.evaluate(cur) or not no_reco
            mine = mine.evolve(replica=replica, suspend=suspend)
            self.state[self.me] = mine
            ready = all(self.state.get(k, INITIAL_VIEW_STATE).suspend for k in mine.view.members)
            if ready:
                return mine.evolve(reconf_ready=True, msg=())
            value = None if suspend else self._fetch('coordinator', mine.view)
            msg = tuple((j, value if j == self.me else self.state.get(j, INITIAL_VIEW_STATE).input)
                        for j in sorted(mine.view.members))
            self.events.append(('round', {'view': mine.view, 'rnd': mine.rnd + 1}))
            return mine.evolve(input=value, msg=msg, rnd=mine.rnd + 1, reconf_ready=False)

        pool = [self.state[j] for j in sorted(mine.prop_v.members) if j in self.state]
        if mine.status is Status.PROPOSE:
            return mine.evolve(replica=self.application.synch_state(pool),
                               msg=self.application.synch_msgs(pool),
                               status=Status.INSTALL)
        return mine.evolve(view=mine.prop_v, status=Status.MULTICAST, rnd=0,
                           suspend=not no_reco, reconf_ready=False)

    def _keep_local(self, adopted, mine):
        return adopted.evolve(input=mine.input, no_crd=mine.no_crd, fd_part=mine.fd_part, crd=mine.crd)

    def _follow(self, mine, lead):
        if not (lead.rnd == 0 or mine.rnd < lead.rnd or lead.view != lead.prop_v):
            return mine
        if (mine.view, mine.status, mine.rnd, mine.prop_v) == (lead.view, lead.status, lead.rnd, lead.prop_v):
            return mine
        if lead.status is Status.MULTICAST:
            if mine.suspend:
                return mine
            adopted = self._keep_local(lead, mine)
            if not lead.suspend:
                adopted = adopted.evolve(input=self._fetch('follower', lead.view))
            return adopted
        if lead.status is Status.INSTALL:
            return self._keep_local(lead, mine).evolve(suspend=False, reconf_ready=False)
        return mine.evolve(status=Status.PROPOSE, prop_v=lead.prop_v)

    def _note_transitions(self, before, mine, cur):
        if mine.view != before.view:
            self.view_conf = cur
            self.events.append(('view-install', {
                'view': mine.view,
                'prev': before.view,
                'delivered': delivered_in(mine.replica, before.view.id) if before.view.id else (),
                'replica': mine.replica,
                'previous_replica': before.replica,
                'config': cur,
            }))
            logger.debug("p%s installs view %s", self.me, mine.view)
        if mine.suspend != before.suspend:
            self.events.append(('suspend', {'value': mine.suspend, 'view': mine.view}))
        if mine.reconf_ready and not before.reconf_ready:
            self.events.append(('reconf-ready', {'view': mine.view}))
        elif before.reconf_ready and not mine.reconf_ready and mine.view == before.view:
            self.events.append(('resume', {'view': mine.view}))

    def _send(self, mine, coordinator):
        targets = set(self.seem_crd)
        if coordinator:
            targets |= mine.prop_v.members
        if mine.no_crd or mine.status is Status.PROPOSE:
            targets |= set(self.recsa.trusted)
        return [Outgoing(k, 'vs', mine) for k in sorted(targets - {self.me})]

    def on_receive(self, j, state):
        self.state[j] = state

    def reset_vars(self):
        self.state = {self.me: INITIAL_VIEW_STATE}
        self.seem_crd = frozenset()
        self.val_crd = frozenset()
        self.inc_pending = False

    def init_vars(self, states):
        pool = [s for s in states.values() if isinstance(s, ViewState)]
        if not pool:
            return
        best = max(pool, key=lambda s: s.synch_key())
        self.state[self.me] = best.evolve(input=None, crd=None, no_crd=True,
                                          suspend=False, reconf_ready=False)

    def pass_query(self):
        crd = self.mine.crd
        if crd is not None and crd in self.state:
            return self.state[crd].admit
        return True

    def export_state(self):
        return self.mine

    def tainted(self):
        mine = self.mine
        return is_tainted(mine.replica) or is_tainted(mine.msg) or is_tainted((mine.input,))

    def corrupt(self, values, rng, universe):
        mine = self.mine
        if values is None:
            def view():
                label = EpochLabel(rng.choice(universe), rng.randrange(1, 50), frozenset([rng.randrange(1, 50)]))
                counter = CounterTriple(label, rng.randrange(0, 10), rng.choice(universe))
                return View(counter, frozenset(p for p in universe if rng.random() < 0.6))

            self.state[self.me] = mine.evolve(
                view=view(), prop_v=view(), status=rng.choice(list(Status)), rnd=rng.randrange(0, 5),
                replica=((TAINT, self.me),), input=(TAINT, self.me),
                no_crd=rng.random() < 0.5, suspend=rng.random() < 0.5, reconf_ready=rng.random() < 0.5)
            return
        changes = {}
        if values.get('taint'):
            changes.update(replica=mine.replica + ((TAINT, self.me),), input=(TAINT, self.me))
        for key in ('suspend', 'reconf_ready', 'no_crd', 'admit'):
            if key in values:
                changes[key] = bool(values[key])
        if changes:
            self.state[self.me] = mine.evolve(**changes)

    def snapshot(self):
        mine = self.mine
        return {
            'vs_view': mine.view,
            'vs_status': mine.status,
            'vs_rnd': mine.rnd,
            'vs_crd': mine.crd,
            'vs_suspend': mine.suspend,
            'vs_ready': mine.reconf_ready,
            'vs_replica': mine.replica,
        }
