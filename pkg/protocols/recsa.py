"""
Reconfiguration stability assurance

Keeps every participant's view of the current configuration consistent:
detects stale information, resets the configuration by brute force when it
is found, and replaces the configuration on request through a three-phase
automaton driven by proposals ⟨phase, set⟩.
"""
import logging
from dataclasses import dataclass
from typing import FrozenSet, Optional

from ordered_set import OrderedSet

from models.types import BOTTOM, DEFAULT_PROPOSAL, HASH, Proposal, as_config, describe, is_set, value_key
from netsim.datalink import Outgoing

logger = logging.getLogger(__name__)

TYPE1 = 'type1'
TYPE2 = 'type2'
TYPE3 = 'type3'
TYPE4 = 'type4'


@dataclass(frozen=True)
class FdView:
    trusted: FrozenSet[int]
    part: FrozenSet[int]


@dataclass(frozen=True)
class EchoTriple:
    """What a peer last heard from us: our participant set, proposal and all flag"""
    part: FrozenSet[int]
    prp: Proposal
    all: bool


@dataclass(frozen=True)
class RecsaMessage:
    fd: FdView
    config: object
    prp: Proposal
    all: bool
    echo: Optional[EchoTriple]


def increment(phase):
    return {0: 0, 1: 2, 2: 0}[phase]


class Recsa:

    def __init__(self, me):
        self.me = me
        self.boot()

    def boot(self):
        self.config = {}
        self.fd = {}
        self.prp = {}
        self.all = {}
        self.echo = {}
        self.all_seen = set()
        self.trusted = OrderedSet([self.me])
        self.events = []

    def cfg(self, k):
        return self.config.get(k, HASH)

    def proposal(self, k):
        return self.prp.get(k, DEFAULT_PROPOSAL)

    def is_participant(self):
        return self.cfg(self.me) is not HASH

    def part(self):
        return frozenset(k for k in self.trusted if self.cfg(k) is not HASH)

    def degree(self, k):
        return 2 * self.proposal(k).phase + (1 if self.all.get(k, False) else 0)

    def config_set(self, value, cause):
        for k in set(self.config) | set(self.trusted):
            self.config[k] = value
            self.prp[k] = DEFAULT_PROPOSAL
        self.all_seen.clear()
        self.all[self.me] = False
        self._emit('config-set', value=value, cause=cause)
        logger.debug("p%s configSet(%s) cause=%s", self.me, describe(value), cause)

    def _emit(self, kind, **data):
        self.events.append((kind, data))

    def max_ntf(self):
        proposals = [self.proposal(k) for k in self.part()]
        proposals = [p for p in proposals if not p.is_default]
        if not proposals:
            return BOTTOM
        return max(proposals, key=Proposal.key)

    def _config_values(self):
        return {self.cfg(k) for k in self.trusted} - {HASH}

    def no_reco(self):
        """True iff no reconfiguration is taking place, as far as p_i can tell"""
        part = self.part()
        others = part - {self.me}
        for k in others:
            view = self.fd.get(k)
            if view is None or self.me not in view.trusted or view.part != part:
                return False
            if self.is_participant():
                echo = self.echo.get(k)
                if echo is None or echo.part != part:
                    return False
        values = self._config_values()
        if len(values) > 1 or BOTTOM in values:
            return False
        return all(self.proposal(k).is_default for k in self.trusted)

    def chs_config(self):
        values = self._config_values()
        if not values:
            return BOTTOM
        return min(values, key=value_key)

    def get_config(self):
        if self.no_reco():
            return self.chs_config()
        return self.cfg(self.me)

    def _same(self, k, part):
        view = self.fd.get(k)
        return view is not None and view.part == part and self.proposal(k) == self.proposal(self.me)

    def _echo_no_all(self, k, part):
        echo = self.echo.get(k)
        return echo is not None and echo.part == part and echo.prp == self.proposal(self.me)

    def _echo(self, part):
        mine = EchoTriple(part, self.proposal(self.me), self.all.get(self.me, False))
        return all(self.echo.get(k) == mine for k in part - {self.me})

    def detect_stale(self):
        part = self.part()
        found = set()

        if any(self.proposal(k).phase == 0 and self.proposal(k).value is not BOTTOM
               for k in self.trusted):
            found.add(TYPE1)

        values = self._config_values()
        if any(v is BOTTOM or v == frozenset() for v in values):
            found.add(TYPE2)
        elif len(values) > 1 and self.max_ntf() is BOTTOM:
            found.add(TYPE2)

        if self.is_participant():
            active = [k for k in part if not self.proposal(k).is_default]
            if not self.proposal(self.me).is_default:
                # peers are compared with p_i only; their stored records may lag
                own_degree = self.degree(self.me)
                if any(abs(self.degree(k) - own_degree) > 1 for k in active):
                    found.add(TYPE3)
            mine = self.proposal(self.me).phase
            for k in active:
                if self.proposal(k).phase == mine + 1 and mine + 1 in (1, 2) \
                        and not self.proposal(self.me).is_default and k not in self.all_seen:
                    found.add(TYPE3)
            notif = {self.proposal(k).value for k in active} - {BOTTOM}
            if len(notif) > 1 and any(self.proposal(k).phase == 2 for k in active):
                found.add(TYPE3)

            own = self.cfg(self.me)
            view = FdView(frozenset(self.trusted), part)
            if is_set(own) and not own & part \
                    and all(self.fd.get(k) == view for k in part - {self.me}):
                found.add(TYPE4)
        return found

    def estab(self, value):
        value = as_config(value)
        if not is_set(value) or not value or value == self.cfg(self.me) or not self.no_reco():
            return False
        self.prp[self.me] = Proposal(1, value)
        self.all[self.me] = False
        self.all_seen.clear()
        self._emit('estab', value=value)
        logger.debug("p%s estab(%s)", self.me, describe(value))
        return True

    def participate(self):
        if not self.no_reco():
            return False
        self.config[self.me] = self.chs_config()
        self._emit('participate', value=self.config[self.me])
        logger.debug("p%s participates with %s", self.me, describe(self.config[self.me]))
        return True

    def on_receive(self, j, message):
        self.fd[j] = message.fd
        self.config[j] = message.config
        self.prp[j] = message.prp
        self.all[j] = message.all
        self.echo[j] = message.echo
        if message.all and message.fd.part == self.part() and message.prp == self.proposal(self.me):
            self.all_seen.add(j)

    def loop(self, trusted):
        """One iteration of the do-forever loop; returns the outgoing messages"""
        self.trusted = OrderedSet(trusted)
        if self.me not in self.trusted:
            self.trusted = OrderedSet([self.me] + list(self.trusted))

        part = self.part()
        for k in list(self.config) + list(self.prp):
            if k not in part:
                self.config[k] = HASH
                self.prp[k] = DEFAULT_PROPOSAL
        self.fd[self.me] = FdView(frozenset(self.trusted), part)

        stale = self.detect_stale()
        if stale:
            self.config_set(BOTTOM, cause='stale:' + ','.join(sorted(stale)))

        if self.max_ntf() is BOTTOM:
            if len(self._config_values() - {BOTTOM}) > 1:
                self.config_set(BOTTOM, cause='conflict')
            if self.cfg(self.me) is BOTTOM and all(
                    k in self.fd and self.fd[k].trusted == frozenset(self.trusted) for k in self.trusted):
                self.config_set(frozenset(self.trusted), cause='restart')
        elif self.is_participant():
            self._delicate_step()

        part = self.part()
        self.fd[self.me] = FdView(frozenset(self.trusted), part)
        if not self.is_participant():
            return []
        message_base = (self.fd[self.me], self.cfg(self.me), self.proposal(self.me), self.all.get(self.me, False))
        outgoing = []
        for k in self.trusted:
            if k == self.me:
                continue
            view = self.fd.get(k)
            echo = EchoTriple(view.part if view else frozenset(), self.proposal(k), self.all.get(k, False))
            outgoing.append(Outgoing(k, 'recsa', RecsaMessage(*message_base, echo)))
        return outgoing

    def _delicate_step(self):
        me = self.me
        part = self.part()
        others = part - {me}
        before = self.proposal(me)

        if all(self._echo_no_all(k, part) and self._same(k, part) for k in others):
            self.all[me] = True
        for k in others:
            if self._same(k, part) and self.all.get(k, False):
                self.all_seen.add(k)
        if self.all.get(me, False):
            self.all_seen.add(me)

        phase = before.phase
        if self._echo(part) and self.all_seen >= part:
            phase = increment(phase)
            if phase == 2:
                self.prp[me] = Proposal(2, before.value)
            elif phase == 0:
                self.prp[me] = DEFAULT_PROPOSAL
            self.all_seen.clear()
            self.all[me] = False

        notification = self.max_ntf()
        if phase == 0:
            if notification is not BOTTOM and notification.phase == 1:
                self.prp[me] = notification
            else:
                self.prp[me] = DEFAULT_PROPOSAL
        elif phase == 1:
            if notification.phase == 1:
                self.prp[me] = notification
        else:
            target = self.proposal(me).value
            if self.cfg(me) != target:
                self.config[me] = target
                self._emit('config-install', value=target)
                logger.debug("p%s installs configuration %s", me, describe(target))

        after = self.proposal(me)
        if after != before:
            self.all[me] = False
            self.all_seen.clear()
            self._emit('phase', prp=after)

    def corrupt(self, values, rng, universe):
        """Overwrite variables with the given values, or with random type-correct ones"""
        if values is None:
            self._randomize(rng, universe)
            return
        if 'config' in values:
            spec = values['config']
            if isinstance(spec, dict):
                for k, v in spec.items():
                    self.config[k] = as_config(v)
            else:
                self.config[self.me] = as_config(spec)
        if 'prp' in values:
            for k, (phase, value) in values['prp'].items():
                self.prp[k] = Proposal(int(phase), as_config(value))
        if 'all' in values:
            for k, flag in values['all'].items():
                self.all[k] = bool(flag)
        if 'fd' in values:
            for k, view in values['fd'].items():
                self.fd[k] = FdView(frozenset(view['trusted']), frozenset(view.get('part', ())))
        if 'all_seen' in values:
            self.all_seen = set(values['all_seen'])

    def _randomize(self, rng, universe):
        def subset():
            return frozenset(p for p in universe if rng.random() < 0.5)

        def any_value(allow_hash):
            choices = ['set', 'set', 'bottom', 'empty'] + (['hash'] if allow_hash else [])
            kind = rng.choice(choices)
            return {'set': subset(), 'bottom': BOTTOM, 'empty': frozenset(), 'hash': HASH}[kind]

        def any_proposal():
            phase = rng.randrange(3)
            return Proposal(phase, rng.choice([subset(), BOTTOM]))

        for k in universe:
            self.config[k] = any_value(allow_hash=k != self.me)
            self.prp[k] = any_proposal()
            self.all[k] = rng.random() < 0.5
            if k != self.me:
                self.fd[k] = FdView(subset(), subset())
                self.echo[k] = EchoTriple(subset(), any_proposal(), rng.random() < 0.5)
        self.all_seen = set(subset())

    def snapshot(self):
        return {
            'participant': self.is_participant(),
            'config': self.cfg(self.me),
            'prp': self.proposal(self.me),
            'degree': self.degree(self.me),
            'stale': frozenset(self.detect_stale()),
            'no_reco': self.no_reco(),
            'part': self.part(),
        }
