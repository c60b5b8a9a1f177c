"""
Execution traces

Every simulation event is kept together with the snapshot of the processors
it changed, so checkers can replay the global state step by step without
re-running the simulation.
"""
import hashlib
from dataclasses import dataclass, field
from typing import Dict, FrozenSet

from utils.helpers import stable_digest

# Left out of record digests; they grow with the run and are covered by other records
BULKY_FIELDS = ('replica', 'previous_replica', 'delivered')

STATE_EVENTS = ('timer', 'receive')


@dataclass
class TraceEntry:
    event: object
    live: FrozenSet[int]
    updates: Dict[int, dict] = field(default_factory=dict)

    @property
    def step(self):
        return self.event.step

    @property
    def records(self):
        return self.event.data.get('records', ())


class Trace:

    def __init__(self, scenario):
        self.scenario = scenario
        self.initial = {}
        self.initial_live = frozenset()
        self.entries = []
        self._lines = None

    @property
    def budget(self):
        return self.scenario.step_budget

    @property
    def last_step(self):
        return self.entries[-1].step if self.entries else 0

    def capture_initial(self, simulation):
        self.initial = {pid: simulation.nodes[pid].snapshot() for pid in simulation.live}
        self.initial_live = frozenset(simulation.live)

    def listener(self, simulation):
        """Event listener bound to a simulation; snapshots whatever the event touched"""

        def on_event(event):
            live = frozenset(simulation.live)
            updates = {}
            if event.kind in STATE_EVENTS and event.pid in live:
                updates[event.pid] = simulation.nodes[event.pid].snapshot()
            elif event.kind == 'inject':
                updates = {pid: simulation.nodes[pid].snapshot() for pid in live}
            elif event.kind in ('join', 'estab-request', 'eval') and event.pid in live:
                updates[event.pid] = simulation.nodes[event.pid].snapshot()
            self.entries.append(TraceEntry(event, live, updates))
            self._lines = None

        return on_event

    def states(self):
        """
        Yield (entry, states) after every event.

        states maps each processor seen so far to its latest snapshot; the
        same dict is updated in place between yields.
        """
        states = dict(self.initial)
        for entry in self.entries:
            states.update(entry.updates)
            yield entry, states

    def steps(self):
        """Like states() but only for events that executed a scheduler step"""
        for entry, states in self.states():
            if entry.event.kind in ('timer', 'receive', 'noop', 'lost', 'discard'):
                yield entry, states

    def records(self, *kinds):
        """(step, pid, kind, data) for every protocol record, optionally filtered by kind"""
        for entry in self.entries:
            for kind, data in entry.records:
                if not kinds or kind in kinds:
                    yield entry.step, entry.event.pid, kind, data

    def events(self, *kinds):
        for entry in self.entries:
            if entry.event.kind in kinds:
                yield entry

    def crashed_by(self, step):
        return {e.event.pid for e in self.events('crash') if e.step <= step}

    def lines(self):
        if self._lines is None:
            lines = []
            for entry in self.entries:
                event = entry.event
                lines.append(event.to_line())
                for kind, data in entry.records:
                    digest = stable_digest({k: v for k, v in data.items() if k not in BULKY_FIELDS})
                    lines.append(f"{event.step}\t{event.pid}\t+{kind}\t{digest}")
            self._lines = lines
        return self._lines

    def window(self, step, radius=3):
        """Trace lines around a step, used as a counterexample slice"""
        return [line for line in self.lines()
                if step - radius <= int(line.split('\t', 1)[0]) <= step + radius]

    def digest(self):
        text = '\n'.join(self.lines()).encode('utf-8')
        return hashlib.sha256(text).hexdigest()

    def write(self, path):
        with open(path, 'w', encoding='utf-8') as handle:
            for line in self.lines():
                handle.write(line + '\n')

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        return f'<Trace {self.scenario.name}#{self.scenario.seed} {len(self.entries)} events>'
