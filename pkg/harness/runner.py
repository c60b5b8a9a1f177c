"""
Scenario runner: composes the nodes, drives the simulation through the
scenario script and evaluates the selected checkers on the finished trace
"""
import logging
import time
from collections import deque
from dataclasses import dataclass, field

from harness import golden
from harness.checkers import Verdict, check_all
from harness.trace import Trace
from netsim.schedule import Schedule
from netsim.simulation import Simulation
from protocols.node import Node, NodeSettings
from utils.helpers import FaultSpecError

logger = logging.getLogger(__name__)

DEFAULT_CHECKERS = ('occupancy', 'no-fabrication', 'fairness', 'convergence')


@dataclass
class RunResult:
    scenario: object
    trace: Trace
    verdicts: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self):
        return all(v.passed for v in self.verdicts)

    @property
    def digest(self):
        return self.trace.digest()

    @property
    def steps(self):
        return self.trace.last_step

    def verdict(self, name):
        return next((v for v in self.verdicts if v.name == name), None)

    def measures(self):
        return golden.collect_measures(self.verdicts)

    def to_dict(self):
        return {
            'scenario': self.scenario.name,
            'seed': self.scenario.seed,
            'passed': self.passed,
            'steps': self.steps,
            'trace_digest': self.digest,
            'elapsed': round(self.elapsed, 3),
            'verdicts': [v.to_dict() for v in self.verdicts],
        }


class ScenarioRunner:

    def __init__(self, scenario):
        self.scenario = scenario
        self.simulation = None

    def settings(self):
        s = self.scenario
        return NodeSettings(
            n_bound=s.n_bound,
            cap=s.cap,
            gap_factor=s.gap_factor,
            counter_bits=s.counter_bits,
            layers=s.layers,
            prediction=s.prediction,
            script=s.inputs,
            auto_inputs=s.auto_inputs,
        )

    def build(self):
        s = self.scenario
        settings = self.settings()
        schedule = Schedule(s.seed, s.step_budget, s.fairness_window, s.timer_probability)
        sim = Simulation(schedule, s.cap, lambda pid: Node(pid, settings), s.adversary, s.fd_mode)
        for pid in s.initial_processors:
            sim.add_processor(pid)
        self.simulation = sim
        return sim

    def execute(self):
        """Run the scenario once and return its trace"""
        s = self.scenario
        sim = self.build()
        trace = Trace(s)
        self._initialize(sim)
        trace.capture_initial(sim)
        sim.listeners.append(trace.listener(sim))
        if s.initial == 'arbitrary':
            sim.inject_transient_fault({'randomize': True, 'fill_channels': True})

        script = deque(s.events)
        while sim.step_no < s.step_budget:
            while script and script[0].step <= sim.step_no:
                self._apply(sim, script.popleft())
            self._workload(sim)
            sim.step()
        for event in script:
            logger.info("event '%s' at step %s lies beyond the budget", event.action, event.step)
        return trace

    def _initialize(self, sim):
        initial = self.scenario.initial
        if initial == 'converged':
            members = sorted(sim.live)
        elif isinstance(initial, dict):
            members = sorted(initial['config'])
        else:
            if initial == 'boot':
                for pid in sim.live:
                    sim.nodes[pid].recsa.participate()
            return
        for pid in sim.live:
            sim.nodes[pid].recsa.corrupt({'config': {k: members for k in sim.live}}, sim.rng, sim.live)

    def _apply(self, sim, event):
        handler = getattr(self, '_on_' + event.action)
        try:
            handler(sim, event.target)
        except FaultSpecError as e:
            raise FaultSpecError(f"line {event.line}: {e}") from e

    def _node(self, sim, pid, action):
        if pid not in sim.nodes or pid in sim.crashed:
            logger.info("%s skipped: processor %s is not live at step %s", action, pid, sim.step_no)
            return None
        return sim.nodes[pid]

    def _on_inject(self, sim, spec):
        sim.inject_transient_fault(spec)

    def _on_crash(self, sim, target):
        if target == 'coordinator':
            target = self.coordinator(sim)
            if target is None:
                logger.info("no coordinator to crash at step %s", sim.step_no)
                sim.annotate('*', 'crash-skipped', {'target': 'coordinator'})
                return
        if self._node(sim, target, 'crash') is not None:
            sim.crash(target)

    def _on_join(self, sim, pid):
        if pid in sim.nodes:
            logger.info("join skipped: processor %s already registered", pid)
            return
        sim.join(pid)

    def _on_estab(self, sim, target):
        pid, members = target
        node = self._node(sim, pid, 'estab')
        if node is not None:
            accepted = node.recsa.estab(members)
            sim.annotate(pid, 'estab-request', {'value': sorted(members), 'accepted': accepted})

    def _on_eval(self, sim, target):
        pids, policy = target
        for pid in pids:
            node = self._node(sim, pid, 'eval')
            if node is not None:
                node.set_prediction(policy)
                sim.annotate(pid, 'eval', {'policy': policy})

    def _on_increment(self, sim, target):
        pid, count = target
        node = self._node(sim, pid, 'increment')
        if node is not None:
            for _ in range(count):
                node.request_increment(('script', sim.step_no))
            sim.annotate(pid, 'increment-request', {'count': count})

    def _on_fd(self, sim, mode):
        sim.set_fd_mode(mode)
        sim.annotate('*', 'fd', {'mode': mode})

    def _workload(self, sim):
        workload = self.scenario.workload
        if workload is None or sim.step_no < workload.start:
            return
        if workload.stop is not None and sim.step_no >= workload.stop:
            return
        if (sim.step_no - workload.start) % workload.every:
            return
        for pid in workload.nodes:
            node = sim.nodes.get(pid)
            # closed loop: a caller asks again once its previous increment has finished
            if node is not None and pid not in sim.crashed and not node.counter_busy():
                node.request_increment('workload')

    @staticmethod
    def coordinator(sim):
        """The live processor currently holding itself as the only valid coordinator"""
        for pid in sim.live:
            vs = sim.nodes[pid].vs
            if vs is not None and vs.val_crd == frozenset([pid]):
                return pid
        return None


def replay_verdict(first, second):
    if first.digest() == second.digest():
        return Verdict('determinism', True, measures={'trace_lines': len(first.lines())})
    lines_a, lines_b = first.lines(), second.lines()
    index = next((i for i, (a, b) in enumerate(zip(lines_a, lines_b)) if a != b), min(len(lines_a), len(lines_b)))
    step = int((lines_a[index] if index < len(lines_a) else lines_b[index]).split('\t', 1)[0])
    return Verdict('determinism', False, witness={
        'step': step, 'reason': 'replay diverged',
        'first': lines_a[index:index + 3], 'second': lines_b[index:index + 3]})


def run_scenario(scenario, checkers=None, replay=False, db=None, bless=False):
    """
    Execute a scenario and evaluate its checkers

    Args:
        scenario (Scenario): Parsed scenario
        checkers (list): Checker names; defaults to the scenario's selection
        replay (bool): Run a second time and add a determinism verdict
        db: Database used for golden values (None skips them)
        bless (bool): Store the measured golden values instead of comparing

    Returns:
        RunResult
    """
    names = list(checkers or scenario.checkers or DEFAULT_CHECKERS)
    logger.info("running %s seed=%s budget=%s", scenario.name, scenario.seed, scenario.step_budget)
    started = time.perf_counter()
    trace = ScenarioRunner(scenario).execute()
    elapsed = time.perf_counter() - started

    verdicts = check_all(trace, names)
    if replay or 'determinism' in names:
        verdicts.append(replay_verdict(trace, ScenarioRunner(scenario).execute()))
    result = RunResult(scenario, trace, verdicts, elapsed)

    if db is not None and bless:
        golden.bless(db, scenario, result.measures())
    elif db is not None and 'golden' in names:
        verdicts.append(golden.compare(db, scenario, result.measures()))

    logger.info("%s seed=%s finished in %.2fs: %s", scenario.name, scenario.seed, elapsed,
                'pass' if result.passed else 'fail')
    return result
