"""
Scenario files: parsing and validation

A scenario is a YAML mapping. Errors carry the line of the offending entry.
"""
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import yaml

from harness.checkers import is_known
from netsim.channel import Adversary, DropPolicy
from netsim.simulation import ADMISSIBLE, UNRELIABLE
from protocols.node import ALL_LAYERS
from protocols.recma import Prediction
from utils.helpers import (ScenarioError, validate_positive_int, validate_probability,
                           validate_processor_ids)

logger = logging.getLogger(__name__)

LINE = '__line__'

TOP_LEVEL_KEYS = {
    'name', 'description', 'processors', 'N', 'cap', 'seed', 'step_budget', 'fairness_window',
    'timer_probability', 'fd', 'fd_schedule', 'gap_factor', 'counter_bits', 'layers', 'adversary',
    'initial', 'prediction', 'events', 'workload', 'inputs', 'checkers', 'expect',
}
ACTIONS = ('inject', 'crash', 'join', 'estab', 'eval', 'increment', 'fd')
INITIAL_MODES = ('converged', 'arbitrary', 'boot')


class LineLoader(yaml.SafeLoader):
    """SafeLoader that records the line of every mapping under '__line__'"""

    def construct_mapping(self, node, deep=False):
        mapping = super().construct_mapping(node, deep=deep)
        mapping[LINE] = node.start_mark.line + 1
        return mapping


def strip_lines(value):
    if isinstance(value, dict):
        return {k: strip_lines(v) for k, v in value.items() if k != LINE}
    if isinstance(value, list):
        return [strip_lines(v) for v in value]
    return value


@dataclass(frozen=True)
class ScriptEvent:
    step: int
    action: str
    target: object
    line: int = 0


@dataclass(frozen=True)
class IncrementWorkload:
    every: int
    nodes: Tuple[int, ...]
    start: int = 0
    stop: Optional[int] = None


@dataclass
class Scenario:
    name: str
    processors: List[int]
    joiners: List[int]
    n_bound: int
    cap: int
    seed: int
    step_budget: int
    fairness_window: int
    timer_probability: float
    fd_mode: str
    gap_factor: float
    counter_bits: int
    layers: Tuple[str, ...]
    adversary: Adversary
    initial: object
    prediction: str
    events: List[ScriptEvent] = field(default_factory=list)
    workload: Optional[IncrementWorkload] = None
    inputs: Dict[int, list] = field(default_factory=dict)
    auto_inputs: bool = True
    checkers: List[str] = field(default_factory=list)
    expect: dict = field(default_factory=dict)
    description: str = ''

    @property
    def initial_processors(self):
        return [p for p in self.processors if p not in self.joiners]

    def with_overrides(self, seed=None, step_budget=None, checkers=None):
        """Copy of the scenario with command-line overrides applied"""
        changes = {}
        if seed is not None:
            changes['seed'] = seed
        if step_budget is not None:
            changes['step_budget'] = step_budget
        if checkers is not None:
            changes['checkers'] = list(checkers)
        return replace(self, **changes)


def _check(result, line):
    ok, message = result
    if not ok:
        raise ScenarioError(message, line)


def _pid(value, declared, line, what='processor'):
    if value not in declared:
        raise ScenarioError(f"{what} {value!r} is not declared in processors", line)
    return value


def _pids(values, declared, line):
    if values == 'all':
        return tuple(declared)
    if not isinstance(values, list):
        raise ScenarioError("expected a list of processors or 'all'", line)
    return tuple(_pid(v, declared, line) for v in values)


def load_scenario(path, settings=None):
    """Read and validate a scenario file; settings is a loaded configuration profile dict"""
    try:
        with open(path, encoding='utf-8') as handle:
            text = handle.read()
    except OSError as e:
        raise ScenarioError(f"cannot read scenario '{path}': {e}")
    name = os.path.splitext(os.path.basename(path))[0]
    return parse_scenario(text, name=name, settings=settings)


def parse_scenario(text, name='inline', settings=None):
    try:
        data = yaml.load(text, Loader=LineLoader)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        raise ScenarioError(f"invalid YAML: {getattr(e, 'problem', e)}",
                            mark.line + 1 if mark is not None else None)
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping", 1)

    if settings is None:
        from config import config
        settings = {k: getattr(config['default'], k) for k in dir(config['default']) if k.isupper()}

    top = data.get(LINE, 1)
    unknown = sorted(k for k in data if k != LINE and k not in TOP_LEVEL_KEYS)
    if unknown:
        raise ScenarioError(f"unknown scenario key '{unknown[0]}'", top)

    processors = data.get('processors')
    _check(validate_processor_ids(processors), top)

    n_bound = data.get('N', len(processors))
    cap = data.get('cap', settings['DEFAULT_CAP'])
    seed = data.get('seed', 0)
    step_budget = data.get('step_budget', settings['DEFAULT_STEP_BUDGET'])
    fairness_window = data.get('fairness_window', settings['DEFAULT_FAIRNESS_WINDOW'])
    counter_bits = data.get('counter_bits', settings['COUNTER_BITS'])
    for knob, value in (('N', n_bound), ('cap', cap), ('step_budget', step_budget),
                        ('fairness_window', fairness_window), ('counter_bits', counter_bits)):
        _check(validate_positive_int(knob, value), top)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioError("seed must be an integer", top)
    if len(processors) > n_bound:
        logger.info("scenario %s declares %s processors for N=%s", name, len(processors), n_bound)

    timer_probability = data.get('timer_probability', settings['TIMER_PROBABILITY'])
    _check(validate_probability('timer_probability', timer_probability), top)
    gap_factor = data.get('gap_factor', settings['GAP_FACTOR'])
    if not isinstance(gap_factor, (int, float)) or gap_factor <= 1:
        raise ScenarioError("gap_factor must be a number greater than 1", top)

    fd_mode = data.get('fd', ADMISSIBLE)
    if fd_mode not in (ADMISSIBLE, UNRELIABLE):
        raise ScenarioError(f"fd must be '{ADMISSIBLE}' or '{UNRELIABLE}'", top)

    layers = data.get('layers', list(ALL_LAYERS))
    if not isinstance(layers, list) or any(layer not in ALL_LAYERS for layer in layers):
        raise ScenarioError(f"layers must be a list drawn from {', '.join(ALL_LAYERS)}", top)
    if 'recsa' not in layers:
        layers = ['recsa'] + layers

    prediction = data.get('prediction', 'off')
    _policy(prediction, top)

    scenario = Scenario(
        name=data.get('name', name),
        description=data.get('description', ''),
        processors=list(processors),
        joiners=[],
        n_bound=n_bound,
        cap=cap,
        seed=seed,
        step_budget=step_budget,
        fairness_window=fairness_window,
        timer_probability=float(timer_probability),
        fd_mode=fd_mode,
        gap_factor=float(gap_factor),
        counter_bits=counter_bits,
        layers=tuple(layers),
        adversary=_adversary(data.get('adversary'), top),
        initial=_initial(data.get('initial', 'converged'), processors, top),
        prediction=prediction,
    )

    events = [_event(entry, scenario) for entry in data.get('events') or []]
    for previous, current in zip(events, events[1:]):
        if current.step < previous.step:
            raise ScenarioError(f"events must be sorted by step ({current.step} after {previous.step})",
                                current.line)
    for entry in data.get('fd_schedule') or []:
        line = entry.get(LINE, top) if isinstance(entry, dict) else top
        if not isinstance(entry, dict) or entry.get('mode') not in (ADMISSIBLE, UNRELIABLE):
            raise ScenarioError("fd_schedule entries need 'at' and a valid 'mode'", line)
        events.append(ScriptEvent(_step(entry, line), 'fd', entry['mode'], line))
    scenario.events = sorted(events, key=lambda e: e.step)
    scenario.joiners = sorted({e.target for e in scenario.events if e.action == 'join'})
    if not scenario.initial_processors:
        raise ScenarioError("every declared processor joins later; nobody starts", top)

    scenario.workload = _workload(data.get('workload'), processors, top)
    scenario.inputs, scenario.auto_inputs = _inputs(data.get('inputs'), processors, top)
    scenario.checkers = _checkers(data.get('checkers'), top)
    scenario.expect = strip_lines(data.get('expect') or {})
    return scenario


def _policy(policy, line):
    try:
        Prediction(policy)
    except (ValueError, AttributeError) as e:
        raise ScenarioError(str(e), line)


def _adversary(spec, line):
    if spec is None:
        return Adversary()
    if not isinstance(spec, dict):
        raise ScenarioError("adversary must be a mapping", line)
    line = spec.get(LINE, line)
    try:
        policy = DropPolicy(spec.get('policy', DropPolicy.DROP_OLD.value))
    except ValueError:
        raise ScenarioError(f"unknown drop policy {spec.get('policy')!r}", line)
    window = spec.get('reorder_window', 1)
    _check(validate_positive_int('reorder_window', window), line)
    loss = spec.get('loss', 0.0)
    duplication = spec.get('duplication', 0.0)
    _check(validate_probability('loss', loss), line)
    _check(validate_probability('duplication', duplication), line)
    return Adversary(policy, window, float(loss), float(duplication))


def _initial(spec, processors, line):
    if isinstance(spec, str):
        if spec not in INITIAL_MODES:
            raise ScenarioError(f"initial must be one of {', '.join(INITIAL_MODES)} or a mapping", line)
        return spec
    if isinstance(spec, dict) and 'config' in spec:
        members = spec['config']
        if not isinstance(members, list) or not members:
            raise ScenarioError("initial config must be a non-empty list", spec.get(LINE, line))
        for pid in members:
            _pid(pid, processors, spec.get(LINE, line))
        return {'config': frozenset(members)}
    raise ScenarioError("initial must be one of converged, arbitrary, boot or {config: [...]}", line)


def _step(entry, line):
    step = entry.get('at')
    if isinstance(step, bool) or not isinstance(step, int) or step < 0:
        raise ScenarioError("event needs a non-negative integer 'at'", line)
    return step


def _event(entry, scenario):
    if not isinstance(entry, dict):
        raise ScenarioError("events must be mappings", None)
    line = entry.get(LINE)
    step = _step(entry, line)
    actions = [k for k in entry if k in ACTIONS]
    extra = [k for k in entry if k not in ACTIONS and k not in ('at', LINE)]
    if len(actions) != 1 or extra:
        raise ScenarioError(f"event needs exactly one of {', '.join(ACTIONS)}", line)
    action = actions[0]
    value = entry[action]
    declared = scenario.processors

    if action == 'crash':
        if value != 'coordinator':
            _pid(value, declared, line)
        return ScriptEvent(step, action, value, line)
    if action == 'join':
        return ScriptEvent(step, action, _pid(value, declared, line), line)
    if action == 'fd':
        if value not in (ADMISSIBLE, UNRELIABLE):
            raise ScenarioError(f"fd must be '{ADMISSIBLE}' or '{UNRELIABLE}'", line)
        return ScriptEvent(step, action, value, line)
    if not isinstance(value, dict):
        raise ScenarioError(f"'{action}' takes a mapping", line)
    inner = value.get(LINE, line)
    if action == 'estab':
        node = _pid(value.get('node'), declared, inner)
        members = value.get('set')
        if not isinstance(members, list) or not members:
            raise ScenarioError("estab needs a non-empty 'set'", inner)
        return ScriptEvent(step, action, (node, frozenset(_pid(p, declared, inner) for p in members)), line)
    if action == 'eval':
        policy = value.get('policy', 'off')
        _policy(policy, inner)
        return ScriptEvent(step, action, (_pids(value.get('nodes', 'all'), declared, inner), policy), line)
    if action == 'increment':
        node = _pid(value.get('node'), declared, inner)
        count = value.get('count', 1)
        _check(validate_positive_int('count', count), inner)
        return ScriptEvent(step, action, (node, count), line)
    return ScriptEvent(step, action, _injection(value, declared, scenario.cap, inner), line)


def _injection(spec, declared, cap, line):
    spec = strip_lines(spec)
    nodes = spec.get('nodes') or {}
    for pid in nodes:
        _pid(pid, declared, line)
    randomize = spec.get('randomize')
    if randomize not in (None, True, False):
        _pids(randomize, declared, line)
    for entry in spec.get('channels') or []:
        _pid(entry.get('src'), declared, line)
        _pid(entry.get('dst'), declared, line)
        count = entry.get('count', 1)
        _check(validate_positive_int('count', count), line)
        if count > cap:
            raise ScenarioError(f"channel {entry['src']}->{entry['dst']} cannot hold {count} packets (cap {cap})",
                                line)
    return spec


def _workload(spec, processors, line):
    if not spec:
        return None
    increments = spec.get('increments') if isinstance(spec, dict) else None
    if not isinstance(increments, dict):
        raise ScenarioError("workload needs an 'increments' mapping", line)
    inner = increments.get(LINE, line)
    every = increments.get('every')
    _check(validate_positive_int('every', every), inner)
    nodes = _pids(increments.get('nodes', 'all'), processors, inner)
    return IncrementWorkload(every, nodes, increments.get('start', 0), increments.get('stop'))


def _inputs(spec, processors, line):
    if spec is None:
        return {}, True
    if not isinstance(spec, dict):
        raise ScenarioError("inputs must be a mapping", line)
    auto = bool(spec.get('auto', True))
    scripts = {}
    for pid, values in spec.items():
        if pid in ('auto', LINE):
            continue
        _pid(pid, processors, spec.get(LINE, line))
        if not isinstance(values, list):
            raise ScenarioError(f"inputs for {pid} must be a list", spec.get(LINE, line))
        scripts[pid] = list(values)
    return scripts, auto


def _checkers(spec, line):
    if spec is None:
        return []
    if not isinstance(spec, list):
        raise ScenarioError("checkers must be a list", line)
    for name in spec:
        if not is_known(name):
            raise ScenarioError(f"unknown checker '{name}'", line)
    return list(spec)
