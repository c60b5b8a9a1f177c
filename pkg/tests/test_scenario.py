import os

import pytest

from harness.scenario import load_scenario
from netsim.channel import DropPolicy
from utils.helpers import ScenarioError

SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'scenarios')


def test_minimal_scenario_defaults(make_scenario):
    scenario = make_scenario("""
        processors: [1, 2, 3]
    """)
    assert scenario.n_bound == 3
    assert scenario.initial == 'converged'
    assert scenario.layers[0] == 'recsa'
    assert scenario.events == [] and scenario.joiners == []
    assert scenario.adversary.policy is DropPolicy.DROP_OLD


def test_full_scenario(make_scenario):
    scenario = make_scenario("""
        processors: [1, 2, 3, 4]
        N: 5
        cap: 1
        seed: 9
        step_budget: 3000
        layers: [recma, counter]
        adversary: {policy: drop-new, reorder_window: 2, loss: 0.1}
        initial: {config: [1, 2, 3]}
        prediction: 'fraction:0.5'
        events:
          - at: 10
            crash: coordinator
          - at: 20
            join: 4
          - at: 30
            estab: {node: 1, set: [1, 2]}
          - at: 40
            eval: {nodes: [1, 2], policy: drift}
          - at: 50
            increment: {node: 2, count: 3}
          - at: 60
            inject: {nodes: {1: {config: [1]}}, channels: [{src: 1, dst: 2, count: 1}]}
        workload:
          increments: {every: 10, nodes: [1, 2]}
        inputs: {1: [a, b], auto: false}
        checkers: [convergence, determinism]
        expect: {config: trusted}
    """)
    assert scenario.layers == ('recsa', 'recma', 'counter')
    assert scenario.joiners == [4]
    assert scenario.initial_processors == [1, 2, 3]
    assert scenario.initial == {'config': frozenset({1, 2, 3})}
    assert [e.action for e in scenario.events] == ['crash', 'join', 'estab', 'eval', 'increment', 'inject']
    assert scenario.events[2].target == (1, frozenset({1, 2}))
    assert scenario.events[3].target == ((1, 2), 'drift')
    assert scenario.events[4].target == (2, 3)
    assert scenario.events[5].target['nodes'] == {1: {'config': [1]}}
    assert scenario.workload.every == 10 and scenario.workload.nodes == (1, 2)
    assert scenario.inputs == {1: ['a', 'b']} and scenario.auto_inputs is False
    assert scenario.expect == {'config': 'trusted'}
    assert scenario.adversary.policy is DropPolicy.DROP_NEW


def test_undeclared_node_reports_line(make_scenario):
    with pytest.raises(ScenarioError) as excinfo:
        make_scenario("""
            processors: [1, 2, 3]
            events:
              - at: 10
                crash: 4
        """)
    assert excinfo.value.line == 4
    assert 'not declared' in str(excinfo.value)


def test_unsorted_events(make_scenario):
    with pytest.raises(ScenarioError) as excinfo:
        make_scenario("""
            processors: [1, 2, 3]
            events:
              - at: 20
                crash: 3
              - at: 10
                crash: 2
        """)
    assert excinfo.value.line == 6


def test_fd_schedule_merges_into_events(make_scenario):
    scenario = make_scenario("""
        processors: [1, 2, 3]
        events:
          - at: 50
            crash: 3
        fd_schedule:
          - {at: 10, mode: unreliable}
          - {at: 100, mode: admissible}
    """)
    assert [(e.step, e.action) for e in scenario.events] == [(10, 'fd'), (50, 'crash'), (100, 'fd')]


@pytest.mark.parametrize('text, message', [
    ("processors: [1, 2]\ncolour: blue\n", "unknown scenario key 'colour'"),
    ("processors: []\n", "processors must be a non-empty list"),
    ("processors: [1, 2]\ncap: 0\n", "cap must be positive"),
    ("processors: [1, 2]\ninitial: sideways\n", "initial must be one of"),
    ("processors: [1, 2]\nprediction: sometimes\n", "unknown prediction policy"),
    ("processors: [1, 2]\ncheckers: [telepathy]\n", "unknown checker 'telepathy'"),
    ("processors: [1, 2]\nadversary: {loss: 2}\n", "loss must lie in [0, 1]"),
    ("processors: [1, 2]\nevents:\n  - at: 1\n    crash: 1\n    join: 2\n", "exactly one of"),
    ("processors: [1, 2]\nevents:\n  - at: 1\n    join: 1\n  - at: 2\n    join: 2\n", "nobody starts"),
    ("processors: [1, 2]\nevents:\n  - at: 1\n    inject: {channels: [{src: 1, dst: 2, count: 5}]}\n",
     "cannot hold 5 packets"),
    ("- just\n- a list\n", "scenario must be a mapping"),
    ("processors: [1, 2\n", "invalid YAML"),
])
def test_invalid_scenarios(make_scenario, text, message):
    with pytest.raises(ScenarioError) as excinfo:
        make_scenario(text)
    assert message in str(excinfo.value)


def test_settings_supply_defaults(app):
    scenario = load_scenario(os.path.join(SCENARIO_DIR, 'closure.yaml'), app.config)
    assert scenario.name == 'closure'
    assert scenario.fairness_window == app.config['DEFAULT_FAIRNESS_WINDOW']


def test_missing_file():
    with pytest.raises(ScenarioError):
        load_scenario('/nonexistent/scenario.yaml')


@pytest.mark.parametrize('name', sorted(f for f in os.listdir(SCENARIO_DIR) if f.endswith('.yaml')))
def test_bundled_scenarios_parse(app, name):
    scenario = load_scenario(os.path.join(SCENARIO_DIR, name), app.config)
    assert scenario.checkers
    assert scenario.initial_processors
