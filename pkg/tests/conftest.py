import textwrap

import pytest

from app import create_app, db
from harness.runner import run_scenario
from harness.scenario import parse_scenario
from protocols.recsa import Recsa


@pytest.fixture
def app():
    app = create_app('testing')
    with app.app_context():
        yield app
        db.session.remove()
        db.drop_all()


@pytest.fixture
def make_scenario():
    """Parse an inline scenario written as an indented YAML block"""
    def build(text, name='inline'):
        return parse_scenario(textwrap.dedent(text), name=name)
    return build


@pytest.fixture
def run_inline(make_scenario):
    """Run an inline scenario and return its RunResult"""
    def run(text, **kwargs):
        return run_scenario(make_scenario(text), **kwargs)
    return run


def recsa_rounds(nodes, rounds, trusted=None):
    """Synchronous rounds: every node loops once, then every message is delivered"""
    trusted = list(trusted or sorted(nodes))
    for _ in range(rounds):
        outgoing = []
        for pid in sorted(nodes):
            outgoing.extend((pid, out) for out in nodes[pid].loop(trusted))
        for src, out in outgoing:
            if out.dst in nodes:
                nodes[out.dst].on_receive(src, out.message)
    return nodes


@pytest.fixture
def exchange():
    return recsa_rounds


@pytest.fixture
def converged():
    """Factory for Recsa instances that agree on a configuration and report noReco()"""
    def build(pids, config=None, rounds=8):
        members = sorted(config or pids)
        nodes = {pid: Recsa(pid) for pid in pids}
        for node in nodes.values():
            node.corrupt({'config': {k: members for k in pids}}, None, None)
        return recsa_rounds(nodes, rounds)
    return build


class QuietRecsa:
    """Configuration service double: a fixed configuration and no reconfiguration in progress"""

    def __init__(self, config, participant=True):
        self.config = frozenset(config)
        self.participant = participant

    def get_config(self):
        return self.config

    def no_reco(self):
        return True

    def is_participant(self):
        return self.participant


@pytest.fixture
def quiet_recsa():
    return QuietRecsa
