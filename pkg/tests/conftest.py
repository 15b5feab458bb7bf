from __future__ import annotations

import json
import socket
import threading
import time

import pytest

from parley import demo
from parley.core import Member

D1_TURNS = [
    "hello",
    "what is cdb?",
    "which is better: cdb or savings account?",
    "i would like to invest R$ 50 in six months",
    "so i want to invest R$ 10000 in 2 years",
    "what if i invest R$10,000 in 5 years?",
    "how about 15 years?",
    "and 50,0000?",
    "I want to invest in 50,000 for 15 years in CDB",
    "thanks",
]

_SIM_BLOCK = [
    ("mediator", "forward_simulation"),
    ("savings_expert", "inform_calculation"),
    ("cdb_expert", "inform_calculation"),
    ("mediator", "thanks_experts"),
]

# the 31 expected (responder, template) pairs, per user turn
D1_EXPECTED: list[list[tuple[str, str]]] = [
    [("mediator", "greet_back")],
    [("mediator", "forward_topic"), ("cdb_expert", "definition_cdb")],
    [("mediator", "news_found")],
    _SIM_BLOCK + [("mediator", "compare_no_significant")],
    _SIM_BLOCK + [("mediator", "compare_better")],
    _SIM_BLOCK + [("mediator", "compare_better")],
    _SIM_BLOCK + [("mediator", "compare_better")],
    _SIM_BLOCK + [("mediator", "compare_better")],
    [("mediator", "inform_link_cdb")],
    [("mediator", "youre_welcome")],
]


def bot_pairs(group, start: int = 0) -> list[tuple[str, str]]:
    """(sender, template) for every bot utterance broadcast after ``start``."""
    return [
        (ev.utterance.sender, ev.utterance.annotations.template_id)
        for ev in group.events[start:]
        if ev.kind == "utterance" and ev.member is not None and ev.member.is_bot
    ]


def matches_in_order(got: list[tuple[str, str]], expected: list[tuple[str, str]]) -> bool:
    """Every expected pair appears in order; extra traffic is tolerated."""
    it = iter(got)
    return all(any(g == e for g in it) for e in expected)


def replay_d1(hub, owner_id: str = "alice", turns=None, group=None):
    """Drive the scripted dialogue in process; returns (group, per-turn pairs)."""
    if group is None:
        group = hub.create_group(Member(owner_id, "User", "user", "human"))
    per_turn = []
    for text in turns if turns is not None else D1_TURNS:
        before = len(group.events)
        result = hub.post_utterance(group, owner_id, text)
        assert bool(result), f"post rejected: {result}"
        per_turn.append(bot_pairs(group, before))
    return group, per_turn


@pytest.fixture
def profile():
    return demo.load_profile()


@pytest.fixture
def hub(profile):
    return profile.hub


def free_port() -> int:
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


class HubServer:
    """A live gateway on an ephemeral port for wire-protocol tests."""

    def __init__(self):
        import uvicorn

        from parley.server import create_app

        self.profile = demo.load_profile()
        self.port = free_port()
        self.endpoint = f"ws://127.0.0.1:{self.port}/ws"
        config = uvicorn.Config(
            create_app(self.profile), host="127.0.0.1", port=self.port, log_level="error"
        )
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def start(self) -> "HubServer":
        self.thread.start()
        deadline = time.monotonic() + 10
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("gateway did not start in time")
            time.sleep(0.02)
        return self

    def stop(self) -> None:
        self.server.should_exit = True
        self.thread.join(timeout=5)


@pytest.fixture
def live_server():
    server = HubServer().start()
    yield server
    server.stop()


@pytest.fixture(scope="module")
def shared_server():
    server = HubServer().start()
    yield server
    server.stop()
