from __future__ import annotations

import asyncio
import json

import pytest

from parley.harness import SimConfig, load_suite, run_simulation
from parley.demo import data_path

pytestmark = pytest.mark.usefixtures("shared_server")


async def ws_connect(endpoint: str):
    from websockets.asyncio.client import connect

    return await connect(endpoint, open_timeout=10)


async def send(ws, frame: dict) -> None:
    await ws.send(json.dumps(frame))


async def recv(ws, timeout: float = 10.0) -> dict:
    return json.loads(await asyncio.wait_for(ws.recv(), timeout))


async def recv_until(ws, predicate, timeout: float = 10.0) -> dict:
    deadline = asyncio.get_event_loop().time() + timeout
    while True:
        remaining = deadline - asyncio.get_event_loop().time()
        frame = await recv(ws, remaining)
        if predicate(frame):
            return frame


# the full duplex frame vocabulary of the gateway
SERVER_FRAME_FIELDS = {
    "type", "kind", "group_id", "member_id", "display_name", "role", "text",
    "reply_to", "utterance_id", "seq", "ts", "template_id",
}


class TestWireProtocol:
    def test_create_group_ack_and_backlog(self, shared_server):
        async def scenario():
            ws = await ws_connect(shared_server.endpoint)
            await send(ws, {"type": "create_group", "member_id": "u1", "display_name": "User"})
            ack = await recv_until(ws, lambda f: f["type"] == "ack")
            assert ack["group_id"]
            joined = await recv_until(
                ws, lambda f: f["type"] == "event" and f["kind"] == "member_joined"
                and f["member_id"] == "u1"
            )
            assert joined["role"] == "owner_user"
            mediator = await recv_until(
                ws, lambda f: f["type"] == "event" and f["kind"] == "member_joined"
                and f["member_id"] == "mediator"
            )
            assert mediator["display_name"] == "Mediator"
            await ws.close()

        asyncio.run(scenario())

    def test_utterance_round_trip_with_seq_and_ts(self, shared_server):
        async def scenario():
            ws = await ws_connect(shared_server.endpoint)
            await send(ws, {"type": "create_group", "member_id": "u2"})
            ack = await recv_until(ws, lambda f: f["type"] == "ack")
            gid = ack["group_id"]
            await send(ws, {"type": "utterance", "group_id": gid, "member_id": "u2", "text": "hello"})
            # broadcast events stream while the post is handled; the ack follows
            echo = await recv_until(
                ws, lambda f: f.get("kind") == "utterance" and f.get("member_id") == "u2"
            )
            assert echo["text"] == "hello"
            assert isinstance(echo["ts"], int)
            reply = await recv_until(
                ws, lambda f: f.get("kind") == "utterance" and f.get("member_id") == "mediator"
            )
            assert reply["template_id"] == "greet_back"
            ack2 = await recv_until(ws, lambda f: f["type"] == "ack" and "utterance_id" in f)
            assert ack2["seq"] > 0
            assert ack2["seq"] < reply["seq"]
            await ws.close()

        asyncio.run(scenario())

    def test_all_server_frames_match_the_schema(self, shared_server):
        async def scenario():
            ws = await ws_connect(shared_server.endpoint)
            await send(ws, {"type": "create_group", "member_id": "u3"})
            frames = []
            for _ in range(6):
                try:
                    frames.append(await recv(ws, timeout=2))
                except asyncio.TimeoutError:
                    break
            assert frames
            for frame in frames:
                assert frame["type"] in ("ack", "error", "event")
                assert set(frame) <= SERVER_FRAME_FIELDS
                if frame["type"] == "event":
                    assert frame["kind"] in (
                        "utterance", "member_joined", "member_left",
                        "group_created", "group_ended",
                    )
                    assert isinstance(frame["seq"], int)
            await ws.close()

        asyncio.run(scenario())

    def test_non_member_post_yields_error_frame(self, shared_server):
        async def scenario():
            ws = await ws_connect(shared_server.endpoint)
            await send(ws, {"type": "create_group", "member_id": "u4"})
            ack = await recv_until(ws, lambda f: f["type"] == "ack")
            await send(
                ws,
                {"type": "utterance", "group_id": ack["group_id"], "member_id": "mallory", "text": "hi"},
            )
            error = await recv_until(ws, lambda f: f["type"] == "error")
            assert error["text"] == "not a member"
            await ws.close()

        asyncio.run(scenario())

    def test_malformed_and_unknown_frames(self, shared_server):
        async def scenario():
            ws = await ws_connect(shared_server.endpoint)
            await ws.send("this is not json")
            error = await recv_until(ws, lambda f: f["type"] == "error")
            assert "not JSON" in error["text"]
            await send(ws, {"type": "dance"})
            error2 = await recv_until(ws, lambda f: f["type"] == "error")
            assert "unknown frame type" in error2["text"]
            await ws.close()

        asyncio.run(scenario())

    def test_second_client_can_join_and_see_broadcasts(self, shared_server):
        async def scenario():
            ws1 = await ws_connect(shared_server.endpoint)
            await send(ws1, {"type": "create_group", "member_id": "owner5", "display_name": "User"})
            ack = await recv_until(ws1, lambda f: f["type"] == "ack")
            gid = ack["group_id"]

            ws2 = await ws_connect(shared_server.endpoint)
            await send(ws2, {"type": "join", "group_id": gid, "member_id": "guest5"})
            await recv_until(ws2, lambda f: f["type"] == "ack")

            await send(ws1, {"type": "utterance", "group_id": gid, "member_id": "owner5", "text": "hello"})
            seen = await recv_until(
                ws2, lambda f: f.get("kind") == "utterance" and f.get("member_id") == "owner5"
            )
            assert seen["text"] == "hello"
            await ws1.close()
            await ws2.close()

        asyncio.run(scenario())


class TestSimulationRuns:
    def test_wrong_responder_fails_at_that_step(self, shared_server):
        doc = {
            "dialogues": [
                {
                    "id": "forced-mismatch",
                    "steps": [
                        {"u": "hello", "R": [{"chatbot": "Mediator", "template": "greet_back"}]},
                        {
                            "u": "what is cdb?",
                            "R": [
                                {"chatbot": "SavingsAccountExpert", "template": "definition_cdb"}
                            ],
                        },
                    ],
                }
            ]
        }
        suite = load_suite(doc)
        report = run_simulation(
            suite, SimConfig(endpoint=shared_server.endpoint, users=1, max_wait_s=1.0)
        )
        assert not report.passed
        failure = report.first_failure()
        assert failure.step == 2 and failure.response_index == 1

    def test_single_user_verdicts_are_deterministic(self, shared_server):
        suite = load_suite(data_path("suites", "d1.json"))
        config = SimConfig(endpoint=shared_server.endpoint, users=1, max_wait_s=30)
        verdicts = []
        for _ in range(2):
            report = run_simulation(suite, config)
            verdicts.append([(r.response_id, r.passed) for r in report.records])
        assert verdicts[0] == verdicts[1]
        assert all(passed for _, passed in verdicts[0])

    def test_repeated_runs_report_median_stddev(self, shared_server):
        from parley.harness import run_repeated

        suite = load_suite(data_path("suites", "d1.json"))
        config = SimConfig(endpoint=shared_server.endpoint, users=1, max_wait_s=30)
        run = run_repeated(suite, config, repeat=2)
        assert run.passed
        assert len(run.reports) == 2
        stddev = run.median_stddev()
        assert set(stddev) == set(range(1, 32))
        assert all(value >= 0.0 for value in stddev.values())
