"""Validation harness: drive simulated users against the hub over the wire
protocol, check each scripted (response, chatbot) pair arrives in order, and
report per-response latency statistics.
"""

from __future__ import annotations

import asyncio
import json
import re
import statistics
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence


class SuiteError(ValueError):
    """Raised when a dialogue suite file violates the schema."""


@dataclass(frozen=True)
class ExpectedResponse:
    chatbot: str
    template: Optional[str] = None
    pattern: Optional[str] = None

    def matches(self, frame: dict, display_names: dict[str, str]) -> bool:
        if frame.get("kind") != "utterance":
            return False
        sender = frame.get("member_id", "")
        display = display_names.get(sender, sender)
        if self.chatbot not in (sender, display):
            return False
        if self.template is not None:
            return frame.get("template_id") == self.template
        if self.pattern is not None:
            return re.search(self.pattern, frame.get("text", "")) is not None
        return True


@dataclass
class DialogueStep:
    utterance: str
    expected: list[ExpectedResponse]


@dataclass
class DialogueScript:
    id: str
    steps: list[DialogueStep]


def load_suite(source: str | dict) -> list[DialogueScript]:
    """Parse a dialogue suite (path or decoded document), order preserved."""
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        doc = source
    dialogues = doc.get("dialogues")
    if not dialogues:
        raise SuiteError("suite has no dialogues")
    scripts: list[DialogueScript] = []
    for d_index, d in enumerate(dialogues):
        steps: list[DialogueStep] = []
        for s_index, step in enumerate(d.get("steps", ())):
            where = f"dialogue {d.get('id', d_index)!r} step {s_index}"
            if "u" not in step:
                raise SuiteError(f"{where}: missing user utterance 'u'")
            expected = []
            for r_index, resp in enumerate(step.get("R", ())):
                if "chatbot" not in resp:
                    raise SuiteError(f"{where} response {r_index}: missing chatbot")
                if "template" not in resp and "pattern" not in resp:
                    raise SuiteError(f"{where} response {r_index}: needs template or pattern")
                expected.append(
                    ExpectedResponse(
                        chatbot=resp["chatbot"],
                        template=resp.get("template"),
                        pattern=resp.get("pattern"),
                    )
                )
            steps.append(DialogueStep(utterance=step["u"], expected=expected))
        if not steps:
            raise SuiteError(f"dialogue {d.get('id', d_index)!r} has no steps")
        scripts.append(DialogueScript(id=str(d.get("id", d_index)), steps=steps))
    return scripts


@dataclass
class SimConfig:
    endpoint: str
    users: int = 1
    max_wait_s: float = 30.0
    display_name: str = "User"

    def __post_init__(self):
        if self.users < 1:
            raise ValueError("users must be positive")
        if self.max_wait_s <= 0:
            raise ValueError("max_wait must be positive")


@dataclass
class ResponseRecord:
    user: int
    dialogue: str
    step: int            # 1-based user turn
    response_index: int  # 1-based within the step
    response_id: int     # 1-based across the dialogue (the rId column)
    chatbot: str
    template: Optional[str]
    latency_ms: float
    passed: bool
    detail: str = ""


@dataclass
class Report:
    records: list[ResponseRecord] = field(default_factory=list)
    connection_errors: list[str] = field(default_factory=list)
    extras: int = 0  # broadcast utterances skipped while matching
    leaked_frames: int = 0  # events observed for a foreign group
    utterances_per_group: dict[str, int] = field(default_factory=dict)
    wall_time_s: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.connection_errors and all(r.passed for r in self.records)

    def failures(self) -> list[ResponseRecord]:
        return [r for r in self.records if not r.passed]

    def first_failure(self) -> Optional[ResponseRecord]:
        bad = self.failures()
        return bad[0] if bad else None

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "wall_time_s": self.wall_time_s,
            "extras": self.extras,
            "leaked_frames": self.leaked_frames,
            "connection_errors": self.connection_errors,
            "utterances_per_group": self.utterances_per_group,
            "records": [vars(r) for r in self.records],
        }


class ConnectionFailure(RuntimeError):
    """Transport-level failure, distinct from a test verdict."""


class _Client:
    """One simulated user session over a WebSocket connection."""

    def __init__(self, endpoint: str, user_index: int, display_name: str):
        self.endpoint = endpoint
        self.user_index = user_index
        self.member_id = f"user{user_index}"
        self.display_name = display_name
        self.ws = None
        self.group_id: Optional[str] = None
        self.display_names: dict[str, str] = {}
        self.extras = 0
        self.leaks = 0
        self.utterance_count = 0

    async def __aenter__(self):
        from websockets.asyncio.client import connect

        try:
            self.ws = await connect(self.endpoint, open_timeout=10)
        except Exception as exc:
            raise ConnectionFailure(f"cannot connect to {self.endpoint}: {exc}") from exc
        return self

    async def __aexit__(self, *exc_info):
        if self.ws is not None:
            await self.ws.close()

    async def _send(self, frame: dict) -> None:
        await self.ws.send(json.dumps(frame))

    async def _recv(self, timeout: float) -> dict:
        try:
            raw = await asyncio.wait_for(self.ws.recv(), timeout)
        except asyncio.TimeoutError:
            raise
        except Exception as exc:
            raise ConnectionFailure(f"connection lost: {exc}") from exc
        frame = json.loads(raw)
        self._observe(frame)
        return frame

    def _observe(self, frame: dict) -> None:
        if frame.get("type") != "event":
            return
        if self.group_id and frame.get("group_id") not in (None, self.group_id):
            self.leaks += 1
        if frame.get("kind") == "member_joined":
            self.display_names[frame["member_id"]] = frame.get("display_name", frame["member_id"])
        if frame.get("kind") == "utterance":
            self.utterance_count += 1

    async def create_group(self, timeout: float) -> None:
        await self._send(
            {"type": "create_group", "member_id": self.member_id, "display_name": self.display_name}
        )
        deadline = time.monotonic() + timeout
        while True:
            frame = await self._recv(max(0.01, deadline - time.monotonic()))
            if frame.get("type") == "ack":
                self.group_id = frame["group_id"]
                return
            if frame.get("type") == "error":
                raise ConnectionFailure(f"create_group rejected: {frame.get('text')}")

    async def post(self, text: str) -> None:
        await self._send(
            {"type": "utterance", "group_id": self.group_id, "member_id": self.member_id, "text": text}
        )

    async def await_response(self, expected: ExpectedResponse, timeout: float) -> dict:
        """Consume frames until the expected one arrives; extras are skipped."""
        deadline = time.monotonic() + timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise asyncio.TimeoutError
            frame = await self._recv(remaining)
            if frame.get("type") != "event":
                continue
            if expected.matches(frame, self.display_names):
                return frame
            if frame.get("kind") == "utterance" and frame.get("member_id") != self.member_id:
                self.extras += 1


async def _run_user(user_index: int, suite: Sequence[DialogueScript], config: SimConfig, report: Report) -> None:
    for script in suite:
        async with _Client(config.endpoint, user_index, config.display_name) as client:
            await client.create_group(config.max_wait_s)
            response_id = 0
            stopped = False
            for step_index, step in enumerate(script.steps, start=1):
                await client.post(step.utterance)
                posted_at = time.monotonic()
                for resp_index, expected in enumerate(step.expected, start=1):
                    response_id += 1
                    try:
                        await client.await_response(expected, config.max_wait_s)
                        latency = (time.monotonic() - posted_at) * 1000.0
                        report.records.append(
                            ResponseRecord(
                                user=user_index, dialogue=script.id, step=step_index,
                                response_index=resp_index, response_id=response_id,
                                chatbot=expected.chatbot, template=expected.template,
                                latency_ms=latency, passed=True,
                            )
                        )
                    except asyncio.TimeoutError:
                        report.records.append(
                            ResponseRecord(
                                user=user_index, dialogue=script.id, step=step_index,
                                response_index=resp_index, response_id=response_id,
                                chatbot=expected.chatbot, template=expected.template,
                                latency_ms=config.max_wait_s * 1000.0, passed=False,
                                detail="timeout waiting for response",
                            )
                        )
                        stopped = True  # the run stops at the failing step
                        break
                if stopped:
                    break
            report.extras += client.extras
            report.leaked_frames += client.leaks
            if client.group_id:
                report.utterances_per_group[client.group_id] = client.utterance_count


async def run_simulation_async(suite: Sequence[DialogueScript], config: SimConfig) -> Report:
    report = Report()
    started = time.monotonic()
    tasks = [
        asyncio.create_task(_run_user(i + 1, suite, config, report))
        for i in range(config.users)
    ]
    results = await asyncio.gather(*tasks, return_exceptions=True)
    for res in results:
        if isinstance(res, ConnectionFailure):
            report.connection_errors.append(str(res))
        elif isinstance(res, BaseException):
            raise res
    report.wall_time_s = time.monotonic() - started
    report.records.sort(key=lambda r: (r.dialogue, r.user, r.response_id))
    return report


def run_simulation(suite: Sequence[DialogueScript], config: SimConfig) -> Report:
    """Synchronous wrapper around the concurrent simulation run."""
    return asyncio.run(run_simulation_async(suite, config))


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


@dataclass
class LatencyRow:
    response_id: int
    count: int
    median_ms: float
    min_ms: float
    max_ms: float


def summarize(report: Report) -> list[LatencyRow]:
    """Per-response-id median/min/max over all users (passed records only)."""
    if not report.records:
        raise ValueError("cannot summarize an empty report")
    by_id: dict[int, list[float]] = {}
    for rec in report.records:
        if rec.passed:
            by_id.setdefault(rec.response_id, []).append(rec.latency_ms)
    rows = []
    for rid in sorted(by_id):
        values = by_id[rid]
        rows.append(
            LatencyRow(
                response_id=rid,
                count=len(values),
                median_ms=statistics.median(values),
                min_ms=min(values),
                max_ms=max(values),
            )
        )
    return rows


def render_summary(rows: Sequence[LatencyRow]) -> str:
    lines = [f"{'rId':>4} {'n':>3} {'median_ms':>10} {'min_ms':>10} {'max_ms':>10}"]
    for row in rows:
        lines.append(
            f"{row.response_id:>4} {row.count:>3} {row.median_ms:>10.1f} {row.min_ms:>10.1f} {row.max_ms:>10.1f}"
        )
    return "\n".join(lines)


@dataclass
class RepeatedRun:
    reports: list[Report]
    summaries: list[list[LatencyRow]]

    def median_stddev(self) -> dict[int, float]:
        """Stddev of each response id's median across repetitions."""
        across: dict[int, list[float]] = {}
        for rows in self.summaries:
            for row in rows:
                across.setdefault(row.response_id, []).append(row.median_ms)
        return {
            rid: (statistics.stdev(vals) if len(vals) > 1 else 0.0)
            for rid, vals in across.items()
        }

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


def run_repeated(suite: Sequence[DialogueScript], config: SimConfig, repeat: int = 1) -> RepeatedRun:
    reports = [run_simulation(suite, config) for _ in range(max(1, repeat))]
    return RepeatedRun(reports=reports, summaries=[summarize(r) for r in reports])
