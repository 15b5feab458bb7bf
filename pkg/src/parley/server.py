"""WebSocket gateway for the hub.

One JSON frame per message, full duplex. Clients create or join a group,
post utterances, and receive the group's broadcast events in sequence
order. The hub itself is synchronous; the single event loop serializes all
frame handling, which preserves the per-group total order.
"""

from __future__ import annotations

import asyncio
import json
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .core import Member
from .demo import Profile, load_profile
from .engine import BroadcastEvent, ChatGroup, HubError, Rejected

CLIENT_FRAME_TYPES = ("create_group", "join", "leave", "utterance")


def create_app(profile: Optional[Profile] = None) -> FastAPI:
    profile = profile or load_profile()
    app = FastAPI(title="parley hub")
    app.state.profile = profile
    hub = profile.hub

    @app.get("/healthz")
    async def healthz():
        return {"ok": True, "groups": len(hub.groups)}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        session = _Session(ws, profile)
        sender = asyncio.create_task(session.pump_events())
        try:
            while True:
                raw = await ws.receive_text()
                await session.handle_frame(raw)
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            session.close()

    return app


class _Session:
    """One client connection: an identity bound to at most one group."""

    def __init__(self, ws: WebSocket, profile: Profile):
        self.ws = ws
        self.hub = profile.hub
        self.queue: asyncio.Queue[dict] = asyncio.Queue()
        self.group: Optional[ChatGroup] = None
        self.member_id: Optional[str] = None
        self._callback = None

    def close(self) -> None:
        if self.group is not None and self._callback is not None:
            self.hub.unsubscribe(self.group.id, self._callback)
            self._callback = None

    async def pump_events(self) -> None:
        while True:
            frame = await self.queue.get()
            await self.ws.send_text(json.dumps(frame))

    def _subscribe(self, group: ChatGroup) -> None:
        # snapshot + subscribe with no await in between: exact partition
        backlog = [event.to_frame() for event in group.events]

        def deliver(event: BroadcastEvent) -> None:
            self.queue.put_nowait(event.to_frame())

        self.hub.subscribe(group.id, deliver)
        self._callback = deliver
        for frame in backlog:
            self.queue.put_nowait(frame)

    async def send(self, frame: dict) -> None:
        self.queue.put_nowait(frame)

    async def error(self, reason: str, **extra) -> None:
        await self.send({"type": "error", "text": reason, **extra})

    async def handle_frame(self, raw: str) -> None:
        try:
            frame = json.loads(raw)
        except json.JSONDecodeError:
            await self.error("malformed frame: not JSON")
            return
        ftype = frame.get("type")
        if ftype not in CLIENT_FRAME_TYPES:
            await self.error(f"unknown frame type {ftype!r}")
            return
        handler = getattr(self, f"_on_{ftype}")
        await handler(frame)

    async def _on_create_group(self, frame: dict) -> None:
        member_id = frame.get("member_id")
        if not member_id:
            await self.error("create_group needs member_id")
            return
        member = Member(member_id, frame.get("display_name") or member_id, "owner_user", "human")
        try:
            group = self.hub.create_group(member, frame.get("group_id"))
        except HubError as exc:
            await self.error(str(exc))
            return
        self.group = group
        self.member_id = member_id
        await self.send({"type": "ack", "group_id": group.id, "member_id": member_id})
        self._subscribe(group)

    async def _on_join(self, frame: dict) -> None:
        group = self.hub.groups.get(frame.get("group_id", ""))
        member_id = frame.get("member_id")
        if group is None or not member_id:
            await self.error("join needs a valid group_id and member_id", group_id=frame.get("group_id"))
            return
        role = frame.get("role", "user")
        try:
            self.hub.join_group(group, Member(member_id, frame.get("display_name") or member_id, role, "human"))
        except HubError as exc:
            await self.error(str(exc), group_id=group.id)
            return
        self.group = group
        self.member_id = member_id
        await self.send({"type": "ack", "group_id": group.id, "member_id": member_id})
        self._subscribe(group)

    async def _on_leave(self, frame: dict) -> None:
        group = self.hub.groups.get(frame.get("group_id", ""))
        member_id = frame.get("member_id")
        if group is None or not member_id:
            await self.error("leave needs a valid group_id and member_id")
            return
        try:
            self.hub.leave_group(group, member_id)
        except HubError as exc:
            await self.error(str(exc), group_id=group.id)
            return
        await self.send({"type": "ack", "group_id": group.id, "member_id": member_id})

    async def _on_utterance(self, frame: dict) -> None:
        group = self.hub.groups.get(frame.get("group_id", ""))
        member_id = frame.get("member_id")
        text = frame.get("text")
        if group is None or not member_id or text is None:
            await self.error("utterance needs group_id, member_id and text")
            return
        result = self.hub.post_utterance(group, member_id, text, frame.get("reply_to"))
        if isinstance(result, Rejected):
            await self.error(result.reason, group_id=group.id, member_id=member_id)
            return
        await self.send(
            {
                "type": "ack",
                "group_id": group.id,
                "member_id": member_id,
                "utterance_id": result.utterance_id,
                "seq": result.seq,
            }
        )


def serve(
    profile: Optional[Profile] = None,
    host: str = "127.0.0.1",
    port: int = 8765,
) -> None:
    """Run the gateway under uvicorn (blocking)."""
    import uvicorn

    uvicorn.run(create_app(profile), host=host, port=port, log_level="warning")
