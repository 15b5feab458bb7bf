"""Per-group conversation context: slot frames, an append-only event log and
snapshot persistence.

Writes for one group are serialized by the group engine; a snapshot taken
between writes restores byte-identically.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from typing import Optional

from .core import Frame, SlotValue


class SnapshotError(ValueError):
    """Raised when a snapshot blob cannot be restored."""


@dataclass
class LogEntry:
    seq: int
    kind: str
    payload: dict
    timestamp: int

    def to_json(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "payload": self.payload, "ts": self.timestamp}

    @staticmethod
    def from_json(obj: dict) -> "LogEntry":
        return LogEntry(obj["seq"], obj["kind"], obj["payload"], obj["ts"])


class GroupContext:
    """Slots and log for a single chat group."""

    def __init__(self, group_id: str, vocabulary: set[str]):
        self.group_id = group_id
        self.frame = Frame(vocabulary)
        self.log: list[LogEntry] = []
        self.log_seq = 0

    def append_log(self, kind: str, payload: dict, timestamp: int) -> LogEntry:
        self.log_seq += 1
        entry = LogEntry(self.log_seq, kind, payload, timestamp)
        self.log.append(entry)
        return entry


class ContextStore:
    """Owns every group's context; optionally mirrors logs/snapshots to disk."""

    def __init__(self, vocabulary: set[str], directory: Optional[str] = None):
        self.vocabulary = set(vocabulary)
        self.directory = directory
        self._groups: dict[str, GroupContext] = {}
        self._lock = threading.Lock()
        if directory:
            os.makedirs(directory, exist_ok=True)

    def group(self, group_id: str) -> GroupContext:
        with self._lock:
            if group_id not in self._groups:
                self._groups[group_id] = GroupContext(group_id, self.vocabulary)
            return self._groups[group_id]

    def put_slot(
        self, group_id: str, name: str, value: SlotValue, writer: str, timestamp: int = 0
    ) -> Optional[SlotValue]:
        """Write a slot, append the write to the log, return the previous value."""
        ctx = self.group(group_id)
        previous = ctx.frame.put(name, value)  # raises KeyError on undeclared names
        entry = ctx.append_log(
            "slot_write",
            {"slot": name, "value": value.to_json(), "writer": writer},
            timestamp,
        )
        self._persist_log_entry(group_id, entry)
        return previous

    def clear_slot(self, group_id: str, name: str, writer: str, timestamp: int = 0) -> Optional[SlotValue]:
        ctx = self.group(group_id)
        previous = ctx.frame.remove(name)
        if previous is not None:
            entry = ctx.append_log("slot_clear", {"slot": name, "writer": writer}, timestamp)
            self._persist_log_entry(group_id, entry)
        return previous

    def get_slot(self, group_id: str, name: str) -> Optional[SlotValue]:
        return self.group(group_id).frame.get(name)

    def log_event(self, group_id: str, kind: str, payload: dict, timestamp: int = 0) -> LogEntry:
        entry = self.group(group_id).append_log(kind, payload, timestamp)
        self._persist_log_entry(group_id, entry)
        return entry

    # -- persistence --------------------------------------------------------

    def _persist_log_entry(self, group_id: str, entry: LogEntry) -> None:
        if not self.directory:
            return
        path = os.path.join(self.directory, f"{group_id}.log.jsonl")
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry.to_json(), sort_keys=True) + "\n")

    def snapshot(self, group_id: str) -> bytes:
        """Consistent JSON snapshot of one group's slots and log counter."""
        ctx = self.group(group_id)
        doc = {
            "group_id": group_id,
            "log_seq": ctx.log_seq,
            "slots": {name: value.to_json() for name, value in sorted(ctx.frame.as_dict().items())},
            "log": [e.to_json() for e in ctx.log],
        }
        blob = json.dumps(doc, sort_keys=True).encode("utf-8")
        if self.directory:
            path = os.path.join(self.directory, f"{group_id}.snapshot.json")
            with open(path, "wb") as fh:
                fh.write(blob)
        return blob

    def restore(self, blob: bytes) -> GroupContext:
        """Rebuild a group context from a snapshot; the store is untouched on error."""
        try:
            doc = json.loads(blob.decode("utf-8"))
            group_id = doc["group_id"]
            slots = {
                name: SlotValue.from_json(value) for name, value in doc["slots"].items()
            }
            log = [LogEntry.from_json(e) for e in doc["log"]]
            log_seq = int(doc["log_seq"])
        except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
            raise SnapshotError(f"cannot restore snapshot: {exc}") from exc
        for name in slots:
            if name not in self.vocabulary:
                raise SnapshotError(f"snapshot slot {name!r} is not in the declared vocabulary")
        ctx = GroupContext(group_id, self.vocabulary)
        for name, value in slots.items():
            ctx.frame.put(name, value)
        ctx.log = log
        ctx.log_seq = log_seq
        with self._lock:
            self._groups[group_id] = ctx
        return ctx

    def replay_slots(self, group_id: str) -> dict[str, SlotValue]:
        """Rebuild the slot map purely from the log (consistency check)."""
        slots: dict[str, SlotValue] = {}
        for entry in self.group(group_id).log:
            if entry.kind == "slot_write":
                slots[entry.payload["slot"]] = SlotValue.from_json(entry.payload["value"])
            elif entry.kind == "slot_clear":
                slots.pop(entry.payload["slot"], None)
        return slots
