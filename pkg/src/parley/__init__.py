"""parley: a norm-governed multi-party chat engine.

A hub broadcasts utterances inside chat groups under declarative interaction
norms; bot members answer through a parse -> filter -> act pipeline driven by
an intent-flow graph. The packaged demo profile wires a finance-advisory
ensemble (one mediator, two investment experts) plus a simulation harness
that replays scripted dialogues and measures response latency.
"""

from .core import (
    ActionSpec,
    Frame,
    IntentClass,
    IntentFlow,
    IntentRegistry,
    Member,
    SlotValue,
    SpeechActRegistry,
    Utterance,
    missing_slots,
    next_intent,
    validate_flow,
)
from .engine import Accepted, BroadcastEvent, ChatGroup, Hub, Rejected
from .norms import GroupState, NormSet, enforce_send, load_norms, match_norms

__version__ = "0.1.0"

__all__ = [
    "ActionSpec",
    "Accepted",
    "BroadcastEvent",
    "ChatGroup",
    "Frame",
    "GroupState",
    "Hub",
    "IntentClass",
    "IntentFlow",
    "IntentRegistry",
    "Member",
    "NormSet",
    "Rejected",
    "SlotValue",
    "SpeechActRegistry",
    "Utterance",
    "enforce_send",
    "load_norms",
    "match_norms",
    "missing_slots",
    "next_intent",
    "validate_flow",
]
