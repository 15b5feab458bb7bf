"""Core domain types shared by every part of the engine.

Holds the speech-act and intent registries, the intent-flow graph that maps
(incoming intent, replied-to intent) pairs to answer intents, action specs,
chat members, utterances and the slot frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

# Communicative-function labels every bot understands out of the box.
GENERIC_SPEECH_ACTS = (
    "GREETINGS",
    "THANK",
    "INFORM",
    "QUERY",
    "CFP",
    "REQUEST",
    "AGREE",
    "REFUSE",
    "FAILURE",
    "PROPOSE",
    "SUBSCRIBE",
    "NOT_UNDERSTOOD",
    "BYE",
)

ACTION_CLASSES = (
    "Greet",
    "Thank",
    "Bye",
    "GetDefinition",
    "SearchNews",
    "Compute",
    "AskMore",
    "SendInformation",
    "SendRefuse",
    "NoAction",
)

MEMBER_ROLES = ("owner_user", "user", "mediator", "expert_bot", "generic_bot")

#: Sentinel used as the "replying to nothing" vertex in the flow graph.
NO_INTENT = None


class RegistryError(ValueError):
    """Raised when a registry constraint is violated."""


class SpeechActRegistry:
    """Registry of speech-act labels: the generic set plus domain extensions."""

    def __init__(self, extra: Iterable[str] = ()):
        self._acts: list[str] = list(GENERIC_SPEECH_ACTS)
        for act in extra:
            self.register(act)

    def register(self, act_id: str) -> str:
        act_id = normalize_speech_act(act_id)
        if act_id in GENERIC_SPEECH_ACTS and act_id in self._acts:
            # Re-registering a generic label is a shadowing attempt.
            raise RegistryError(f"speech act {act_id!r} shadows a generic label")
        if act_id in self._acts:
            raise RegistryError(f"duplicate speech act {act_id!r}")
        self._acts.append(act_id)
        return act_id

    def __contains__(self, act_id: str) -> bool:
        return normalize_speech_act(act_id) in self._acts

    def __iter__(self):
        return iter(self._acts)

    def require(self, act_id: str) -> str:
        act_id = normalize_speech_act(act_id)
        if act_id not in self._acts:
            raise RegistryError(f"unknown speech act {act_id!r}")
        return act_id


def normalize_speech_act(act_id: str) -> str:
    """Canonical speech-act spelling: upper case, '-' and ' ' become '_'."""
    return act_id.strip().upper().replace("-", "_").replace(" ", "_")


@dataclass(frozen=True)
class IntentClass:
    """An application-level meaning category with its communicative function."""

    id: str
    speech_act: str
    entities: frozenset[str] = frozenset()
    features: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.id:
            raise RegistryError("intent id must be non-empty")
        for name in list(self.entities) + list(self.features):
            if not name:
                raise RegistryError(f"intent {self.id!r} has an empty entity/feature name")


class IntentRegistry:
    """Id-unique collection of intent classes."""

    def __init__(self, speech_acts: SpeechActRegistry):
        self.speech_acts = speech_acts
        self._intents: dict[str, IntentClass] = {}

    def register(self, intent: IntentClass) -> IntentClass:
        if intent.id in self._intents:
            raise RegistryError(f"duplicate intent {intent.id!r}")
        act = self.speech_acts.require(intent.speech_act)
        intent = replace(intent, speech_act=act)
        self._intents[intent.id] = intent
        return intent

    def __contains__(self, intent_id: str) -> bool:
        return intent_id in self._intents

    def __iter__(self):
        return iter(self._intents.values())

    def get(self, intent_id: str) -> Optional[IntentClass]:
        return self._intents.get(intent_id)

    def ids(self) -> set[str]:
        return set(self._intents)


FlowKey = tuple[str, Optional[str]]


@dataclass
class IntentFlow:
    """Directed answer graph: (incoming intent, replied-to intent) -> answer intent.

    The replied-to position uses ``None`` for utterances that reply to nothing,
    i.e. dialogue starts.
    """

    edges: dict[FlowKey, str] = field(default_factory=dict)

    def add_edge(self, from_intent: str, replying_to: Optional[str], answer_intent: str) -> None:
        key = (from_intent, replying_to)
        if key in self.edges and self.edges[key] != answer_intent:
            raise RegistryError(f"conflicting duplicate flow edge for {key!r}")
        self.edges[key] = answer_intent


def next_intent(flow: IntentFlow, i_u: str, i_r: Optional[str]) -> Optional[str]:
    """Answer intent for the pair (incoming, replied-to), or None when absent.

    No fallback to (i_u, None) happens when the exact pair is missing: an
    absent edge means the caller routes to not-understood handling.
    """
    return flow.edges.get((i_u, i_r))


@dataclass
class FlowIssue:
    kind: str  # "unknown_intent" | "empty_flow"
    detail: str


def validate_flow(flow: IntentFlow, registry: IntentRegistry) -> list[FlowIssue]:
    """Check every edge endpoint resolves in the registry.

    Returns the issue list; an empty flow yields a single warning-style issue
    but is otherwise valid.
    """
    issues: list[FlowIssue] = []
    if not flow.edges:
        issues.append(FlowIssue("empty_flow", "flow has no edges"))
        return issues
    known = registry.ids()
    for (i_u, i_r), i_a in flow.edges.items():
        for role, intent_id in (("from", i_u), ("replying_to", i_r), ("answer", i_a)):
            if intent_id is None:
                continue
            if intent_id not in known:
                issues.append(
                    FlowIssue(
                        "unknown_intent",
                        f"{role} intent {intent_id!r} in edge {(i_u, i_r)!r} -> {i_a!r} is not registered",
                    )
                )
    return issues


@dataclass(frozen=True)
class ActionSpec:
    """What a bot does to answer an intent: action class plus requirements."""

    answer_intent: Optional[str]
    speech_act: Optional[str]
    required_entities: tuple[str, ...] = ()
    required_features: tuple[str, ...] = ()
    action_class: str = "NoAction"

    def __post_init__(self):
        if self.action_class not in ACTION_CLASSES:
            raise RegistryError(f"unknown action class {self.action_class!r}")

    @property
    def required_slots(self) -> tuple[str, ...]:
        # Features first: for the finance domain the feature slots (value,
        # period) are what Ask More requests, in declaration order.
        return tuple(self.required_features) + tuple(self.required_entities)


@dataclass(frozen=True)
class Member:
    id: str
    display_name: str
    role: str
    kind: str  # "human" | "bot"

    def __post_init__(self):
        if self.role not in MEMBER_ROLES:
            raise RegistryError(f"unknown member role {self.role!r}")
        if self.kind not in ("human", "bot"):
            raise RegistryError(f"member kind must be human or bot, got {self.kind!r}")

    @property
    def is_bot(self) -> bool:
        return self.kind == "bot"


@dataclass
class Annotations:
    """Progressive NLU annotations attached to an utterance by the engine."""

    topic: Optional[str] = None
    speech_act: Optional[str] = None
    intent_class: Optional[str] = None
    canonical_text: Optional[str] = None
    mentions: tuple[str, ...] = ()
    slot_deltas: dict[str, "SlotValue"] = field(default_factory=dict)
    understood_by: tuple[str, ...] = ()
    template_id: Optional[str] = None


@dataclass
class Utterance:
    id: str
    group_id: str
    sender: str
    text: str
    reply_to: Optional[str] = None
    timestamp: int = 0  # milliseconds since epoch
    annotations: Annotations = field(default_factory=Annotations)


@dataclass(frozen=True)
class SlotValue:
    """Typed slot value; numeric values carry their unit.

    ``unit`` is a currency code for amounts and day/month/year for periods.
    """

    value: object
    unit: Optional[str] = None

    def as_days(self) -> Optional[int]:
        """Duration in days (month=30, year=365); None for non-durations."""
        if self.unit in ("day", "days"):
            return int(self.value)
        if self.unit in ("month", "months"):
            return int(self.value) * 30
        if self.unit in ("year", "years"):
            return int(self.value) * 365
        return None

    def render(self) -> str:
        if self.unit in ("day", "days", "month", "months", "year", "years"):
            unit = self.unit.rstrip("s")
            plural = "s" if float(self.value) != 1 else ""
            return f"{self.value:g} {unit}{plural}" if isinstance(self.value, float) else f"{self.value} {unit}{plural}"
        if self.unit:
            return f"{self.value} {self.unit}"
        return str(self.value)

    def to_json(self) -> dict:
        return {"value": self.value, "unit": self.unit}

    @staticmethod
    def from_json(obj: Mapping) -> "SlotValue":
        return SlotValue(value=obj["value"], unit=obj.get("unit"))


class Frame:
    """Slot map for one group's conversation, restricted to a declared vocabulary."""

    def __init__(self, vocabulary: Iterable[str]):
        self.vocabulary = set(vocabulary)
        self._slots: dict[str, SlotValue] = {}

    def put(self, name: str, value: SlotValue) -> Optional[SlotValue]:
        if name not in self.vocabulary:
            raise KeyError(f"slot {name!r} is not in the declared vocabulary")
        previous = self._slots.get(name)
        self._slots[name] = value
        return previous

    def get(self, name: str) -> Optional[SlotValue]:
        return self._slots.get(name)

    def remove(self, name: str) -> Optional[SlotValue]:
        return self._slots.pop(name, None)

    def names(self) -> set[str]:
        return set(self._slots)

    def as_dict(self) -> dict[str, SlotValue]:
        return dict(self._slots)


def missing_slots(spec: ActionSpec, frame: Frame, pending: Optional[Mapping[str, SlotValue]] = None) -> list[str]:
    """Required slot names absent from the frame, in spec declaration order.

    ``pending`` holds slot deltas extracted from the current utterance that
    have not been persisted yet; they count as present.
    """
    have = frame.names()
    if pending:
        have |= set(pending)
    return [name for name in spec.required_slots if name not in have]


# ---------------------------------------------------------------------------
# Configuration loading (intents / flow / action bindings)
# ---------------------------------------------------------------------------


def load_registry_config(
    obj: Mapping,
    speech_acts: Optional[SpeechActRegistry] = None,
) -> tuple[SpeechActRegistry, IntentRegistry, IntentFlow]:
    """Build registries and flow from the structured config document.

    Expected shape::

        {"speech_acts": ["QUERY_NEWS", ...],
         "intents": [{"intent": id, "speech_act": act,
                      "entities": [...], "features": [...]}],
         "edges": [{"from_intent": id, "replying_to": id|null,
                    "answer_intent": id}]}
    """
    acts = speech_acts or SpeechActRegistry()
    for act in obj.get("speech_acts", ()):
        norm = normalize_speech_act(act)
        if norm not in acts:
            acts.register(norm)
    registry = IntentRegistry(acts)
    for row in obj.get("intents", ()):
        registry.register(
            IntentClass(
                id=row["intent"],
                speech_act=row["speech_act"],
                entities=frozenset(row.get("entities", ())),
                features=frozenset(row.get("features", ())),
            )
        )
    flow = IntentFlow()
    for row in obj.get("edges", ()):
        flow.add_edge(row["from_intent"], row.get("replying_to"), row["answer_intent"])
    return acts, registry, flow


def load_registry_file(path: str, speech_acts: Optional[SpeechActRegistry] = None):
    with open(path, "r", encoding="utf-8") as fh:
        return load_registry_config(json.load(fh), speech_acts)
