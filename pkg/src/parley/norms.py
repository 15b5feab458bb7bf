"""Declarative interaction norms: who may, must or must not speak, and what
the mediator does about it.

Norms are data. Each one is a trigger, a conjunction of predicates over the
annotated utterance and group state, and an ordered list of behavior
directives. Matching is deterministic: file order, with an optional consume
flag that stops evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .core import Annotations, Member, Utterance, normalize_speech_act

TRIGGERS = ("on_group_created", "on_utterance", "on_timeout", "on_group_end")

PREDICATE_KINDS = (
    "topic_is",
    "topic_in",
    "speech_act_is",
    "speech_act_in",
    "speech_act_not",
    "mentions",
    "mentions_only",
    "mentions_with_text",
    "mentions_none",
    "members_present",
    "members_absent",
    "slots_present",
    "slots_missing",
    "sender_role_is",
    "awaiting_replies",
    "not_understood",
)

DIRECTIVE_KINDS = (
    "invite",
    "forward",
    "reply",
    "ask_missing",
    "wait_for",
    "handle",
    "stop_wait",
    "save_slots",
    "compare_and_inform",
    "leave_all",
    "register_end",
    "block",
)

#: Directive/predicate member arguments resolved at execution time.
MEMBER_SELECTORS = ("topic_owner", "mentioned", "experts", "all_bots", "sender", "any_bot")

_META_ROLES = {"human": ("owner_user", "user"), "bot": ("mediator", "expert_bot", "generic_bot")}


class NormLoadError(ValueError):
    """Raised on schema or vocabulary violations in a norm file."""


@dataclass(frozen=True)
class Predicate:
    kind: str
    args: tuple[str, ...] = ()


@dataclass(frozen=True)
class Directive:
    kind: str
    args: tuple[str, ...] = ()


@dataclass
class Norm:
    id: str
    trigger: str
    preconditions: tuple[Predicate, ...]
    behaviors: tuple[Directive, ...]
    consume: bool = False
    wait_timeout_ms: int = 10_000


@dataclass
class Vocabulary:
    topics: set[str] = field(default_factory=set)
    speech_acts: set[str] = field(default_factory=set)
    members: set[str] = field(default_factory=set)
    slots: set[str] = field(default_factory=set)
    roles: set[str] = field(default_factory=lambda: {"owner_user", "user", "mediator", "expert_bot", "generic_bot", "human", "bot"})


@dataclass
class NormSet:
    norms: list[Norm]
    vocabulary: Vocabulary

    def __len__(self) -> int:
        return len(self.norms)


@dataclass
class GroupState:
    """The norm-relevant view of one chat group."""

    members: dict[str, Member] = field(default_factory=dict)
    topic: Optional[str] = None
    awaiting: dict[str, int] = field(default_factory=dict)  # member id -> deadline ms
    replied: set[str] = field(default_factory=set)          # awaited members that answered
    last_annotations: Optional[Annotations] = None

    def present(self, member_id: str) -> bool:
        return member_id in self.members

    def bots(self) -> list[Member]:
        return [m for m in self.members.values() if m.is_bot]


@dataclass
class NormEvent:
    """What a norm is matched against."""

    trigger: str
    state: GroupState
    utterance: Optional[Utterance] = None
    slot_names: frozenset[str] = frozenset()  # frame slots plus pending deltas
    timed_out: tuple[str, ...] = ()           # members whose wait deadline passed


@dataclass
class SendDecision:
    allowed: bool
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.allowed


ALLOW = SendDecision(True)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

_PREDICATE_MIN_ARITY = {
    "topic_is": 1,
    "topic_in": 1,
    "speech_act_is": 1,
    "speech_act_in": 1,
    "speech_act_not": 1,
    "mentions": 1,
    "mentions_only": 1,
    "mentions_with_text": 1,
    "mentions_none": 1,
    "members_present": 1,
    "members_absent": 1,
    "slots_present": 1,
    "slots_missing": 1,
    "sender_role_is": 1,
    "awaiting_replies": 1,
    "not_understood": 0,
}


def load_norms(source: str | Mapping) -> NormSet:
    """Parse a norm document (JSON text or an already-decoded mapping).

    File order is preserved. Every vocabulary reference must resolve;
    violations raise NormLoadError naming the offender.
    """
    if isinstance(source, str):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise NormLoadError(f"norm file is not valid JSON: {exc}") from exc
    else:
        doc = source

    vocab_doc = doc.get("vocabulary", {})
    vocab = Vocabulary(
        topics=set(vocab_doc.get("topics", ())),
        speech_acts={normalize_speech_act(a) for a in vocab_doc.get("speech_acts", ())},
        members=set(vocab_doc.get("members", ())),
        slots=set(vocab_doc.get("slots", ())),
    )

    norms: list[Norm] = []
    seen_ids: set[str] = set()
    for index, row in enumerate(doc.get("norms", ())):
        where = f"norm #{index} ({row.get('id', '?')})"
        norm_id = row.get("id")
        if not norm_id:
            raise NormLoadError(f"{where}: missing id")
        if norm_id in seen_ids:
            raise NormLoadError(f"{where}: duplicate id {norm_id!r}")
        seen_ids.add(norm_id)
        trigger = row.get("trigger")
        if trigger not in TRIGGERS:
            raise NormLoadError(f"{where}: unknown trigger {trigger!r}")
        preconditions = tuple(
            _load_predicate(p, vocab, where) for p in row.get("when", ())
        )
        behaviors = tuple(_load_directive(d, vocab, where) for d in row.get("then", ()))
        if not behaviors:
            raise NormLoadError(f"{where}: behaviors must be non-empty")
        norms.append(
            Norm(
                id=norm_id,
                trigger=trigger,
                preconditions=preconditions,
                behaviors=behaviors,
                consume=bool(row.get("consume", False)),
                wait_timeout_ms=int(row.get("wait_timeout_ms", 10_000)),
            )
        )
    return NormSet(norms=norms, vocabulary=vocab)


def load_norms_file(path: str) -> NormSet:
    with open(path, "r", encoding="utf-8") as fh:
        return load_norms(fh.read())


def _load_predicate(obj: Mapping, vocab: Vocabulary, where: str) -> Predicate:
    kind = obj.get("kind")
    if kind not in PREDICATE_KINDS:
        raise NormLoadError(f"{where}: unknown predicate kind {kind!r}")
    args = tuple(str(a) for a in obj.get("args", ()))
    if len(args) < _PREDICATE_MIN_ARITY[kind]:
        raise NormLoadError(f"{where}: predicate {kind} needs at least {_PREDICATE_MIN_ARITY[kind]} args")
    if kind in ("topic_is", "topic_in"):
        for arg in args:
            if arg not in vocab.topics:
                raise NormLoadError(f"{where}: unknown topic {arg!r}")
    elif kind.startswith("speech_act"):
        args = tuple(normalize_speech_act(a) for a in args)
        for arg in args:
            if arg not in vocab.speech_acts:
                raise NormLoadError(f"{where}: unknown speech act {arg!r}")
    elif kind in ("mentions", "mentions_only", "mentions_with_text", "mentions_none", "members_present", "members_absent"):
        for arg in args:
            if arg not in vocab.members and arg not in MEMBER_SELECTORS:
                raise NormLoadError(f"{where}: unknown member {arg!r}")
    elif kind in ("slots_present", "slots_missing"):
        for arg in args:
            if arg not in vocab.slots:
                raise NormLoadError(f"{where}: unknown slot {arg!r}")
    elif kind == "sender_role_is":
        for arg in args:
            if arg not in vocab.roles:
                raise NormLoadError(f"{where}: unknown role {arg!r}")
    elif kind == "awaiting_replies":
        if args[0] not in ("any", "none", "sender_last"):
            raise NormLoadError(f"{where}: awaiting_replies arg must be any|none|sender_last")
    return Predicate(kind=kind, args=args)


def _load_directive(obj: Mapping, vocab: Vocabulary, where: str) -> Directive:
    kind = obj.get("kind")
    if kind not in DIRECTIVE_KINDS:
        raise NormLoadError(f"{where}: unknown directive kind {kind!r}")
    args = tuple(str(a) for a in obj.get("args", ()))
    if kind in ("invite", "handle", "wait_for"):
        if not args:
            raise NormLoadError(f"{where}: directive {kind} needs member args")
        for arg in args:
            if arg not in vocab.members and arg not in MEMBER_SELECTORS and not arg.isdigit():
                raise NormLoadError(f"{where}: unknown member {arg!r}")
    elif kind == "forward":
        if not args:
            raise NormLoadError(f"{where}: forward needs a target selector")
        if args[0] not in vocab.members and args[0] not in MEMBER_SELECTORS:
            raise NormLoadError(f"{where}: unknown forward target {args[0]!r}")
    elif kind == "reply":
        if not args:
            raise NormLoadError(f"{where}: reply needs a template id")
        if len(args) > 1 and args[1] not in vocab.members and args[1] not in MEMBER_SELECTORS:
            raise NormLoadError(f"{where}: unknown reply actor {args[1]!r}")
    return Directive(kind=kind, args=args)


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------


def _sender_member(event: NormEvent) -> Optional[Member]:
    if event.utterance is None:
        return None
    return event.state.members.get(event.utterance.sender)


def _annotations(event: NormEvent) -> Annotations:
    if event.utterance is not None:
        return event.utterance.annotations
    return event.state.last_annotations or Annotations()


def _eval_predicate(pred: Predicate, event: NormEvent) -> bool:
    ann = _annotations(event)
    state = event.state
    if pred.kind == "topic_is":
        return ann.topic == pred.args[0]
    if pred.kind == "topic_in":
        return ann.topic in pred.args
    if pred.kind == "speech_act_is":
        return ann.speech_act == pred.args[0]
    if pred.kind == "speech_act_in":
        return ann.speech_act in pred.args
    if pred.kind == "speech_act_not":
        return ann.speech_act not in pred.args
    if pred.kind == "mentions_none":
        wanted = _resolve_mention_args(pred.args, event)
        return not (set(ann.mentions) & wanted)
    if pred.kind in ("mentions", "mentions_only", "mentions_with_text"):
        wanted = _resolve_mention_args(pred.args, event)
        hit = bool(set(ann.mentions) & wanted)
        if not hit:
            return False
        if pred.kind == "mentions":
            return True
        text = event.utterance.text if event.utterance else ""
        rest = text
        for mention in ann.mentions:
            member = state.members.get(mention)
            for name in ([member.display_name, member.id] if member else [mention]):
                rest = rest.replace(f"@{name}", " ")
        bare = not any(ch.isalnum() for ch in rest)
        return bare if pred.kind == "mentions_only" else not bare
    if pred.kind == "members_present":
        return all(state.present(m) for m in pred.args)
    if pred.kind == "members_absent":
        return not any(state.present(m) for m in pred.args)
    if pred.kind == "slots_present":
        return all(s in event.slot_names for s in pred.args)
    if pred.kind == "slots_missing":
        return any(s not in event.slot_names for s in pred.args)
    if pred.kind == "sender_role_is":
        sender = _sender_member(event)
        if sender is None:
            return False
        allowed: set[str] = set()
        for arg in pred.args:
            allowed.update(_META_ROLES.get(arg, (arg,)))
        return sender.role in allowed
    if pred.kind == "awaiting_replies":
        mode = pred.args[0]
        if mode == "any":
            return bool(state.awaiting)
        if mode == "none":
            return not state.awaiting
        sender = event.utterance.sender if event.utterance else None
        if sender is None or sender not in state.awaiting:
            return False
        outstanding = set(state.awaiting) - state.replied - {sender}
        return not outstanding
    if pred.kind == "not_understood":
        return not ann.understood_by
    raise AssertionError(f"unreachable predicate kind {pred.kind}")


def _resolve_mention_args(args: Sequence[str], event: NormEvent) -> set[str]:
    out: set[str] = set()
    for arg in args:
        if arg == "any_bot":
            out.update(m.id for m in event.state.bots())
        elif arg == "experts":
            out.update(m.id for m in event.state.members.values() if m.role == "expert_bot")
        else:
            out.add(arg)
    return out


def match_norms(norm_set: NormSet, event: NormEvent) -> list[tuple[str, list[Directive]]]:
    """All matching norms' directives in file order.

    Evaluation stops after a matching norm carrying consume=true.
    """
    matched: list[tuple[str, list[Directive]]] = []
    for norm in norm_set.norms:
        if norm.trigger != event.trigger:
            continue
        if all(_eval_predicate(p, event) for p in norm.preconditions):
            matched.append((norm.id, list(norm.behaviors)))
            if norm.consume:
                break
    return matched


def enforce_send(norm_set: NormSet, utterance: Utterance, state: GroupState, slot_names: frozenset[str] = frozenset()) -> SendDecision:
    """Gate an utterance before broadcast.

    Non-members are always blocked; otherwise the first matching norm that
    emits a block directive wins.
    """
    if utterance.sender not in state.members:
        return SendDecision(False, "not a member")
    event = NormEvent(trigger="on_utterance", state=state, utterance=utterance, slot_names=slot_names)
    for norm_id, directives in match_norms(norm_set, event):
        if any(d.kind == "block" for d in directives):
            return SendDecision(False, norm_id)
    return ALLOW
