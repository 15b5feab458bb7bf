"""The hub: chat-group lifecycle, norm-gated broadcast with per-group total
order, and dispatch into the bot pipelines.

All activity for one group runs as a single synchronous reaction cascade: an
accepted utterance is broadcast, matching norms execute their directives,
bot pipelines run in join order, and every utterance they post joins a FIFO
work queue drained before the call returns. Different groups are
independent. Waits resolve at the end of the cascade: with in-process bots
serialized per group, a silent bot provably stays silent, so the timeout
behavior fires without waiting out the wall clock.
"""

from __future__ import annotations

import itertools
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

from . import nlu
from .actions import BotServices, ChatBot, Reply, run_comparison
from .context import ContextStore
from .core import Annotations, Member, SlotValue, Utterance
from .norms import Directive, GroupState, NormEvent, NormSet, enforce_send, match_norms


@dataclass
class BroadcastEvent:
    kind: str  # utterance | member_joined | member_left | group_created | group_ended
    group_id: str
    seq: int
    timestamp: int
    member: Optional[Member] = None
    utterance: Optional[Utterance] = None

    def to_frame(self) -> dict:
        """Wire representation (one JSON frame per event)."""
        frame = {
            "type": "event",
            "kind": self.kind,
            "group_id": self.group_id,
            "seq": self.seq,
            "ts": self.timestamp,
        }
        if self.member is not None:
            frame["member_id"] = self.member.id
            frame["display_name"] = self.member.display_name
            frame["role"] = self.member.role
        if self.utterance is not None:
            utt = self.utterance
            frame["member_id"] = utt.sender
            frame["utterance_id"] = utt.id
            frame["text"] = utt.text
            if utt.reply_to:
                frame["reply_to"] = utt.reply_to
            frame["template_id"] = utt.annotations.template_id
        return frame


@dataclass
class ChatGroup:
    id: str
    state: GroupState = field(default_factory=GroupState)
    created_at: int = 0
    ended_at: Optional[int] = None
    seq: int = 0
    events: list[BroadcastEvent] = field(default_factory=list)
    deliveries: dict[str, list[int]] = field(default_factory=dict)
    utterances: dict[str, Utterance] = field(default_factory=dict)
    last_ts: int = 0
    # all state mutations for one group run under this lock (per-group FIFO
    # serialization); reentrant because directive execution posts recursively
    lock: threading.RLock = field(default_factory=threading.RLock)

    @property
    def members(self) -> dict[str, Member]:
        return self.state.members

    @property
    def active(self) -> bool:
        return self.ended_at is None

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq


@dataclass
class Accepted:
    utterance_id: str
    seq: int

    def __bool__(self) -> bool:
        return True


@dataclass
class Rejected:
    reason: str

    def __bool__(self) -> bool:
        return False


class HubError(ValueError):
    pass


@dataclass
class _Wait:
    member_id: str
    deadline: int
    utterance: Utterance


_MENTION_RE = re.compile(r"@(\w+)")


class Hub:
    """Engine instance: bot roster, norm set, NLU models and all groups."""

    def __init__(
        self,
        norms: NormSet,
        bots: Mapping[str, ChatBot],
        services: BotServices,
        speech_act_rules: nlu.SpeechActRules,
        topic_lexicon: nlu.TopicLexicon,
        investment_verbs: Optional[Iterable[str]] = None,
        clock: Optional[Callable[[], int]] = None,
        subscriber: Optional[Callable[[BroadcastEvent], None]] = None,
        event_detector: Optional[Callable[[Utterance], None]] = None,
    ):
        self.norms = norms
        self.roster = dict(bots)
        self.services = services
        self.speech_act_rules = speech_act_rules
        self.topic_lexicon = topic_lexicon
        self.investment_verbs = set(investment_verbs) if investment_verbs else None
        self.clock = clock or (lambda: int(time.time() * 1000))
        # hook for dialog-inconsistency detection (contradiction, irrelevant
        # topic, topic-switch miss, ...); observes every annotated utterance
        self.event_detector = event_detector
        self.groups: dict[str, ChatGroup] = {}
        self.subscribers: dict[str, list[Callable[[BroadcastEvent], None]]] = {}
        self.global_subscriber = subscriber
        self._group_counter = itertools.count(1)

    # ------------------------------------------------------------------
    # Lifecycle
    # ------------------------------------------------------------------

    def create_group(self, owner: Member, group_id: Optional[str] = None) -> ChatGroup:
        if owner.kind != "human":
            raise HubError("group owner must be a human member")
        gid = group_id or f"g{next(self._group_counter)}"
        if gid in self.groups:
            raise HubError(f"duplicate group id {gid!r}")
        owner = Member(owner.id, owner.display_name, "owner_user", "human")
        group = ChatGroup(id=gid, created_at=self._now_for(None))
        self.groups[gid] = group
        self._emit(group, BroadcastEvent("group_created", gid, group.next_seq(), self._now_for(group)))
        self._admit(group, owner)
        cascade = _Cascade(self, group)
        event = NormEvent(trigger="on_group_created", state=group.state)
        for norm_id, directives in match_norms(self.norms, event):
            cascade.execute_directives(norm_id, directives, utterance=None)
        cascade.drain()
        return group

    def join_group(self, group: ChatGroup, member: Member) -> BroadcastEvent:
        with group.lock:
            if not group.active:
                raise HubError("group has ended")
            if member.id in group.members:
                raise HubError(f"member {member.id!r} is already in the group")
            return self._admit(group, member)

    def leave_group(self, group: ChatGroup, member_id: str) -> BroadcastEvent:
        with group.lock:
            if member_id not in group.members:
                raise HubError(f"member {member_id!r} is not in the group")
            member = group.members.pop(member_id)
            event = BroadcastEvent(
                "member_left", group.id, group.next_seq(), self._now_for(group), member=member
            )
            self._emit(group, event)
            humans_left = any(m.kind == "human" for m in group.members.values())
            if not humans_left and group.active:
                self._end_group(group)
            return event

    def _admit(self, group: ChatGroup, member: Member) -> BroadcastEvent:
        group.members[member.id] = member
        group.deliveries.setdefault(member.id, [])
        event = BroadcastEvent("member_joined", group.id, group.next_seq(), self._now_for(group), member=member)
        self._emit(group, event)
        return event

    def _end_group(self, group: ChatGroup) -> None:
        cascade = _Cascade(self, group)
        event = NormEvent(trigger="on_group_end", state=group.state)
        for norm_id, directives in match_norms(self.norms, event):
            cascade.execute_directives(norm_id, directives, utterance=None)
        cascade.drain()
        if group.ended_at is None:
            # the norm set may register the end itself; make sure it is set
            group.ended_at = self._now_for(group)
        self._emit(group, BroadcastEvent("group_ended", group.id, group.next_seq(), self._now_for(group)))

    def register_end(self, group: ChatGroup) -> None:
        if group.ended_at is None:
            group.ended_at = self._now_for(group)
            self.services.context.log_event(group.id, "group_end", {"ended_at": group.ended_at}, group.ended_at)
            self.services.context.snapshot(group.id)  # persist when a directory is configured

    # ------------------------------------------------------------------
    # Posting
    # ------------------------------------------------------------------

    def post_utterance(
        self,
        group: ChatGroup,
        sender_id: str,
        text: str,
        reply_to: Optional[str] = None,
        tree: Optional[Mapping] = None,
        declared: Optional[Reply] = None,
    ):
        """Norm-gate, broadcast and react to one utterance.

        Bot replies pass their Reply as ``declared`` so their annotations
        carry the intent the bot committed to instead of a re-classification.
        """
        with group.lock:
            if not group.active:
                return Rejected("group has ended")
            if sender_id not in group.members:
                return Rejected("not a member")
            utterance = self._annotate(group, sender_id, text, reply_to, tree, declared)
            if self.event_detector is not None:
                self.event_detector(utterance)
            slot_names = self._slot_names(group, utterance)
            decision = enforce_send(self.norms, utterance, group.state, slot_names)
            if not decision:
                return Rejected(decision.reason or "blocked")
            cascade = _Cascade(self, group)
            accepted = cascade.broadcast(utterance)
            cascade.drain()
            return accepted

    # ------------------------------------------------------------------
    # Annotation
    # ------------------------------------------------------------------

    def _annotate(
        self,
        group: ChatGroup,
        sender_id: str,
        text: str,
        reply_to: Optional[str],
        tree_obj: Optional[Mapping] = None,
        declared: Optional[Reply] = None,
    ) -> Utterance:
        if reply_to is not None and reply_to not in group.utterances:
            reply_to = None  # only earlier utterances of this group are citable
        ann = Annotations()
        normalized = nlu.normalize_numbers(text)
        ann.mentions = self._mentions(group, text)
        ann.topic = nlu.classify_topic(normalized.converted, self.topic_lexicon)
        if declared is not None and declared.speech_act:
            ann.speech_act = declared.speech_act
        else:
            ann.speech_act = nlu.classify_speech_act(normalized.converted, self.speech_act_rules)
        if tree_obj is not None:
            tree = nlu.ingest_tree(tree_obj)
        else:
            tree = nlu.parse_dependencies(normalized.converted) if normalized.converted.strip() else None
        if tree is not None:
            parse = nlu.frame_parse(
                normalized,
                tree,
                verbs=self.investment_verbs,
                default_currency=self.services.rates.currency if self.services.rates else "BRL",
            )
            ann.slot_deltas = parse.deltas
            canonical = parse.canonical_text
        else:
            canonical = normalized.converted
        ann.canonical_text = self._strip_mentions(group, canonical)

        if declared is not None:
            ann.intent_class = declared.intent_class
            ann.template_id = declared.template_id
            ann.understood_by = (sender_id,)
        else:
            # understanding is a roster-wide capability, not a presence question
            understood = []
            for bot_id, bot in self.roster.items():
                if bot.classify(ann.canonical_text, ann.speech_act) is not None:
                    understood.append(bot_id)
            ann.understood_by = tuple(understood)
            responsible = self._responsible_bot(group, ann)
            if responsible is not None:
                ann.intent_class = responsible.classify(ann.canonical_text, ann.speech_act)

        utterance = Utterance(
            id="",  # assigned at broadcast
            group_id=group.id,
            sender=sender_id,
            text=text,
            reply_to=reply_to,
            timestamp=0,
            annotations=ann,
        )
        return utterance

    def _mentions(self, group: ChatGroup, text: str) -> tuple[str, ...]:
        by_name = {}
        for member in group.members.values():
            by_name[member.id.lower()] = member.id
            by_name[member.display_name.lower()] = member.id
        for bot_id, bot in self.roster.items():
            by_name.setdefault(bot_id.lower(), bot_id)
            by_name.setdefault(bot.member.display_name.lower(), bot_id)
        found = []
        for raw in _MENTION_RE.findall(text):
            member_id = by_name.get(raw.lower())
            if member_id and member_id not in found:
                found.append(member_id)
        return tuple(found)

    def _strip_mentions(self, group: ChatGroup, text: str) -> str:
        tokens = re.findall(r"@\w+|#\w+|\w+|[^\w\s]", text)
        out: list[str] = []
        for tok in tokens:
            if tok.startswith("@"):
                # drop the mention and any connector just before it
                while out and out[-1] in (",", "and", ":"):
                    out.pop()
                continue
            if tok in (",", ":") and not out:
                continue
            if tok == "and" and not out:
                continue
            out.append(tok)
        joined = ""
        for tok in out:
            if joined and re.match(r"\w|#", tok):
                joined += " "
            joined += tok
        return joined.strip()

    def _responsible_bot(self, group: ChatGroup, ann: Annotations) -> Optional[ChatBot]:
        """Mention beats topic ownership beats the mediator default."""
        for mention in ann.mentions:
            bot = self.roster.get(mention)
            if bot is not None:
                return bot
        if ann.topic:
            for bot in self.roster.values():
                if ann.topic in bot.topics and bot.member.role != "mediator":
                    return bot
        for member in group.members.values():
            if member.role == "mediator":
                return self.roster.get(member.id)
        return None

    def _slot_names(self, group: ChatGroup, utterance: Optional[Utterance]) -> frozenset[str]:
        names = set(self.services.context.group(group.id).frame.names())
        if utterance is not None:
            names |= set(utterance.annotations.slot_deltas)
        return frozenset(names)

    # ------------------------------------------------------------------
    # Delivery
    # ------------------------------------------------------------------

    def _now_for(self, group: Optional[ChatGroup]) -> int:
        now = self.clock()
        if group is not None:
            now = max(now, group.last_ts)  # per-group monotonic timestamps
            group.last_ts = now
        return now

    def _emit(self, group: ChatGroup, event: BroadcastEvent) -> None:
        group.events.append(event)
        for member_id in group.members:
            group.deliveries[member_id].append(event.seq)
        for cb in self.subscribers.get(group.id, ()):  # wire listeners
            cb(event)
        if self.global_subscriber:
            self.global_subscriber(event)

    def subscribe(self, group_id: str, callback: Callable[[BroadcastEvent], None]) -> None:
        self.subscribers.setdefault(group_id, []).append(callback)

    def unsubscribe(self, group_id: str, callback: Callable[[BroadcastEvent], None]) -> None:
        if group_id in self.subscribers and callback in self.subscribers[group_id]:
            self.subscribers[group_id].remove(callback)

    def mediator_member(self, group: ChatGroup) -> Optional[Member]:
        for member in group.members.values():
            if member.role == "mediator":
                return member
        return None

    def owner_member(self, group: ChatGroup) -> Optional[Member]:
        for member in group.members.values():
            if member.role == "owner_user":
                return member
        return None


class _Cascade:
    """One group's synchronous reaction run: FIFO over posted utterances."""

    def __init__(self, hub: Hub, group: ChatGroup):
        self.hub = hub
        self.group = group
        self.queue: list[Utterance] = []
        self.waits: dict[str, _Wait] = {}
        self.recipients: dict[str, list[str]] = {}  # utterance id -> members at broadcast

    # -- posting -----------------------------------------------------------

    def broadcast(self, utterance: Utterance) -> Accepted:
        group = self.group
        seq = group.next_seq()
        utterance.id = f"{group.id}-u{seq}"
        utterance.timestamp = self.hub._now_for(group)
        group.utterances[utterance.id] = utterance
        group.state.topic = utterance.annotations.topic
        group.state.last_annotations = utterance.annotations
        event = BroadcastEvent(
            "utterance", group.id, seq, utterance.timestamp, utterance=utterance,
            member=group.members.get(utterance.sender),
        )
        # members who receive this broadcast: those present right now
        self.recipients[utterance.id] = [m.id for m in group.members.values()]
        self.hub._emit(group, event)
        self.hub.services.context.log_event(
            group.id,
            "utterance",
            {"id": utterance.id, "sender": utterance.sender, "text": utterance.text, "seq": seq},
            utterance.timestamp,
        )
        self.queue.append(utterance)
        return Accepted(utterance.id, seq)

    def post_reply(self, sender_id: str, reply: Reply, reply_to: Optional[Utterance]) -> None:
        if sender_id not in self.group.members:
            return
        utterance = self.hub._annotate(
            self.group, sender_id, reply.text, reply_to.id if reply_to else None, declared=reply
        )
        decision = enforce_send(
            self.hub.norms, utterance, self.group.state, self.hub._slot_names(self.group, utterance)
        )
        if decision:
            self.broadcast(utterance)

    # -- reaction loop -------------------------------------------------------

    def drain(self) -> None:
        while self.queue or self.waits:
            while self.queue:
                utterance = self.queue.pop(0)
                self._react(utterance)
            self._resolve_waits()

    def _react(self, utterance: Utterance) -> None:
        group = self.group
        event = NormEvent(
            trigger="on_utterance",
            state=group.state,
            utterance=utterance,
            slot_names=self.hub._slot_names(group, utterance),
        )
        matches = match_norms(self.hub.norms, event)

        # an awaited member posting counts as its reply (recorded before
        # directives run so stop_wait sees the completed set)
        if utterance.sender in group.state.awaiting:
            group.state.replied.add(utterance.sender)

        handled: list[str] = []
        coordinated = False
        for norm_id, directives in matches:
            got_handled, got_coordinated = self.execute_directives(norm_id, directives, utterance)
            handled.extend(m for m in got_handled if m not in handled)
            coordinated = coordinated or got_coordinated

        self._dispatch_pipelines(utterance, handled, coordinated)

    def _dispatch_pipelines(self, utterance: Utterance, handled: list[str], coordinated: bool) -> None:
        group = self.group
        recipients = self.recipients.get(utterance.id, [m.id for m in group.members.values()])
        sender = group.members.get(utterance.sender)
        replied_to_intent = None
        if utterance.reply_to and utterance.reply_to in group.utterances:
            replied_to_intent = group.utterances[utterance.reply_to].annotations.intent_class
        for member_id in recipients:
            member = group.members.get(member_id)
            if member is None or not member.is_bot:
                continue
            bot = self.hub.roster.get(member_id)
            if bot is None:
                continue
            if not bot.should_act(utterance, sender, member_id in handled, coordinated):
                continue
            result = bot.handle(
                utterance,
                replied_to_intent,
                group.id,
                pending_slots=utterance.annotations.slot_deltas,
            )
            for reply in result.replies:
                self.post_reply(member_id, reply, utterance)

    # -- directives -----------------------------------------------------------

    def execute_directives(
        self, norm_id: str, directives: list[Directive], utterance: Optional[Utterance]
    ) -> tuple[list[str], bool]:
        handled: list[str] = []
        coordinated = False
        for directive in directives:
            kind = directive.kind
            if kind == "invite":
                self._invite(directive.args)
            elif kind == "forward":
                self._forward(directive.args, utterance)
                coordinated = True
            elif kind == "reply":
                self._reply(directive.args, utterance)
                if len(directive.args) < 2 or directive.args[1] == "mediator":
                    coordinated = True
            elif kind == "ask_missing":
                if self._ask_missing(directive.args, utterance):
                    coordinated = True
            elif kind == "wait_for":
                self._wait_for(directive.args, utterance, norm_id)
            elif kind == "handle":
                for member_id in self._resolve_members(directive.args, utterance):
                    if member_id not in handled:
                        handled.append(member_id)
            elif kind == "stop_wait":
                self.group.state.awaiting.clear()
                self.group.state.replied.clear()
                self.waits.clear()
            elif kind == "save_slots":
                self._save_slots(utterance)
            elif kind == "compare_and_inform":
                self._compare_and_inform(utterance)
                coordinated = True
            elif kind == "leave_all":
                self._leave_all()
            elif kind == "register_end":
                self.hub.register_end(self.group)
            elif kind == "block":
                pass  # effective in enforce_send, inert here
            else:
                raise AssertionError(f"unhandled directive {kind}")
        return handled, coordinated

    def _resolve_members(self, args: Iterable[str], utterance: Optional[Utterance]) -> list[str]:
        state = self.group.state
        out: list[str] = []

        def add(member_id: str) -> None:
            if member_id not in out:
                out.append(member_id)

        for arg in args:
            if arg == "experts":
                for bot_id, bot in self.hub.roster.items():
                    if bot.member.role == "expert_bot":
                        add(bot_id)
            elif arg == "all_bots":
                for member in state.members.values():
                    if member.is_bot:
                        add(member.id)
            elif arg == "mentioned":
                if utterance is not None:
                    for mention in utterance.annotations.mentions:
                        if mention in self.hub.roster:
                            add(mention)
            elif arg == "topic_owner":
                topic = utterance.annotations.topic if utterance else state.topic
                if topic:
                    for bot_id, bot in self.hub.roster.items():
                        if topic in bot.topics:
                            add(bot_id)
            elif arg == "sender":
                if utterance is not None:
                    add(utterance.sender)
            elif not arg.isdigit():
                add(arg)
        return out

    def _invite(self, args: Iterable[str]) -> None:
        for member_id in self._resolve_members(args, None):
            if member_id in self.group.members:
                continue
            bot = self.hub.roster.get(member_id)
            if bot is None:
                continue
            self.hub._admit(self.group, bot.member)

    def _mediator_id(self) -> Optional[str]:
        member = self.hub.mediator_member(self.group)
        return member.id if member else None

    def _forward(self, args: tuple[str, ...], utterance: Optional[Utterance]) -> None:
        if utterance is None:
            return
        mediator_id = self._mediator_id()
        if mediator_id is None:
            return
        targets = self._resolve_members([args[0]], utterance)
        targets = [t for t in targets if t in self.group.members and t != utterance.sender]
        if not targets:
            return
        template_id = args[1] if len(args) > 1 else "forward_topic"
        mentions = " and ".join(f"@{self.group.members[t].display_name}" for t in targets)
        value = self._merged_slot(utterance, "initial_value")
        period = self._merged_slot(utterance, "period")
        reply = Reply(
            text=self.hub.services.templates.render(
                template_id,
                mentions=mentions,
                text=utterance.text,
                value=f"{float(value.value):g}" if value else "{value}",
                period=period.render() if period else "{period}",
            ),
            intent_class=utterance.annotations.intent_class,
            speech_act=utterance.annotations.speech_act,
            template_id=template_id,
            addressed_to=tuple(targets),
        )
        self.post_reply(mediator_id, reply, utterance)

    def _merged_slot(self, utterance: Optional[Utterance], name: str) -> Optional[SlotValue]:
        if utterance is not None and name in utterance.annotations.slot_deltas:
            return utterance.annotations.slot_deltas[name]
        return self.hub.services.context.get_slot(self.group.id, name)

    def _reply(self, args: tuple[str, ...], utterance: Optional[Utterance]) -> None:
        template_id = args[0]
        actor_arg = args[1] if len(args) > 1 else "mediator"
        if actor_arg == "mediator":
            actors = [self._mediator_id()] if self._mediator_id() else []
        else:
            actors = self._resolve_members([actor_arg], utterance)
        owner = self.hub.owner_member(self.group)
        topics = sorted(
            {t for bot_id in self.group.members for t in getattr(self.hub.roster.get(bot_id), "topics", ())}
            - {"other"}
        )
        for actor in actors:
            if actor is None or actor not in self.group.members:
                continue
            reply = Reply(
                text=self.hub.services.templates.render(
                    template_id,
                    user=owner.display_name if owner else "there",
                    topics=", ".join(topics) if topics else "my topics",
                ),
                intent_class=None,
                speech_act=None,
                template_id=template_id,
            )
            self.post_reply(actor, reply, utterance)

    def _ask_missing(self, args: tuple[str, ...], utterance: Optional[Utterance]) -> bool:
        mediator_id = self._mediator_id()
        if mediator_id is None or utterance is None:
            return False
        slots = list(args) if args else ["initial_value", "period"]
        names = self.hub._slot_names(self.group, utterance)
        missing = [s for s in slots if s not in names]
        if not missing:
            return False
        slot = missing[0]
        bindings = self.hub.roster[mediator_id].bindings if mediator_id in self.hub.roster else None
        ask_intent = bindings.slot_questions.get(slot) if bindings else None
        template_id = ask_intent or f"ask_{slot}"
        reply = Reply(
            text=self.hub.services.templates.render(template_id, slot=slot),
            intent_class=ask_intent,
            speech_act="QUERY",
            template_id=template_id,
        )
        self.post_reply(mediator_id, reply, utterance)
        return True

    def _wait_for(self, args: tuple[str, ...], utterance: Optional[Utterance], norm_id: str) -> None:
        timeout_ms = 10_000
        member_args = []
        for arg in args:
            if arg.isdigit():
                timeout_ms = int(arg)
            else:
                member_args.append(arg)
        deadline = self.hub.clock() + timeout_ms
        for member_id in self._resolve_members(member_args, utterance):
            if member_id not in self.group.members:
                continue
            self.group.state.awaiting[member_id] = deadline
            if utterance is not None:
                self.waits[member_id] = _Wait(member_id, deadline, utterance)

    def _save_slots(self, utterance: Optional[Utterance]) -> None:
        if utterance is None:
            return
        writer = self._mediator_id() or utterance.sender
        for name, value in utterance.annotations.slot_deltas.items():
            try:
                self.hub.services.context.put_slot(
                    self.group.id, name, value, writer=writer, timestamp=utterance.timestamp
                )
            except KeyError:
                continue  # undeclared slots are not persisted

    def _compare_and_inform(self, utterance: Optional[Utterance]) -> None:
        mediator_id = self._mediator_id()
        if mediator_id is None:
            return
        owner = self.hub.owner_member(self.group)
        replies = run_comparison(
            self.hub.services,
            self.group.id,
            owner_display=owner.display_name if owner else "User",
            timestamp=utterance.timestamp if utterance else self.hub.clock(),
            writer=mediator_id,
        )
        for reply in replies:
            self.post_reply(mediator_id, reply, utterance)

    def _leave_all(self) -> None:
        for member in list(self.group.members.values()):
            if member.is_bot:
                self.group.members.pop(member.id, None)
                event = BroadcastEvent(
                    "member_left", self.group.id, self.group.next_seq(),
                    self.hub._now_for(self.group), member=member,
                )
                self.hub._emit(self.group, event)

    # -- waits ------------------------------------------------------------------

    def _resolve_waits(self) -> None:
        """Fire on_timeout for awaited members that stayed silent.

        The cascade has quiesced: nothing else can produce their reply, so
        the wait resolves now regardless of the configured deadline.
        """
        state = self.group.state
        expired = [m for m in list(state.awaiting) if m not in state.replied]
        finished = [m for m in list(state.awaiting) if m in state.replied]
        for member_id in finished:
            state.awaiting.pop(member_id, None)
            state.replied.discard(member_id)
            self.waits.pop(member_id, None)
        if not expired:
            return
        for member_id in expired:
            wait = self.waits.pop(member_id, None)
            state.awaiting.pop(member_id, None)
            event = NormEvent(
                trigger="on_timeout",
                state=state,
                utterance=wait.utterance if wait else None,
                slot_names=self.hub._slot_names(self.group, wait.utterance if wait else None),
                timed_out=(member_id,),
            )
            for norm_id, directives in match_norms(self.hub.norms, event):
                self.execute_directives(norm_id, directives, wait.utterance if wait else None)
