"""Acting phase: map intents to action specs, execute actions, and run each
bot's parse -> filter -> act pipeline for one broadcast utterance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import finance, nlu
from .context import ContextStore
from .core import (
    ActionSpec,
    Annotations,
    IntentFlow,
    IntentRegistry,
    Member,
    SlotValue,
    Utterance,
    missing_slots,
    next_intent,
)


class _TemplateParams(dict):
    def __missing__(self, key):  # leave unknown placeholders visible
        return "{" + key + "}"


class TemplateSet:
    """Reply templates keyed by id, with {placeholder} interpolation."""

    def __init__(self, templates: Mapping[str, str]):
        self.templates = dict(templates)

    @staticmethod
    def load(path: str) -> "TemplateSet":
        with open(path, "r", encoding="utf-8") as fh:
            return TemplateSet(json.load(fh))

    def __contains__(self, template_id: str) -> bool:
        return template_id in self.templates

    def render(self, template_id: str, overrides: Optional[Mapping[str, str]] = None, **params) -> str:
        text = (overrides or {}).get(template_id) or self.templates.get(template_id)
        if text is None:
            raise KeyError(f"unknown template {template_id!r}")
        merged = _TemplateParams(params)
        return text.format_map(merged)


@dataclass
class ActionBindings:
    """Incoming intent class -> action spec."""

    by_intent: dict[str, ActionSpec] = field(default_factory=dict)
    slot_questions: dict[str, str] = field(default_factory=dict)  # slot -> ask intent

    @staticmethod
    def from_json(obj: Mapping) -> "ActionBindings":
        bindings = ActionBindings(slot_questions=dict(obj.get("slot_questions", {})))
        for row in obj.get("bindings", ()):
            bindings.by_intent[row["intent"]] = ActionSpec(
                answer_intent=row.get("answer_intent"),
                speech_act=row.get("answer_speech_act"),
                required_entities=tuple(row.get("entities", ())),
                required_features=tuple(row.get("features", ())),
                action_class=row["action_class"],
            )
        return bindings

    @staticmethod
    def load(path: str) -> "ActionBindings":
        with open(path, "r", encoding="utf-8") as fh:
            return ActionBindings.from_json(json.load(fh))


NO_ACTION = ActionSpec(answer_intent=None, speech_act=None, action_class="NoAction")


def classify_action(intent_class: Optional[str], bindings: ActionBindings) -> ActionSpec:
    """Bound action spec for an intent; unknown intents do nothing."""
    if intent_class is None:
        return NO_ACTION
    return bindings.by_intent.get(intent_class, NO_ACTION)


@dataclass
class Reply:
    text: str
    intent_class: Optional[str]
    speech_act: Optional[str]
    template_id: Optional[str] = None
    addressed_to: tuple[str, ...] = ()


@dataclass
class BotServices:
    """Domain services a bot may call while acting."""

    templates: TemplateSet
    context: ContextStore
    definitions: Optional[finance.DefinitionCorpus] = None
    news: Optional[finance.NewsCorpus] = None
    rates: Optional[finance.RatesProfile] = None
    topic_lexicon: Optional[nlu.TopicLexicon] = None


@dataclass
class PipelineResult:
    replies: list[Reply]
    understood: bool
    intent_class: Optional[str] = None


class ChatBot:
    """One bot member: its NLU models, topic ownership and action bindings."""

    def __init__(
        self,
        member: Member,
        topics: Sequence[str],
        intents: Sequence[str],
        trainset: Optional[nlu.TrainingSet],
        embeddings: nlu.Embeddings,
        bindings: ActionBindings,
        flow: IntentFlow,
        registry: IntentRegistry,
        services: BotServices,
        rapport_intents: Optional[Mapping[str, str]] = None,
        template_overrides: Optional[Mapping[str, str]] = None,
        compute_option: Optional[str] = None,
        distance_threshold: float = 0.5,
    ):
        self.member = member
        self.topics = set(topics)
        self.intents = set(intents)
        self.embeddings = embeddings
        self.trainset = trainset.restricted_to(self.intents & trainset.classes()) if trainset else None
        self.bindings = bindings
        self.flow = flow
        self.registry = registry
        self.services = services
        self.rapport_intents = dict(rapport_intents or {})
        self.template_overrides = dict(template_overrides or {})
        self.compute_option = compute_option
        self.distance_threshold = distance_threshold

    @property
    def id(self) -> str:
        return self.member.id

    # -- parse ---------------------------------------------------------------

    def classify(self, canonical_text: str, speech_act: Optional[str]) -> Optional[str]:
        """Intent of an utterance as this bot understands it, or None.

        Rapport speech acts map directly to their intent. Otherwise the
        nearest-neighbour class must sit within the distance threshold and
        its registered speech act must agree with the utterance's.
        """
        if speech_act in self.rapport_intents:
            intent = self.rapport_intents[speech_act]
            return intent if intent in self.intents else None
        if self.trainset is None:
            return None
        vec = nlu.mean_vector(nlu.tokenize(canonical_text), self.embeddings)
        if vec is None:
            return None
        norm = np.linalg.norm(vec)
        if norm == 0:
            return None
        prediction = nlu.classify_intent(vec / norm, self.trainset)
        if prediction.distance > self.distance_threshold:
            return None
        if prediction.intent_class not in self.intents:
            return None
        registered = self.registry.get(prediction.intent_class)
        if registered is not None and speech_act is not None and registered.speech_act != speech_act:
            return None
        return prediction.intent_class

    # -- filter ---------------------------------------------------------------

    def should_act(
        self,
        utterance: Utterance,
        sender: Optional[Member],
        handled: bool,
        mediator_coordinated: bool,
    ) -> bool:
        """The who-replies decision: mention, norm direction, then topic
        ownership over human utterances; silence is the default.
        """
        if utterance.sender == self.id:
            return False
        ann = utterance.annotations
        if self.id in ann.mentions:
            return True
        if handled:
            return True
        if mediator_coordinated and self.member.role == "mediator":
            # the mediator already answered through its coordination moves
            return False
        if sender is not None and not sender.is_bot and ann.topic:
            owned = self._owns_topic(ann.topic)
            if owned and not (set(ann.mentions) - {self.id}):
                return True
        return False

    def _owns_topic(self, topic: str) -> bool:
        if topic in self.topics:
            return True
        lexicon = self.services.topic_lexicon
        if lexicon is not None:
            return bool(lexicon.implied_by(topic) & self.topics)
        return False

    # -- act -------------------------------------------------------------------

    def handle(
        self,
        utterance: Utterance,
        replied_to_intent: Optional[str],
        group_id: str,
        pending_slots: Optional[Mapping[str, SlotValue]] = None,
    ) -> PipelineResult:
        """Full act phase for one utterance this bot decided to answer."""
        ann = utterance.annotations
        intent = self.classify(ann.canonical_text or utterance.text, ann.speech_act)
        if intent is None:
            return PipelineResult(replies=[], understood=False)
        answer_intent = next_intent(self.flow, intent, replied_to_intent)
        if answer_intent is None:
            # understood, but the flow has no answer for this pair: stay silent
            return PipelineResult(replies=[], understood=True, intent_class=intent)
        spec = classify_action(intent, self.bindings)
        replies = execute_action(
            spec,
            ActionInvocation(
                bot=self,
                utterance=utterance,
                answer_intent=answer_intent,
                group_id=group_id,
                pending_slots=dict(pending_slots or {}),
            ),
        )
        return PipelineResult(replies=replies, understood=True, intent_class=intent)


@dataclass
class ActionInvocation:
    bot: ChatBot
    utterance: Utterance
    answer_intent: Optional[str]
    group_id: str
    pending_slots: dict[str, SlotValue] = field(default_factory=dict)

    def merged_slot(self, name: str) -> Optional[SlotValue]:
        if name in self.pending_slots:
            return self.pending_slots[name]
        return self.bot.services.context.get_slot(self.group_id, name)


def _answer_speech_act(bot: ChatBot, spec: ActionSpec, answer_intent: Optional[str]) -> Optional[str]:
    if answer_intent is not None:
        registered = bot.registry.get(answer_intent)
        if registered is not None:
            return registered.speech_act
    return spec.speech_act


def _template_reply(
    bot: ChatBot,
    template_id: str,
    intent: Optional[str],
    speech_act: Optional[str],
    addressed_to: tuple[str, ...] = (),
    **params,
) -> Reply:
    text = bot.services.templates.render(template_id, overrides=bot.template_overrides, **params)
    return Reply(
        text=text,
        intent_class=intent,
        speech_act=speech_act,
        template_id=template_id,
        addressed_to=addressed_to,
    )


def execute_action(spec: ActionSpec, call: ActionInvocation) -> list[Reply]:
    """Produce the replies for one classified action.

    Rapport actions echo the greeting class. Definition lookups fall back to
    the news search, then to a refusal. Compute loads the period and initial
    value from context and runs the bot's own return-of-investment formula;
    a service failure surfaces as a FAILURE reply.
    """
    bot = call.bot
    act_class = spec.action_class
    answer_intent = call.answer_intent or spec.answer_intent
    speech_act = _answer_speech_act(bot, spec, answer_intent)

    if act_class == "NoAction":
        return []

    if act_class in ("Greet", "Thank", "Bye"):
        template_id = answer_intent or {"Greet": "greet_back", "Thank": "youre_welcome", "Bye": "bye_back"}[act_class]
        if act_class in ("Greet", "Bye"):
            # rapport: echo the greeting class the user used, not fixed text
            echo = _rapport_echo(call.utterance.text, act_class)
            if echo is not None:
                return [
                    Reply(
                        text=echo,
                        intent_class=answer_intent,
                        speech_act=speech_act,
                        template_id=template_id,
                    )
                ]
        return [_template_reply(bot, template_id, answer_intent, speech_act)]

    if act_class == "GetDefinition":
        entry = None
        if bot.services.definitions is not None:
            entry = finance.lookup_definition(call.utterance.text, bot.services.definitions)
        if entry is not None:
            return [
                Reply(
                    text=entry.text,
                    intent_class=answer_intent,
                    speech_act=speech_act,
                    template_id=f"definition_{entry.term}",
                )
            ]
        news_replies = _search_news_replies(bot, call, answer_intent)
        if news_replies:
            return news_replies
        return [_template_reply(bot, "refuse", None, "REFUSE")]

    if act_class == "SearchNews":
        news_replies = _search_news_replies(bot, call, answer_intent)
        if news_replies:
            return news_replies
        return [_template_reply(bot, "refuse", None, "REFUSE")]

    if act_class == "Compute":
        missing = _missing_for(spec, call)
        if missing:
            return _ask_more_replies(bot, spec, call, missing)
        try:
            return _compute_replies(bot, call, answer_intent, speech_act)
        except Exception as exc:  # service failure -> FAILURE speech act
            return [_template_reply(bot, "failure", None, "FAILURE", error=str(exc))]

    if act_class == "AskMore":
        missing = _missing_for(spec, call)
        if not missing:
            return []
        return _ask_more_replies(bot, spec, call, missing)

    if act_class == "SendInformation":
        template_id = answer_intent or "send_information"
        return [_template_reply(bot, template_id, answer_intent, speech_act)]

    if act_class == "SendRefuse":
        return [_template_reply(bot, "refuse", answer_intent, speech_act or "REFUSE")]

    raise AssertionError(f"unhandled action class {act_class}")


_GREETING_PHRASES = ("good morning", "good afternoon", "good evening", "hello", "hi", "hey")
_BYE_PHRASES = ("see you", "goodbye", "bye", "farewell")


def _rapport_echo(text: str, act_class: str) -> Optional[str]:
    low = text.lower()
    phrases = _GREETING_PHRASES if act_class == "Greet" else _BYE_PHRASES
    for phrase in phrases:
        idx = low.find(phrase)
        if idx >= 0:
            found = text[idx : idx + len(phrase)]
            return found[0].upper() + found[1:]
    return None


def _missing_for(spec: ActionSpec, call: ActionInvocation) -> list[str]:
    frame = call.bot.services.context.group(call.group_id).frame
    return missing_slots(spec, frame, call.pending_slots)


def _ask_more_replies(bot: ChatBot, spec: ActionSpec, call: ActionInvocation, missing: list[str]) -> list[Reply]:
    slot = missing[0]
    ask_intent = bot.bindings.slot_questions.get(slot)
    template_id = ask_intent or f"ask_{slot}"
    speech_act = _answer_speech_act(bot, spec, ask_intent) or "QUERY"
    return [_template_reply(bot, template_id, ask_intent, speech_act, slot=slot)]


def _search_news_replies(bot: ChatBot, call: ActionInvocation, answer_intent: Optional[str]) -> list[Reply]:
    if bot.services.news is None:
        return []
    doc = finance.search_news(call.utterance.text, bot.services.news)
    if doc is None:
        return []
    speech_act = _answer_speech_act(bot, NO_ACTION, answer_intent) or "INFORM_NEWS"
    return [
        _template_reply(
            bot,
            "news_found",
            answer_intent,
            speech_act,
            post=doc.text,
            source=doc.source,
        )
    ]


def _format_amount(value: float) -> str:
    return f"{value:,.2f}"


def _compute_replies(
    bot: ChatBot, call: ActionInvocation, answer_intent: Optional[str], speech_act: Optional[str]
) -> list[Reply]:
    rates = bot.services.rates
    if rates is None or bot.compute_option is None:
        raise RuntimeError("compute service is not configured for this bot")
    value_slot = call.merged_slot("initial_value")
    period_slot = call.merged_slot("period")
    if value_slot is None or period_slot is None:
        raise RuntimeError("compute invoked with missing slots")
    amount = float(value_slot.value)
    days = period_slot.as_days()
    if days is None or days < 1:
        raise RuntimeError(f"period {period_slot!r} has no day equivalent")

    if bot.compute_option == "savings":
        final = finance.roi_savings(amount, rates.savings)
        option = "Savings Account"
    elif bot.compute_option == "cdb":
        final = finance.roi_cdb(amount, rates.cdb_params(days), mode=rates.mode)
        option = "CDB"
    else:
        raise RuntimeError(f"unknown compute option {bot.compute_option!r}")

    bot.services.context.put_slot(
        call.group_id,
        f"result_{bot.compute_option}",
        SlotValue(value=final, unit=rates.currency),
        writer=bot.id,
        timestamp=call.utterance.timestamp,
    )
    return [
        _template_reply(
            bot,
            "inform_calculation",
            answer_intent,
            speech_act or "INFORM_CALCULATION",
            option=option,
            result=_format_amount(final),
            value=_format_amount(amount),
            period=period_slot.render(),
        )
    ]


def run_comparison(
    services: BotServices,
    group_id: str,
    epsilon: Optional[float] = None,
    owner_display: str = "User",
    timestamp: int = 0,
    writer: str = "mediator",
) -> list[Reply]:
    """The compare-and-inform hook: thank the experts, then recommend.

    Reads the experts' saved results from context, clears them, and emits the
    thanks plus either a recommendation or the no-significant-difference
    notice. With a single result it reports only.
    """
    rates = services.rates
    eps = epsilon if epsilon is not None else (rates.epsilon if rates else 0.01)
    results = []
    for option, label in (("savings", "Savings Account"), ("cdb", "CDB")):
        slot = services.context.get_slot(group_id, f"result_{option}")
        if slot is not None:
            results.append(finance.SimulationResult(option=label, final_amount=float(slot.value)))
    if not results:
        return []
    for option in ("savings", "cdb"):
        services.context.clear_slot(group_id, f"result_{option}", writer=writer, timestamp=timestamp)

    comparison = finance.compare_results(results, epsilon=eps)
    thanks = Reply(
        text=services.templates.render("thanks_experts"),
        intent_class="thank_experts",
        speech_act="THANK",
        template_id="thanks_experts",
    )
    params = {
        "user": owner_display,
        "option": comparison.best.option,
        "result": _format_amount(comparison.best.final_amount),
    }
    if comparison.kind == "no_significant_difference":
        template_id = "compare_no_significant"
    elif comparison.kind == "report_only":
        template_id = "compare_report_only"
    else:
        template_id = "compare_better"
    verdict = Reply(
        text=services.templates.render(template_id, **params),
        intent_class="inform_comparison",
        speech_act="INFORM_CALCULATION",
        template_id=template_id,
        addressed_to=(),
    )
    return [thanks, verdict]
