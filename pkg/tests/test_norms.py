from __future__ import annotations

import json

import pytest

from parley.core import Annotations, Member, Utterance
from parley.demo import data_path
from parley.norms import (
    GroupState,
    NormEvent,
    NormLoadError,
    enforce_send,
    load_norms,
    load_norms_file,
    match_norms,
)

USER = Member("alice", "User", "owner_user", "human")
MEDIATOR = Member("mediator", "Mediator", "mediator", "bot")
SAVINGS = Member("savings_expert", "SavingsAccountExpert", "expert_bot", "bot")
CDB = Member("cdb_expert", "CDBExpert", "expert_bot", "bot")

ALL_NORM_IDS = [
    "mediator-joins-new-group",
    "invite-experts-for-topic",
    "topic-owner-handles",
    "stop-waiting-after-last-reply",
    "mentioned-expert-handles",
    "cover-silent-expert-calculation",
    "cover-silent-expert",
    "ask-missing-information",
    "invite-experts-for-calculation",
    "forward-calculation-to-experts",
    "save-calculation-context",
    "experts-compute-when-called",
    "compare-expert-results",
    "offer-help-on-bare-mention",
    "admit-ignorance-to-question",
    "admit-confusion",
    "everyone-returns-rapport",
    "close-the-chat",
]


@pytest.fixture(scope="module")
def norm_set():
    return load_norms_file(data_path("norms.json"))


def state(*members: Member, awaiting=(), replied=(), topic=None) -> GroupState:
    return GroupState(
        members={m.id: m for m in members},
        topic=topic,
        awaiting={m: 10**15 for m in awaiting},
        replied=set(replied),
    )


def utterance(
    sender: str,
    text: str = "",
    topic: str = "other",
    speech_act: str = "INFORM",
    mentions: tuple[str, ...] = (),
    understood_by: tuple[str, ...] = (),
) -> Utterance:
    return Utterance(
        id="u1",
        group_id="g",
        sender=sender,
        text=text,
        annotations=Annotations(
            topic=topic,
            speech_act=speech_act,
            mentions=mentions,
            understood_by=understood_by,
        ),
    )


def fired(norm_set, event) -> list[str]:
    return [norm_id for norm_id, _ in match_norms(norm_set, event)]


class TestLoading:
    def test_all_rows_load_in_file_order(self, norm_set):
        assert [n.id for n in norm_set.norms] == ALL_NORM_IDS
        assert len(norm_set) == 18

    def test_empty_document_is_valid(self):
        assert len(load_norms({"norms": []})) == 0

    def test_unknown_speech_act_named(self):
        doc = {
            "vocabulary": {"speech_acts": ["QUERY"], "topics": [], "members": [], "slots": []},
            "norms": [
                {
                    "id": "bad",
                    "trigger": "on_utterance",
                    "when": [{"kind": "speech_act_is", "args": ["FOO"]}],
                    "then": [{"kind": "save_slots", "args": []}],
                }
            ],
        }
        with pytest.raises(NormLoadError, match="FOO"):
            load_norms(doc)

    def test_unknown_predicate_kind(self):
        doc = {
            "norms": [
                {
                    "id": "bad",
                    "trigger": "on_utterance",
                    "when": [{"kind": "is_raining", "args": []}],
                    "then": [{"kind": "save_slots", "args": []}],
                }
            ]
        }
        with pytest.raises(NormLoadError, match="is_raining"):
            load_norms(doc)

    def test_unknown_directive_kind(self):
        doc = {
            "norms": [
                {"id": "bad", "trigger": "on_utterance", "when": [], "then": [{"kind": "explode"}]}
            ]
        }
        with pytest.raises(NormLoadError, match="explode"):
            load_norms(doc)

    def test_unknown_trigger(self):
        doc = {"norms": [{"id": "bad", "trigger": "on_rain", "when": [], "then": [{"kind": "save_slots"}]}]}
        with pytest.raises(NormLoadError, match="on_rain"):
            load_norms(doc)

    def test_empty_behaviors_rejected(self):
        doc = {"norms": [{"id": "bad", "trigger": "on_utterance", "when": [], "then": []}]}
        with pytest.raises(NormLoadError, match="non-empty"):
            load_norms(doc)

    def test_duplicate_id_rejected(self):
        row = {"id": "dup", "trigger": "on_utterance", "when": [], "then": [{"kind": "save_slots"}]}
        with pytest.raises(NormLoadError, match="dup"):
            load_norms({"norms": [row, dict(row)]})

    def test_bad_json_text(self):
        with pytest.raises(NormLoadError):
            load_norms("{not json")


class TestRowScenarios:
    """One scenario per norm row: the row fires and nothing unexpected does."""

    def test_row01_mediator_joins_on_creation(self, norm_set):
        event = NormEvent(trigger="on_group_created", state=state(USER))
        assert fired(norm_set, event) == ["mediator-joins-new-group"]
        directives = dict(match_norms(norm_set, event))["mediator-joins-new-group"]
        assert [(d.kind, d.args) for d in directives] == [("invite", ("mediator",))]

    def test_row02_invite_experts_when_absent(self, norm_set):
        utt = utterance(
            "alice", "what is cdb?", topic="cdb", speech_act="QUERY_DEFINITION",
            understood_by=("cdb_expert",),
        )
        event = NormEvent(trigger="on_utterance", state=state(USER, MEDIATOR), utterance=utt)
        assert fired(norm_set, event) == ["invite-experts-for-topic"]
        directives = dict(match_norms(norm_set, event))["invite-experts-for-topic"]
        assert [d.kind for d in directives] == ["invite", "forward"]
        assert directives[0].args == ("savings_expert", "cdb_expert")

    def test_row03_topic_owner_handles_when_present(self, norm_set):
        utt = utterance(
            "alice", "what is cdb?", topic="cdb", speech_act="QUERY_DEFINITION",
            understood_by=("cdb_expert",),
        )
        event = NormEvent(
            trigger="on_utterance", state=state(USER, MEDIATOR, SAVINGS, CDB), utterance=utt
        )
        assert fired(norm_set, event) == ["topic-owner-handles"]
        directives = dict(match_norms(norm_set, event))["topic-owner-handles"]
        assert [d.kind for d in directives] == ["wait_for", "handle"]

    def test_row04_stop_waiting_after_last_reply(self, norm_set):
        utt = utterance(
            "cdb_expert", "CDB is a type of investment...", topic="cdb",
            speech_act="INFORM_DEFINITION", understood_by=("cdb_expert",),
        )
        event = NormEvent(
            trigger="on_utterance",
            state=state(USER, MEDIATOR, SAVINGS, CDB, awaiting=("cdb_expert",)),
            utterance=utt,
        )
        assert fired(norm_set, event) == ["stop-waiting-after-last-reply"]

    def test_row04_waits_for_remaining_expert(self, norm_set):
        utt = utterance(
            "savings_expert", "If you invest...", speech_act="INFORM_CALCULATION",
            understood_by=("savings_expert",),
        )
        event = NormEvent(
            trigger="on_utterance",
            state=state(USER, MEDIATOR, SAVINGS, CDB, awaiting=("savings_expert", "cdb_expert")),
            utterance=utt,
        )
        assert fired(norm_set, event) == []  # one reply still outstanding

    def test_row05_mentioned_expert_handles(self, norm_set):
        utt = utterance(
            "alice", "@CDBExpert can you help me with this?", topic="other",
            speech_act="QUERY", mentions=("cdb_expert",), understood_by=("cdb_expert",),
        )
        event = NormEvent(
            trigger="on_utterance", state=state(USER, MEDIATOR, SAVINGS, CDB), utterance=utt
        )
        assert fired(norm_set, event) == ["mentioned-expert-handles"]

    def test_row06_mediator_covers_silent_expert_on_calculation(self, norm_set):
        utt = utterance(
            "alice", "@CDBExpert what if i invest 10 in 2 years?", topic="finance",
            speech_act="QUERY_CALCULATION", mentions=("cdb_expert",),
        )
        event = NormEvent(
            trigger="on_timeout",
            state=state(USER, MEDIATOR, SAVINGS, CDB),
            utterance=utt,
            timed_out=("cdb_expert",),
        )
        assert fired(norm_set, event) == ["cover-silent-expert-calculation"]
        directives = dict(match_norms(norm_set, event))["cover-silent-expert-calculation"]
        assert directives[0].args[0] == "refuse_investments_only"

    def test_row07_mediator_covers_silent_expert_otherwise(self, norm_set):
        utt = utterance(
            "alice", "@CDBExpert flibber?", topic="other",
            speech_act="QUERY", mentions=("cdb_expert",),
        )
        event = NormEvent(
            trigger="on_timeout",
            state=state(USER, MEDIATOR, SAVINGS, CDB),
            utterance=utt,
            timed_out=("cdb_expert",),
        )
        assert fired(norm_set, event) == ["cover-silent-expert"]
        directives = dict(match_norms(norm_set, event))["cover-silent-expert"]
        assert directives[0].args[0] == "didnt_understand"

    def test_row08_ask_missing_information(self, norm_set):
        utt = utterance(
            "alice", "i would like to invest 50", topic="finance",
            speech_act="QUERY_CALCULATION", understood_by=("mediator",),
        )
        event = NormEvent(
            trigger="on_utterance",
            state=state(USER, MEDIATOR, SAVINGS, CDB),
            utterance=utt,
            slot_names=frozenset({"initial_value"}),
        )
        # the context-saving row always accompanies a calculation query
        assert fired(norm_set, event) == ["ask-missing-information", "save-calculation-context"]

    def test_row09_invite_experts_for_calculation(self, norm_set):
        utt = utterance(
            "alice", "i would like to invest 50 in 6 months", topic="finance",
            speech_act="QUERY_CALCULATION", understood_by=("mediator",),
        )
        event = NormEvent(
            trigger="on_utterance",
            state=state(USER, MEDIATOR),
            utterance=utt,
            slot_names=frozenset({"initial_value", "period"}),
        )
        assert fired(norm_set, event) == ["invite-experts-for-calculation", "save-calculation-context"]

    def test_row10_forward_calculation_when_present(self, norm_set):
        utt = utterance(
            "alice", "so i want to invest 10000 in 2 years", topic="finance",
            speech_act="QUERY_CALCULATION", understood_by=("mediator",),
        )
        event = NormEvent(
            trigger="on_utterance",
            state=state(USER, MEDIATOR, SAVINGS, CDB),
            utterance=utt,
            slot_names=frozenset({"initial_value", "period"}),
        )
        assert fired(norm_set, event) == ["forward-calculation-to-experts", "save-calculation-context"]

    def test_row11_save_context_alone_with_one_expert(self, norm_set):
        # with exactly one expert in the chat neither the invite row nor the
        # forward row applies; the save row still does
        utt = utterance(
            "alice", "what if i invest 10000 in 5 years?", topic="finance",
            speech_act="QUERY_CALCULATION", understood_by=("mediator",),
        )
        event = NormEvent(
            trigger="on_utterance",
            state=state(USER, MEDIATOR, CDB),
            utterance=utt,
            slot_names=frozenset({"initial_value", "period"}),
        )
        assert fired(norm_set, event) == ["save-calculation-context"]

    def test_row12_experts_compute_when_called(self, norm_set):
        utt = utterance(
            "mediator",
            "@SavingsAccountExpert and @CDBExpert, could you do a simulation of 50 in 6 months?",
            topic="finance", speech_act="QUERY_CALCULATION",
            mentions=("savings_expert", "cdb_expert"), understood_by=("mediator",),
        )
        event = NormEvent(
            trigger="on_utterance",
            state=state(USER, MEDIATOR, SAVINGS, CDB),
            utterance=utt,
            slot_names=frozenset({"initial_value", "period"}),
        )
        # the mention row matches the same forward; both direct the experts
        assert fired(norm_set, event) == ["mentioned-expert-handles", "experts-compute-when-called"]

    def test_row13_compare_after_both_replies(self, norm_set):
        utt = utterance(
            "cdb_expert", "If you invest in CDB, ...", topic="finance",
            speech_act="INFORM_CALCULATION", understood_by=("cdb_expert",),
        )
        event = NormEvent(
            trigger="on_utterance",
            state=state(
                USER, MEDIATOR, SAVINGS, CDB,
                awaiting=("savings_expert", "cdb_expert"), replied=("savings_expert",),
            ),
            utterance=utt,
        )
        # the completing reply both stops the wait and triggers the comparison
        assert fired(norm_set, event) == ["stop-waiting-after-last-reply", "compare-expert-results"]

    def test_row14_bare_mention_offers_help(self, norm_set):
        utt = utterance("alice", "@CDBExpert", topic="other", speech_act="INFORM",
                        mentions=("cdb_expert",))
        event = NormEvent(
            trigger="on_utterance", state=state(USER, MEDIATOR, SAVINGS, CDB), utterance=utt
        )
        # consume=true: the generic not-understood rows stay silent
        assert fired(norm_set, event) == ["offer-help-on-bare-mention"]

    def test_row15_unknown_question_admits_ignorance(self, norm_set):
        utt = utterance("alice", "what is the capital of france?", topic="other",
                        speech_act="QUERY")
        event = NormEvent(
            trigger="on_utterance", state=state(USER, MEDIATOR, SAVINGS, CDB), utterance=utt
        )
        assert fired(norm_set, event) == ["admit-ignorance-to-question"]

    def test_row16_unknown_statement_admits_confusion(self, norm_set):
        utt = utterance("alice", "flibber jabber", topic="other", speech_act="INFORM")
        event = NormEvent(
            trigger="on_utterance", state=state(USER, MEDIATOR, SAVINGS, CDB), utterance=utt
        )
        assert fired(norm_set, event) == ["admit-confusion"]

    def test_row17_rapport_for_everyone(self, norm_set):
        utt = utterance("alice", "hello", topic="other", speech_act="GREETINGS",
                        understood_by=("mediator", "savings_expert", "cdb_expert"))
        event = NormEvent(
            trigger="on_utterance", state=state(USER, MEDIATOR, SAVINGS, CDB), utterance=utt
        )
        assert fired(norm_set, event) == ["everyone-returns-rapport"]
        directives = dict(match_norms(norm_set, event))["everyone-returns-rapport"]
        assert directives[0].kind == "handle" and directives[0].args == ("all_bots",)

    def test_row18_close_the_chat(self, norm_set):
        event = NormEvent(trigger="on_group_end", state=state(MEDIATOR, SAVINGS, CDB))
        assert fired(norm_set, event) == ["close-the-chat"]
        directives = dict(match_norms(norm_set, event))["close-the-chat"]
        assert [d.kind for d in directives] == ["leave_all", "register_end"]


class TestMatchSemantics:
    def test_determinism(self, norm_set):
        utt = utterance("alice", "hello", speech_act="GREETINGS",
                        understood_by=("mediator",))
        event = NormEvent(trigger="on_utterance", state=state(USER, MEDIATOR), utterance=utt)
        runs = [fired(norm_set, event) for _ in range(20)]
        assert all(r == runs[0] for r in runs)

    def test_consume_stops_evaluation(self):
        doc = {
            "vocabulary": {"topics": [], "speech_acts": ["INFORM"], "members": [], "slots": []},
            "norms": [
                {"id": "first", "trigger": "on_utterance", "when": [],
                 "then": [{"kind": "save_slots"}], "consume": True},
                {"id": "second", "trigger": "on_utterance", "when": [],
                 "then": [{"kind": "save_slots"}]},
            ],
        }
        ns = load_norms(doc)
        utt = utterance("alice")
        got = fired(ns, NormEvent(trigger="on_utterance", state=state(USER), utterance=utt))
        assert got == ["first"]

    def test_file_order_preserved_for_multiple_matches(self, norm_set):
        utt = utterance(
            "alice", "i would like to invest 50 in 6 months", topic="finance",
            speech_act="QUERY_CALCULATION", understood_by=("mediator",),
        )
        event = NormEvent(
            trigger="on_utterance",
            state=state(USER, MEDIATOR, SAVINGS, CDB),
            utterance=utt,
            slot_names=frozenset({"initial_value", "period"}),
        )
        ids = fired(norm_set, event)
        assert ids == sorted(ids, key=ALL_NORM_IDS.index)


class TestEnforceSend:
    def test_member_on_topic_allowed(self, norm_set):
        utt = utterance("alice", "hello", speech_act="GREETINGS", understood_by=("mediator",))
        decision = enforce_send(norm_set, utt, state(USER, MEDIATOR))
        assert decision.allowed

    def test_non_member_blocked(self, norm_set):
        utt = utterance("mallory", "hello", speech_act="GREETINGS")
        decision = enforce_send(norm_set, utt, state(USER, MEDIATOR))
        assert not decision.allowed
        assert decision.reason == "not a member"

    def test_block_directive_blocks_with_norm_id(self):
        doc = {
            "vocabulary": {"topics": [], "speech_acts": ["INFORM"], "members": [], "slots": []},
            "norms": [
                {
                    "id": "experts-hold-while-idle",
                    "trigger": "on_utterance",
                    "when": [
                        {"kind": "sender_role_is", "args": ["expert_bot"]},
                        {"kind": "awaiting_replies", "args": ["none"]},
                    ],
                    "then": [{"kind": "block", "args": []}],
                }
            ],
        }
        ns = load_norms(doc)
        utt = utterance("cdb_expert", "unprompted remark")
        decision = enforce_send(ns, utt, state(USER, MEDIATOR, CDB))
        assert not decision.allowed
        assert decision.reason == "experts-hold-while-idle"
        # the same norm set lets an awaited expert speak
        allowed = enforce_send(ns, utt, state(USER, MEDIATOR, CDB, awaiting=("cdb_expert",)))
        assert allowed.allowed
