"""Finance-advisory deployment profile: loads the packaged configuration
(norms, flow, bindings, corpora, models) into a ready-to-run hub with a
mediator and two investment experts.
"""

from __future__ import annotations

import json
import os
import zlib
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Optional

import numpy as np

from . import nlu
from .actions import ActionBindings, BotServices, ChatBot, TemplateSet
from .context import ContextStore
from .core import IntentFlow, IntentRegistry, Member, load_registry_file, validate_flow
from .engine import Hub
from .finance import DefinitionCorpus, NewsCorpus, RatesProfile
from .norms import NormSet, load_norms_file


def data_path(*parts: str) -> str:
    return str(resources.files("parley").joinpath("data", *parts))


@dataclass
class ProfilePaths:
    norms: str
    flow: str
    bindings: str
    embeddings: str
    trainset: str
    corpus: str
    context: Optional[str] = None

    @staticmethod
    def packaged(context: Optional[str] = None) -> "ProfilePaths":
        return ProfilePaths(
            norms=data_path("norms.json"),
            flow=data_path("flow.json"),
            bindings=data_path("bindings.json"),
            embeddings=data_path("embeddings.txt"),
            trainset=data_path("trainset.jsonl"),
            corpus=data_path("corpus"),
            context=context,
        )


@dataclass
class Profile:
    hub: Hub
    norms: NormSet
    registry: IntentRegistry
    flow: IntentFlow
    bots: dict[str, ChatBot]
    services: BotServices
    embeddings: nlu.Embeddings
    trainset: nlu.TrainingSet
    speech_act_rules: nlu.SpeechActRules
    topic_lexicon: nlu.TopicLexicon


def load_profile(paths: Optional[ProfilePaths] = None, clock=None) -> Profile:
    """Assemble a hub from configuration files (the packaged demo by default)."""
    paths = paths or ProfilePaths.packaged()
    norms = load_norms_file(paths.norms)
    _, registry, flow = load_registry_file(paths.flow)
    problems = [i for i in validate_flow(flow, registry) if i.kind != "empty_flow"]
    if problems:
        raise ValueError(f"flow configuration invalid: {[p.detail for p in problems]}")
    bindings = ActionBindings.load(paths.bindings)
    embeddings = nlu.Embeddings.load(paths.embeddings)
    trainset = nlu.TrainingSet.load(paths.trainset, embeddings)

    corpus = paths.corpus
    templates = TemplateSet.load(os.path.join(corpus, "templates.json"))
    rates = RatesProfile.load(os.path.join(corpus, "rates.json"))
    definitions = DefinitionCorpus.load(os.path.join(corpus, "definitions.jsonl"))
    news = NewsCorpus.load(os.path.join(corpus, "news.jsonl"))
    with open(os.path.join(corpus, "topics.json"), "r", encoding="utf-8") as fh:
        topic_lexicon = nlu.TopicLexicon.from_json(json.load(fh))
    speech_act_rules = nlu.SpeechActRules.load(os.path.join(corpus, "speech_acts.json"))

    context = ContextStore(norms.vocabulary.slots, directory=paths.context)
    services = BotServices(
        templates=templates,
        context=context,
        definitions=definitions,
        news=news,
        rates=rates,
        topic_lexicon=topic_lexicon,
    )

    bots: dict[str, ChatBot] = {}
    with open(os.path.join(corpus, "bots.json"), "r", encoding="utf-8") as fh:
        for row in json.load(fh):
            member = Member(row["id"], row["display_name"], row["role"], "bot")
            bots[member.id] = ChatBot(
                member=member,
                topics=row.get("topics", ()),
                intents=row.get("intents", ()),
                trainset=trainset,
                embeddings=embeddings,
                bindings=bindings,
                flow=flow,
                registry=registry,
                services=services,
                rapport_intents=row.get("rapport"),
                template_overrides=row.get("templates"),
                compute_option=row.get("compute_option"),
                distance_threshold=row.get("distance_threshold", 0.5),
            )

    hub = Hub(
        norms=norms,
        bots=bots,
        services=services,
        speech_act_rules=speech_act_rules,
        topic_lexicon=topic_lexicon,
        clock=clock,
    )
    return Profile(
        hub=hub,
        norms=norms,
        registry=registry,
        flow=flow,
        bots=bots,
        services=services,
        embeddings=embeddings,
        trainset=trainset,
        speech_act_rules=speech_act_rules,
        topic_lexicon=topic_lexicon,
    )


# ---------------------------------------------------------------------------
# Embedding fixture generation
# ---------------------------------------------------------------------------


def word_vector(word: str, dimension: int = 16) -> np.ndarray:
    """Deterministic unit vector for a word (stable across runs and hosts)."""
    seed = zlib.crc32(word.lower().encode("utf-8"))
    rng = np.random.default_rng(seed)
    vec = rng.normal(size=dimension)
    return vec / np.linalg.norm(vec)


def build_embeddings(words: Iterable[str], dimension: int = 16) -> nlu.Embeddings:
    table = {w.lower(): word_vector(w, dimension) for w in words}
    return nlu.Embeddings(dimension, table)


def demo_vocabulary() -> set[str]:
    """Every token the demo fixtures can produce, for the embeddings file."""
    words: set[str] = set()

    def add_text(text: str) -> None:
        words.update(nlu.tokenize(text))

    with open(data_path("trainset.jsonl"), "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                add_text(json.loads(line)["text"])
    with open(data_path("suites", "d1.json"), "r", encoding="utf-8") as fh:
        suite = json.load(fh)
    for dialogue in suite["dialogues"]:
        for step in dialogue["steps"]:
            add_text(step["u"])
            norm = nlu.normalize_numbers(step["u"])
            add_text(norm.converted)
    for name in ("definitions.jsonl", "news.jsonl"):
        with open(data_path("corpus", name), "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    obj = json.loads(line)
                    add_text(obj.get("text", ""))
                    add_text(obj.get("term", ""))
    with open(data_path("corpus", "templates.json"), "r", encoding="utf-8") as fh:
        for text in json.load(fh).values():
            add_text(text)
    with open(data_path("corpus", "speech_act_fixtures.jsonl"), "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                add_text(json.loads(line)["text"])
    words.update({"#v", "#dt"})
    words -= {w for w in words if w.isdigit()}  # numbers are placeholders, not vocabulary
    return words


def write_demo_embeddings(path: Optional[str] = None, dimension: int = 16) -> str:
    path = path or data_path("embeddings.txt")
    build_embeddings(sorted(demo_vocabulary()), dimension).save(path)
    return path


if __name__ == "__main__":  # regenerate the packaged embeddings fixture
    print(write_demo_embeddings())
