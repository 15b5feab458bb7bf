"""Utterance understanding: number normalization, dependency trees, frame
parsing, topic and speech-act classification, and the mean-word-vector
nearest-neighbour intent classifier.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import SlotValue, normalize_speech_act

# ---------------------------------------------------------------------------
# Number normalization
# ---------------------------------------------------------------------------

_WORD_NUMBERS = {
    "zero": 0, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10,
    "eleven": 11, "twelve": 12, "thirteen": 13, "fourteen": 14,
    "fifteen": 15, "sixteen": 16, "seventeen": 17, "eighteen": 18,
    "nineteen": 19, "twenty": 20, "thirty": 30, "forty": 40,
    "fifty": 50, "sixty": 60, "seventy": 70, "eighty": 80, "ninety": 90,
}

_MULTIPLIERS = {
    "hundred": 100, "hundreds": 100,
    "thousand": 1000, "thousands": 1000,
    "million": 1_000_000, "millions": 1_000_000,
}

_WORD_NUMBER_RE = re.compile(
    r"\b(" + "|".join(_WORD_NUMBERS) + r")\b", re.IGNORECASE
)

# any run of currency markers, the digit core, then any run of multiplier words
_NUMBER_RE = re.compile(
    r"(?P<currency>(?:(?:R\$|US\$|U\$|USD|BRL|\$)\s*)+)?"
    r"(?P<number>\d+(?:[.,]\d+)*)"
    r"(?P<mult>(?:\s+(?:" + "|".join(_MULTIPLIERS) + r")\b)*)",
    re.IGNORECASE,
)

_DIGIT_TOKEN_RE = re.compile(r"\d+(?:\.\d+)?")


@dataclass
class NormalizationResult:
    original: str
    converted: str
    digits: list[float | int]
    start_pos: list[int]  # inclusive offsets into converted
    end_pos: list[int]    # inclusive offsets into converted
    currency: Optional[str] = None  # first currency marker seen, if any


def _parse_digit_core(core: str) -> float | int:
    """Parse a digit group, stripping group separators.

    Commas separating 3-digit groups are thousands separators; a single
    trailing 1-2 digit comma group is a decimal part. Dots are decimal
    points unless several appear, in which case they separate groups.
    """
    if core.count(".") > 1:
        core = core.replace(".", ",")
    if "," in core:
        head, *rest = core.split(",")
        if len(rest) == 1 and len(rest[0]) in (1, 2) and "." not in core:
            core = head + "." + rest[0]
        else:
            core = head + "".join(rest)
    if "." not in core:
        return int(core)  # exact, even beyond float precision
    value = float(core)
    return int(value) if value == int(value) else value


def _render_number(value: float | int) -> str:
    if isinstance(value, int) or value == int(value):
        return str(int(value))
    return f"{value:f}".rstrip("0").rstrip(".")  # plain decimal, never scientific


def normalize_numbers(text: str, default_currency: Optional[str] = None) -> NormalizationResult:
    """Fold number words, multipliers and currency markers into plain digits.

    Everything that is not part of a number expression is preserved
    verbatim. The returned offsets are inclusive indices into ``converted``
    such that ``converted[start:end + 1]`` parses back to ``digits[i]``.
    """
    converted = _WORD_NUMBER_RE.sub(lambda m: str(_WORD_NUMBERS[m.group(1).lower()]), text)

    currency: Optional[str] = default_currency

    def _fold(match: re.Match) -> str:
        nonlocal currency
        marker = match.group("currency")
        if marker:
            marker = marker.upper()
            if currency is None or currency == default_currency:
                currency = "BRL" if ("R$" in marker or "BRL" in marker) else "USD"
        value = _parse_digit_core(match.group("number"))
        for word in match.group("mult").split():
            value = value * _MULTIPLIERS[word.lower()]
        if float(value) == int(value):
            value = int(value)
        return _render_number(value)

    converted = _NUMBER_RE.sub(_fold, converted)

    digits: list[float | int] = []
    start_pos: list[int] = []
    end_pos: list[int] = []
    for m in _DIGIT_TOKEN_RE.finditer(converted):
        raw = m.group(0)
        digits.append(float(raw) if "." in raw else int(raw))
        start_pos.append(m.start())
        end_pos.append(m.end() - 1)
    return NormalizationResult(
        original=text,
        converted=converted,
        digits=digits,
        start_pos=start_pos,
        end_pos=end_pos,
        currency=currency,
    )


# ---------------------------------------------------------------------------
# Dependency trees
# ---------------------------------------------------------------------------

_VERB_LEXICON = {
    "invest", "apply", "put", "simulate", "want", "like", "keep", "wait",
    "move", "launch", "have", "has", "know", "say", "do", "does", "go",
    "think", "need", "compute", "choose", "help", "get", "give", "make",
    "see", "start", "follow", "reply", "send", "lend", "use",
}
_PRONOUNS = {"i", "you", "he", "she", "it", "we", "they", "me", "us", "them"}
_AUXILIARIES = {"would", "could", "should", "can", "will", "may", "might", "am", "is", "are", "was", "were"}
_ADPOSITIONS = {"in", "for", "on", "at", "of", "with", "from", "about", "into", "by"}
_DETERMINERS = {"a", "an", "the", "this", "that", "these", "those", "my", "your", "some"}
_CONJUNCTIONS = {"and", "or", "but", "so"}
_INTERJECTIONS = {"hello", "hi", "hey", "ok", "okay", "yes", "no", "sure", "thanks"}
_ADVERBS = {"how", "when", "where", "why", "what", "which", "who", "not", "nowadays", "maybe", "then"}
_PARTICLES = {"to"}

#: Verbs whose governed time expressions denote an investment period.
INVESTMENT_VERBS = {"invest", "apply", "put", "simulate"}

_TIME_UNIT_WORDS = ("day", "month", "year")

_TOKEN_RE = re.compile(r"\d+(?:\.\d+)?|\w+|[^\w\s]")


class DependencyNode:
    """One token of a dependency tree with a coarse POS tag and relation."""

    def __init__(self, token: str, pos: str, relation: str):
        self.token = token
        self.pos = pos
        self.relation = relation
        self.children: list[DependencyNode] = []
        self.parent: Optional[DependencyNode] = None

    def add(self, child: "DependencyNode") -> "DependencyNode":
        child.parent = self
        self.children.append(child)
        return child

    def walk(self) -> Iterable["DependencyNode"]:
        """Depth-first preorder traversal (document order for parsed text)."""
        yield self
        for child in self.children:
            yield from child.walk()

    def number_nodes(self) -> list["DependencyNode"]:
        return [n for n in self.walk() if n.pos == "NUM"]

    def has_verb(self) -> bool:
        return any(n.pos == "VERB" for n in self.walk())

    def nearest_verb_ancestor(self) -> Optional["DependencyNode"]:
        node = self.parent
        while node is not None:
            if node.pos == "VERB":
                return node
            node = node.parent
        return None

    def __repr__(self) -> str:
        return f"DependencyNode({self.token} {self.pos} {self.relation})"

    def structurally_equal(self, other: "DependencyNode") -> bool:
        if (self.token, self.pos, self.relation) != (other.token, other.pos, other.relation):
            return False
        if len(self.children) != len(other.children):
            return False
        return all(a.structurally_equal(b) for a, b in zip(self.children, other.children))


def _tag(token: str) -> str:
    low = token.lower()
    if _DIGIT_TOKEN_RE.fullmatch(token):
        return "NUM"
    if not re.match(r"\w", token):
        return "PUNCT"
    if low in _VERB_LEXICON:
        return "VERB"
    if low in _PRONOUNS:
        return "PRON"
    if low in _AUXILIARIES:
        return "AUX"
    if low in _ADPOSITIONS:
        return "ADP"
    if low in _DETERMINERS:
        return "DET"
    if low in _CONJUNCTIONS:
        return "CCONJ"
    if low in _INTERJECTIONS:
        return "INTJ"
    if low in _ADVERBS:
        return "ADV"
    if low in _PARTICLES:
        return "PART"
    return "NOUN"


def parse_dependencies(text: str) -> DependencyNode:
    """Minimal verb-headed parser for short finance utterances.

    Verbs head the clause, nouns attach to the nearest preceding verb, and a
    number directly followed by a noun hangs under that noun so unit words
    like "months" govern their quantity. Adequate for the tree-walk
    extraction rules; externally supplied trees take precedence elsewhere.
    """
    if not text or not text.strip():
        raise ValueError("cannot parse an empty utterance")
    tokens = _TOKEN_RE.findall(text)
    tagged = [(tok, _tag(tok)) for tok in tokens]

    # head preference: a verb; for bare "<number> <noun>" answers the noun
    # heads its quantity; otherwise whatever comes first
    root_idx = next((i for i, (_, pos) in enumerate(tagged) if pos == "VERB"), None)
    if root_idx is None:
        first = next((i for i, (_, pos) in enumerate(tagged) if pos != "PUNCT"), 0)
        if (
            tagged[first][1] == "NUM"
            and first + 1 < len(tagged)
            and tagged[first + 1][1] == "NOUN"
        ):
            root_idx = first + 1
        else:
            root_idx = first
    root = DependencyNode(tagged[root_idx][0], tagged[root_idx][1], "ROOT")

    nodes: dict[int, DependencyNode] = {root_idx: root}
    last_verb_at: Optional[int] = root_idx if tagged[root_idx][1] == "VERB" else None

    def nearest_verb_before(i: int) -> DependencyNode:
        for j in range(i - 1, -1, -1):
            if j in nodes and nodes[j].pos == "VERB":
                return nodes[j]
        return root

    # First pass: place verbs, nouns and numbers.
    for i, (tok, pos) in enumerate(tagged):
        if i == root_idx:
            continue
        if pos == "VERB":
            head = nearest_verb_before(i)
            nodes[i] = head.add(DependencyNode(tok, pos, "xcomp"))
        elif pos == "NOUN":
            head = nearest_verb_before(i)
            nodes[i] = head.add(DependencyNode(tok, pos, "nmod"))
        elif pos == "NUM":
            nxt = tagged[i + 1] if i + 1 < len(tagged) else None
            if nxt and nxt[1] == "NOUN":
                # governed by the upcoming unit noun; defer attachment
                continue
            head = nearest_verb_before(i)
            nodes[i] = head.add(DependencyNode(tok, pos, "dobj"))

    # Second pass: numbers deferred to their governing noun.
    for i, (tok, pos) in enumerate(tagged):
        if i in nodes or pos != "NUM":
            continue
        noun = nodes.get(i + 1, root)
        nodes[i] = noun.add(DependencyNode(tok, pos, "nummod"))

    # Third pass: function words. Adpositions mark the following noun.
    relations = {
        "PRON": "nsubj", "AUX": "aux", "PART": "mark", "DET": "det",
        "CCONJ": "cc", "INTJ": "discourse", "ADV": "advmod", "PUNCT": "punct",
    }
    for i, (tok, pos) in enumerate(tagged):
        if i in nodes:
            continue
        if pos == "ADP":
            head = root
            for j in range(i + 1, len(tagged)):
                if tagged[j][1] == "NOUN" and j in nodes:
                    head = nodes[j]
                    break
                if tagged[j][1] == "VERB":
                    break
            nodes[i] = head.add(DependencyNode(tok, pos, "case"))
        else:
            nodes[i] = root.add(DependencyNode(tok, pos, relations.get(pos, "dep")))
    return root


def serialize_tree(root: DependencyNode) -> dict:
    """Encode a tree in the nested wire format keyed by "token POS relation"."""

    def encode(node: DependencyNode) -> dict:
        return {f"{c.token} {c.pos} {c.relation}": encode(c) for c in node.children}

    return {f"{root.token} {root.pos} {root.relation}": encode(root)}


def ingest_tree(obj: Mapping) -> DependencyNode:
    """Build a tree from the wire format, preserving child order."""
    tree_obj = obj.get("tree", obj) if isinstance(obj, Mapping) else obj
    if len(tree_obj) != 1:
        raise ValueError(f"tree must have exactly one root, got {len(tree_obj)} keys")

    def decode(key: str, children: Mapping, relation_override: Optional[str] = None) -> DependencyNode:
        parts = key.split()
        if len(parts) < 3:
            raise ValueError(f"malformed tree key {key!r}; expected 'token POS relation'")
        token = " ".join(parts[:-2])
        node = DependencyNode(token, parts[-2], relation_override or parts[-1])
        for child_key, grand in children.items():
            node.add(decode(child_key, grand))
        return node

    key, children = next(iter(tree_obj.items()))
    return decode(key, children)


def extract_period_of_investment(
    tree: DependencyNode, verbs: Optional[Iterable[str]] = None
) -> Optional[DependencyNode]:
    """First number node quantifying a day/month/year word under an
    investment verb.

    The governing verb is the nearest verb ancestor of the unit word; a tree
    with no verb at all (elliptical follow-ups like "how about 15 years?")
    accepts the bare unit pattern.
    """
    verb_set = {v.lower() for v in (verbs if verbs is not None else INVESTMENT_VERBS)}
    for num in tree.number_nodes():
        parent = num.parent
        if parent is None:
            continue
        if any(unit in parent.token.lower() for unit in _TIME_UNIT_WORDS):
            governing = parent.nearest_verb_ancestor()
            if governing is None:
                if not tree.has_verb():
                    return num
            elif governing.token.lower() in verb_set:
                return num
    return None


def extract_initial_amount_of_investment(tree: DependencyNode) -> Optional[DependencyNode]:
    """First number node whose parent is not a time-unit word.

    A number that is itself the root (bare amounts like "35000") counts: it
    has no unit word above it.
    """
    for num in tree.number_nodes():
        parent = num.parent
        if parent is None:
            return num
        if not any(unit in parent.token.lower() for unit in _TIME_UNIT_WORDS):
            return num
    return None


@dataclass
class FrameParse:
    canonical_text: str
    deltas: dict[str, SlotValue] = field(default_factory=dict)


def _unit_of(parent_token: str) -> str:
    low = parent_token.lower()
    for unit in _TIME_UNIT_WORDS:
        if unit in low:
            return unit
    return "day"


def frame_parse(
    normalized: NormalizationResult,
    tree: DependencyNode,
    verbs: Optional[Iterable[str]] = None,
    default_currency: str = "BRL",
) -> FrameParse:
    """Pull the investment period and amount out of the tree, replace them in
    the text with the "#dt" and "#v" placeholders and report the slot values.

    Works on one period and one amount per utterance; the offsets recorded
    during normalization anchor each extracted node to its text span.
    """
    period_node = extract_period_of_investment(tree, verbs)
    amount_node = extract_initial_amount_of_investment(tree)

    numbers = tree.number_nodes()
    spans: dict[int, tuple[int, int]] = {}
    if len(numbers) == len(normalized.digits):
        for idx in range(len(numbers)):
            spans[idx] = (normalized.start_pos[idx], normalized.end_pos[idx])

    deltas: dict[str, SlotValue] = {}
    replacements: list[tuple[int, int, str]] = []
    if period_node is not None:
        deltas["period"] = SlotValue(
            value=int(float(period_node.token)), unit=_unit_of(period_node.parent.token)
        )
        idx = numbers.index(period_node)
        if idx in spans:
            replacements.append((*spans[idx], "#dt"))
    if amount_node is not None:
        raw = float(amount_node.token)
        deltas["initial_value"] = SlotValue(
            value=int(raw) if raw == int(raw) else raw,
            unit=normalized.currency or default_currency,
        )
        idx = numbers.index(amount_node)
        if idx in spans:
            replacements.append((*spans[idx], "#v"))

    canonical = normalized.converted
    for start, end, placeholder in sorted(replacements, reverse=True):
        canonical = canonical[:start] + placeholder + canonical[end + 1 :]
    return FrameParse(canonical_text=canonical, deltas=deltas)


# ---------------------------------------------------------------------------
# Topic classification
# ---------------------------------------------------------------------------


class TopicLexicon:
    """Dictionary topic classifier configuration."""

    def __init__(self, topics: Mapping[str, Sequence[str]], implies: Optional[Mapping[str, str]] = None):
        self.topics = {t: [term.lower() for term in terms] for t, terms in topics.items()}
        self.implies = dict(implies or {})

    @staticmethod
    def from_json(obj: Mapping) -> "TopicLexicon":
        return TopicLexicon(obj["topics"], obj.get("implies"))

    def implied_by(self, topic: str) -> set[str]:
        """The topic itself plus every ancestor it implies."""
        out = {topic}
        cur = topic
        while cur in self.implies:
            cur = self.implies[cur]
            out.add(cur)
        return out


def classify_topic(text: str, lexicon: TopicLexicon) -> str:
    """Most specific dictionary label; "other" without any hit.

    A hit on several mutually non-implying specific topics generalizes to
    their shared ancestor (a comparative question about both investment
    options is a general finance utterance, not either option's).
    """
    low = " " + re.sub(r"\W+", " ", text.lower()) + " "
    hits = {
        topic
        for topic, terms in lexicon.topics.items()
        if any(f" {term} " in low or (" " in term and term in text.lower()) for term in terms)
    }
    if not hits:
        return "other"
    specific = {t for t in hits if t in lexicon.implies}
    if len(specific) == 1:
        return next(iter(specific))
    if len(specific) > 1:
        parents = {lexicon.implies[t] for t in specific}
        return next(iter(parents)) if len(parents) == 1 else sorted(parents)[0]
    return sorted(hits)[0] if len(hits) > 1 else next(iter(hits))


# ---------------------------------------------------------------------------
# Speech-act classification
# ---------------------------------------------------------------------------

_QUESTION_OPENERS = (
    "is", "are", "do", "does", "did", "can", "could", "will", "would",
    "should", "what", "who", "when", "where", "why", "how", "which",
)


@dataclass
class SpeechActRule:
    speech_act: str
    patterns: list[re.Pattern]

    @staticmethod
    def from_json(obj: Mapping) -> "SpeechActRule":
        return SpeechActRule(
            speech_act=normalize_speech_act(obj["speech_act"]),
            patterns=[re.compile(p, re.IGNORECASE) for p in obj["patterns"]],
        )


class SpeechActRules:
    """Ordered dictionary rules; first match wins, interrogative fallback."""

    def __init__(self, rules: Sequence[SpeechActRule]):
        self.rules = list(rules)

    @staticmethod
    def from_json(obj) -> "SpeechActRules":
        rows = obj["rules"] if isinstance(obj, Mapping) else obj
        return SpeechActRules([SpeechActRule.from_json(r) for r in rows])

    @staticmethod
    def load(path: str) -> "SpeechActRules":
        with open(path, "r", encoding="utf-8") as fh:
            return SpeechActRules.from_json(json.load(fh))


def is_question(text: str) -> bool:
    stripped = text.strip()
    if stripped.endswith("?"):
        return True
    first = re.findall(r"\w+", stripped.lower())
    return bool(first) and first[0] in _QUESTION_OPENERS


def classify_speech_act(text: str, rules: SpeechActRules) -> str:
    for rule in rules.rules:
        if any(p.search(text) for p in rule.patterns):
            return rule.speech_act
    return "QUERY" if is_question(text) else "INFORM"


# ---------------------------------------------------------------------------
# Embeddings and intent classification
# ---------------------------------------------------------------------------

_EMB_TOKEN_RE = re.compile(r"#\w+|\w+")


def tokenize(text: str) -> list[str]:
    """Lower-cased word tokens; slot placeholders stay single tokens."""
    return [t.lower() for t in _EMB_TOKEN_RE.findall(text)]


class Embeddings:
    """Word-vector table with case-folded lookup."""

    def __init__(self, dimension: int, table: Mapping[str, np.ndarray]):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.table: dict[str, np.ndarray] = {}
        for word, vec in table.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (dimension,):
                raise ValueError(f"vector for {word!r} has shape {arr.shape}, want ({dimension},)")
            self.table[word.lower()] = arr

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.table

    def get(self, word: str) -> Optional[np.ndarray]:
        return self.table.get(word.lower())

    @staticmethod
    def load(path: str) -> "Embeddings":
        """Read the text format: "<vocab> <dim>" header then one word+vector per line."""
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise ValueError("embeddings header must be '<vocab_size> <dimension>'")
            vocab_size, dim = int(header[0]), int(header[1])
            table = {}
            for line in fh:
                parts = line.rstrip("\n").split(" ")
                if len(parts) != dim + 1:
                    raise ValueError(f"bad embeddings row for {parts[0]!r}")
                table[parts[0]] = np.array([float(x) for x in parts[1:]])
        if len(table) != vocab_size:
            raise ValueError(f"embeddings header says {vocab_size} words, file has {len(table)}")
        return Embeddings(dim, table)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.table)} {self.dimension}\n")
            for word in sorted(self.table):
                row = " ".join(repr(float(x)) for x in self.table[word])
                fh.write(f"{word} {row}\n")


def mean_vector(tokens: Sequence[str], embeddings: Embeddings) -> Optional[np.ndarray]:
    """Arithmetic mean of the in-vocabulary token vectors; None if all OOV."""
    vectors = [embeddings.get(t) for t in tokens]
    vectors = [v for v in vectors if v is not None]
    if not vectors:
        return None
    return np.mean(vectors, axis=0)


@dataclass
class TrainingSample:
    text: str
    intent_class: str
    vector: np.ndarray


class TrainingSet:
    """Intent samples with precomputed (optionally normalized) mean vectors."""

    def __init__(self, samples: Sequence[TrainingSample], dimension: int):
        if not samples:
            raise ValueError("training set must contain at least one sample")
        self.samples = list(samples)
        self.dimension = dimension
        self.matrix = np.stack([s.vector for s in self.samples])

    @staticmethod
    def from_records(
        records: Iterable[Mapping],
        embeddings: Embeddings,
        normalize: bool = True,
    ) -> "TrainingSet":
        samples = []
        for rec in records:
            vec = mean_vector(tokenize(rec["text"]), embeddings)
            if vec is None:
                raise ValueError(f"training text {rec['text']!r} is fully out of vocabulary")
            if normalize:
                vec = vec / np.linalg.norm(vec)
            samples.append(TrainingSample(rec["text"], rec["intent_class"], vec))
        return TrainingSet(samples, embeddings.dimension)

    @staticmethod
    def load(path: str, embeddings: Embeddings, normalize: bool = True) -> "TrainingSet":
        with open(path, "r", encoding="utf-8") as fh:
            records = [json.loads(line) for line in fh if line.strip()]
        return TrainingSet.from_records(records, embeddings, normalize)

    def restricted_to(self, intent_ids: Iterable[str]) -> "TrainingSet":
        wanted = set(intent_ids)
        kept = [s for s in self.samples if s.intent_class in wanted]
        if not kept:
            raise ValueError("restriction leaves no training samples")
        return TrainingSet(kept, self.dimension)

    def classes(self) -> set[str]:
        return {s.intent_class for s in self.samples}


@dataclass
class IntentPrediction:
    intent_class: str
    distance: float
    sample_text: str


def classify_intent(vector: np.ndarray, trainset: TrainingSet) -> IntentPrediction:
    """1-nearest-neighbour by Euclidean distance.

    Exact distance ties break toward the lexicographically smallest class id
    so the result is order-independent.
    """
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (trainset.dimension,):
        raise ValueError(
            f"query vector has shape {vector.shape}, training set dimension is {trainset.dimension}"
        )
    dists = np.linalg.norm(trainset.matrix - vector, axis=1)
    best = dists.min()
    candidates = [s for s, d in zip(trainset.samples, dists) if d == best]
    winner = min(candidates, key=lambda s: s.intent_class)
    return IntentPrediction(winner.intent_class, float(best), winner.text)
