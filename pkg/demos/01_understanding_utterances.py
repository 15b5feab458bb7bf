"""Walk through the utterance-understanding layer: number normalization,
dependency trees, slot extraction and the placeholder canonical form.

Run: python3 demos/01_understanding_utterances.py
"""

from parley.nlu import (
    extract_initial_amount_of_investment,
    extract_period_of_investment,
    frame_parse,
    normalize_numbers,
    parse_dependencies,
    serialize_tree,
)

print("=== number normalization ===")
for text in (
    "I would like to invest 10 thousands in 40 months",
    "R$ 35,000 for 2 years",
    "i would like to invest R$ 50 in six months",
    "and 50,0000?",
):
    res = normalize_numbers(text)
    print(f"{text!r}")
    print(f"  -> {res.converted!r}   digits={res.digits} currency={res.currency}")

print("\n=== dependency tree (minimal verb-headed parser) ===")
converted = normalize_numbers("I would like to invest 10 thousands in 40 months").converted
tree = parse_dependencies(converted)
import json

print(json.dumps(serialize_tree(tree), indent=2))

print("\n=== slot extraction over the tree ===")
period = extract_period_of_investment(tree)
amount = extract_initial_amount_of_investment(tree)
print(f"period node: {period.token} (under {period.parent.token!r})")
print(f"amount node: {amount.token} (under {amount.parent.token!r})")

print("\n=== frame parsing: save slots, canonicalize the intent text ===")
for text in ("I would like to invest 10 thousands in 3 years", "10 in 3 years", "how about 15 years?"):
    normalized = normalize_numbers(text)
    parsed = frame_parse(normalized, parse_dependencies(normalized.converted))
    slots = {k: f"{v.value} {v.unit}" for k, v in parsed.deltas.items()}
    print(f"{text!r}\n  -> {parsed.canonical_text!r}   slots={slots}")
