"""A full multi-party conversation, in process: one human, a mediator and
two investment experts, governed by the packaged interaction norms.

Run: python3 demos/02_norm_governed_conversation.py
"""

from parley import demo
from parley.core import Member

profile = demo.load_profile()
hub = profile.hub

group = hub.create_group(Member("alice", "User", "user", "human"))
print(f"group {group.id} created; members: {sorted(group.members)}\n")

script = [
    "hello",
    "what is cdb?",
    "which is better: cdb or savings account?",
    "i would like to invest R$ 50 in six months",
    "how about 15 years?",
    "I want to invest in 50,000 for 15 years in CDB",
    "thanks",
]

for text in script:
    start = len(group.events)
    hub.post_utterance(group, "alice", text)
    print(f"User: {text}")
    for event in group.events[start:]:
        if event.kind == "member_joined":
            print(f"  << {event.member.display_name} joins the chat >>")
        elif event.kind == "utterance" and event.member and event.member.is_bot:
            print(f"  {event.member.display_name}: {event.utterance.text}")
    print()

print("frame slots at the end of the chat:")
for name, value in profile.services.context.group(group.id).frame.as_dict().items():
    print(f"  {name} = {value.value} {value.unit}")

hub.leave_group(group, "alice")
print(f"\nowner left; group ended at {group.ended_at}; members now: {sorted(group.members)}")
