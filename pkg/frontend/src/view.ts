/** DOM rendering for a SessionView: roster with role badges, transcript. */

import { SessionView, TranscriptLine } from "./session.js";

const ROLE_BADGES: Record<string, string> = {
  mediator: "mediator",
  expert_bot: "expert",
  owner_user: "you",
  user: "user",
  generic_bot: "bot",
};

function lineElement(line: TranscriptLine): HTMLElement {
  const item = document.createElement("li");
  item.dataset.seq = String(line.seq);
  if (line.kind === "system") {
    item.className = "system";
    item.textContent = `— ${line.text} —`;
    return item;
  }
  item.className = line.self ? "utterance self" : "utterance";
  const badge = document.createElement("span");
  badge.className = `badge ${line.role ?? "user"}`;
  badge.textContent = ROLE_BADGES[line.role ?? "user"] ?? line.role ?? "";
  const who = document.createElement("strong");
  who.textContent = line.displayName ?? line.memberId ?? "?";
  const text = document.createElement("span");
  text.className = "text";
  text.textContent = ` ${line.text}`;
  item.append(who, badge, text);
  return item;
}

export function render(view: SessionView, root: HTMLElement): void {
  const status = root.querySelector("#status")!;
  status.textContent = `${view.connection}${view.groupId ? ` · group ${view.groupId}` : ""}`;

  const roster = root.querySelector("#roster")!;
  roster.textContent = "";
  for (const entry of view.roster) {
    const chip = document.createElement("span");
    chip.className = `member ${entry.role}`;
    chip.textContent = `${entry.displayName} (${ROLE_BADGES[entry.role] ?? entry.role})`;
    roster.append(chip);
  }

  const transcript = root.querySelector("#transcript") as HTMLElement;
  transcript.textContent = "";
  for (const line of view.lines) {
    transcript.append(lineElement(line));
  }
  transcript.scrollTop = transcript.scrollHeight;

  const errors = root.querySelector("#errors") as HTMLElement;
  errors.textContent = view.errors.length ? view.errors[view.errors.length - 1] : "";

  const send = root.querySelector("#send") as HTMLButtonElement | null;
  const input = root.querySelector("#text") as HTMLInputElement | null;
  if (send && input) {
    send.disabled = view.connection !== "joined" || input.value.trim() === "";
  }
}
