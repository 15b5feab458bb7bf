/**
 * Session state as a pure reducer over received frames.
 *
 * The view is a function of the frame sequence alone: replaying a recorded
 * frame log reproduces the identical transcript. Events are rendered in
 * seq order; anything arriving early sits in a reorder buffer until the
 * sequence is contiguous.
 */

import { EventFrame, ServerFrame } from "./protocol.js";

export type ConnectionState = "connecting" | "joined" | "ended" | "error";

export interface RosterEntry {
  memberId: string;
  displayName: string;
  role: string;
}

export interface TranscriptLine {
  seq: number;
  kind: "utterance" | "system";
  memberId?: string;
  displayName?: string;
  role?: string;
  text: string;
  templateId?: string | null;
  self: boolean;
}

export interface SessionView {
  connection: ConnectionState;
  memberId: string;
  groupId: string | null;
  roster: RosterEntry[];
  lines: TranscriptLine[];
  errors: string[];
  skipped: number; // malformed frames dropped
  nextSeq: number;
  buffered: Map<number, EventFrame>;
}

export function newSession(memberId: string): SessionView {
  return {
    connection: "connecting",
    memberId,
    groupId: null,
    roster: [],
    lines: [],
    errors: [],
    skipped: 0,
    nextSeq: 1,
    buffered: new Map(),
  };
}

function cloneView(view: SessionView): SessionView {
  return {
    ...view,
    roster: [...view.roster],
    lines: [...view.lines],
    errors: [...view.errors],
    buffered: new Map(view.buffered),
  };
}

function systemText(event: EventFrame): string {
  const name = event.display_name ?? event.member_id ?? "";
  switch (event.kind) {
    case "member_joined":
      return `${name} joined${event.role ? ` as ${event.role}` : ""}`;
    case "member_left":
      return `${name} left`;
    case "group_created":
      return "chat group created";
    case "group_ended":
      return "chat group ended";
    default:
      return event.kind;
  }
}

function applyEvent(view: SessionView, event: EventFrame): void {
  if (event.kind === "utterance") {
    view.lines.push({
      seq: event.seq,
      kind: "utterance",
      memberId: event.member_id,
      displayName: event.display_name ?? event.member_id,
      role: event.role,
      text: event.text ?? "",
      templateId: event.template_id ?? null,
      self: event.member_id === view.memberId,
    });
    return;
  }
  if (event.kind === "member_joined" && event.member_id) {
    if (!view.roster.some((entry) => entry.memberId === event.member_id)) {
      view.roster.push({
        memberId: event.member_id,
        displayName: event.display_name ?? event.member_id,
        role: event.role ?? "user",
      });
    }
  }
  if (event.kind === "member_left" && event.member_id) {
    view.roster = view.roster.filter((entry) => entry.memberId !== event.member_id);
  }
  if (event.kind === "group_ended") {
    view.connection = "ended";
  }
  view.lines.push({
    seq: event.seq,
    kind: "system",
    memberId: event.member_id,
    displayName: event.display_name,
    role: event.role,
    text: systemText(event),
    self: false,
  });
}

/** Fold one parsed frame into the view; returns the next view. */
export function applyFrame(view: SessionView, frame: ServerFrame | null): SessionView {
  const next = cloneView(view);
  if (frame === null) {
    next.skipped += 1; // malformed: logged by the caller, never rendered
    return next;
  }
  if (frame.type === "ack") {
    if (next.groupId === null) {
      next.groupId = frame.group_id;
      next.connection = "joined";
    }
    return next;
  }
  if (frame.type === "error") {
    next.errors.push(frame.text);
    return next;
  }
  // events render strictly in seq order; buffer gaps until contiguous
  next.buffered.set(frame.seq, frame);
  while (next.buffered.has(next.nextSeq)) {
    const event = next.buffered.get(next.nextSeq)!;
    next.buffered.delete(next.nextSeq);
    applyEvent(next, event);
    next.nextSeq += 1;
  }
  return next;
}

/** Replay a whole frame log from scratch (view purity in action). */
export function replay(memberId: string, frames: (ServerFrame | null)[]): SessionView {
  return frames.reduce(applyFrame, newSession(memberId));
}
