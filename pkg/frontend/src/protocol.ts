/**
 * The hub wire protocol: one JSON frame per WebSocket message.
 *
 * Every frame the client sends is validated against these schemas before it
 * goes on the wire; inbound frames are parsed defensively (malformed ones
 * are reported to the caller, never thrown through the socket handler).
 */

import { z } from "zod";

export const CreateGroupFrame = z
  .object({
    type: z.literal("create_group"),
    member_id: z.string().min(1),
    display_name: z.string().min(1).optional(),
    group_id: z.string().min(1).optional(),
  })
  .strict();

export const JoinFrame = z
  .object({
    type: z.literal("join"),
    group_id: z.string().min(1),
    member_id: z.string().min(1),
    display_name: z.string().min(1).optional(),
    role: z.enum(["owner_user", "user"]).optional(),
  })
  .strict();

export const LeaveFrame = z
  .object({
    type: z.literal("leave"),
    group_id: z.string().min(1),
    member_id: z.string().min(1),
  })
  .strict();

export const UtteranceFrame = z
  .object({
    type: z.literal("utterance"),
    group_id: z.string().min(1),
    member_id: z.string().min(1),
    text: z.string().min(1),
    reply_to: z.string().optional(),
  })
  .strict();

export const ClientFrame = z.discriminatedUnion("type", [
  CreateGroupFrame,
  JoinFrame,
  LeaveFrame,
  UtteranceFrame,
]);
export type ClientFrame = z.infer<typeof ClientFrame>;

export const AckFrame = z.object({
  type: z.literal("ack"),
  group_id: z.string(),
  member_id: z.string(),
  utterance_id: z.string().optional(),
  seq: z.number().int().optional(),
  ts: z.number().int().optional(),
});

export const ErrorFrame = z.object({
  type: z.literal("error"),
  text: z.string(),
  group_id: z.string().optional(),
  member_id: z.string().optional(),
});

export const EventFrame = z.object({
  type: z.literal("event"),
  kind: z.enum(["utterance", "member_joined", "member_left", "group_created", "group_ended"]),
  group_id: z.string(),
  seq: z.number().int(),
  ts: z.number().int(),
  member_id: z.string().optional(),
  display_name: z.string().optional(),
  role: z.string().optional(),
  text: z.string().optional(),
  utterance_id: z.string().optional(),
  reply_to: z.string().optional(),
  template_id: z.string().nullable().optional(),
});
export type EventFrame = z.infer<typeof EventFrame>;

export const ServerFrame = z.discriminatedUnion("type", [AckFrame, ErrorFrame, EventFrame]);
export type ServerFrame = z.infer<typeof ServerFrame>;

/** Parse an inbound message; returns null for malformed frames. */
export function parseServerFrame(raw: string): ServerFrame | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  const result = ServerFrame.safeParse(data);
  return result.success ? result.data : null;
}

/** Validate an outbound frame; throws on schema violations. */
export function encodeClientFrame(frame: ClientFrame): string {
  return JSON.stringify(ClientFrame.parse(frame));
}
