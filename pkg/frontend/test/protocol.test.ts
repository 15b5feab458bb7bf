import { describe, expect, it } from "vitest";

import { ClientFrame, encodeClientFrame, parseServerFrame } from "../src/protocol.js";

describe("outbound frame validation", () => {
  it("accepts every frame shape the client produces", () => {
    const frames: ClientFrame[] = [
      { type: "create_group", member_id: "alice", display_name: "alice" },
      { type: "join", group_id: "g1", member_id: "bob", role: "user" },
      { type: "utterance", group_id: "g1", member_id: "alice", text: "what is cdb?" },
      { type: "utterance", group_id: "g1", member_id: "alice", text: "hi", reply_to: "g1-u2" },
      { type: "leave", group_id: "g1", member_id: "alice" },
    ];
    for (const frame of frames) {
      const encoded = encodeClientFrame(frame);
      expect(JSON.parse(encoded)).toEqual(frame);
    }
  });

  it("rejects empty utterance text", () => {
    expect(() =>
      encodeClientFrame({ type: "utterance", group_id: "g1", member_id: "a", text: "" }),
    ).toThrow();
  });

  it("rejects missing identifiers", () => {
    expect(() =>
      encodeClientFrame({ type: "join", group_id: "", member_id: "a" } as ClientFrame),
    ).toThrow();
  });

  it("rejects fields outside the wire schema", () => {
    const frame = {
      type: "utterance",
      group_id: "g1",
      member_id: "a",
      text: "x",
      smuggled: true,
    } as unknown as ClientFrame;
    expect(() => encodeClientFrame(frame)).toThrow();
  });
});

describe("inbound frame parsing", () => {
  it("parses ack, error and event frames", () => {
    expect(parseServerFrame('{"type": "ack", "group_id": "g1", "member_id": "a"}')).not.toBeNull();
    expect(parseServerFrame('{"type": "error", "text": "nope"}')).not.toBeNull();
    expect(
      parseServerFrame(
        '{"type": "event", "kind": "utterance", "group_id": "g1", "seq": 1, "ts": 2, "member_id": "m", "text": "hello"}',
      ),
    ).not.toBeNull();
  });

  it("returns null for malformed input instead of throwing", () => {
    expect(parseServerFrame("{")).toBeNull();
    expect(parseServerFrame('{"type": "event", "kind": "utterance"}')).toBeNull();
    expect(parseServerFrame('{"type": "teapot"}')).toBeNull();
  });
});
