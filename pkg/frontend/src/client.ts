/**
 * WebSocket chat client: connects, creates its group, and feeds every
 * inbound frame through the pure session reducer.
 */

import { ClientFrame, encodeClientFrame, parseServerFrame } from "./protocol.js";
import { SessionView, applyFrame, newSession } from "./session.js";

export interface ChatClientOptions {
  endpoint: string;
  memberName: string;
  onChange: (view: SessionView) => void;
  onLog?: (message: string) => void;
}

export class ChatClient {
  private ws: WebSocket | null = null;
  private view: SessionView;
  private readonly options: ChatClientOptions;

  constructor(options: ChatClientOptions) {
    this.options = options;
    this.view = newSession(options.memberName);
  }

  get current(): SessionView {
    return this.view;
  }

  connect(): void {
    const ws = new WebSocket(this.options.endpoint);
    this.ws = ws;
    ws.onopen = () => {
      this.sendFrame({
        type: "create_group",
        member_id: this.options.memberName,
        display_name: this.options.memberName,
      });
    };
    ws.onmessage = (message: MessageEvent) => {
      const frame = parseServerFrame(String(message.data));
      if (frame === null) {
        this.options.onLog?.(`malformed frame skipped: ${String(message.data).slice(0, 80)}`);
      }
      this.update(applyFrame(this.view, frame));
    };
    ws.onerror = () => {
      const next = { ...this.view, errors: [...this.view.errors, "connection error"] };
      next.connection = "error";
      this.update(next);
    };
    ws.onclose = () => {
      if (this.view.connection !== "ended") {
        this.update({ ...this.view, connection: "ended" });
      }
    };
  }

  /** Send an utterance; empty text is refused before it reaches the wire. */
  sendUtterance(text: string): boolean {
    const trimmed = text.trim();
    if (!trimmed || this.view.groupId === null || this.view.connection !== "joined") {
      return false;
    }
    this.sendFrame({
      type: "utterance",
      group_id: this.view.groupId,
      member_id: this.view.memberId,
      text: trimmed,
    });
    return true;
  }

  leave(): void {
    if (this.view.groupId !== null) {
      this.sendFrame({
        type: "leave",
        group_id: this.view.groupId,
        member_id: this.view.memberId,
      });
    }
    this.ws?.close();
  }

  private sendFrame(frame: ClientFrame): void {
    // schema-validate everything that leaves the client
    this.ws?.send(encodeClientFrame(frame));
  }

  private update(view: SessionView): void {
    this.view = view;
    this.options.onChange(view);
  }
}
