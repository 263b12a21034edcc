import { describe, expect, it, vi } from "vitest";

import { SocketLike, WsLink } from "../../src/net.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  closed = false;
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }
}

function collector() {
  const events: string[] = [];
  return {
    events,
    callbacks: {
      onOpen: () => events.push("open"),
      onClose: () => events.push("close"),
      onText: (t: string) => events.push(`text:${t}`),
    },
  };
}

describe("WsLink", () => {
  it("delivers text frames and lifecycle events", () => {
    const sockets: FakeSocket[] = [];
    const { events, callbacks } = collector();
    const link = new WsLink("ws://x/ws", callbacks, () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    });
    link.connect();
    sockets[0].onopen?.();
    sockets[0].onmessage?.({ data: "hello" });
    expect(events).toEqual(["open", "text:hello"]);
    expect(link.send("out")).toBe(true);
    expect(sockets[0].sent).toEqual(["out"]);
    link.close();
  });

  it("reconnects with backoff after close", () => {
    vi.useFakeTimers();
    try {
      const sockets: FakeSocket[] = [];
      const { events, callbacks } = collector();
      const link = new WsLink("ws://x/ws", callbacks, () => {
        const s = new FakeSocket();
        sockets.push(s);
        return s;
      });
      link.connect();
      sockets[0].onopen?.();
      sockets[0].onclose?.();
      expect(events).toEqual(["open", "close"]);
      expect(sockets).toHaveLength(1);
      vi.advanceTimersByTime(499);
      expect(sockets).toHaveLength(1);
      vi.advanceTimersByTime(2);
      expect(sockets).toHaveLength(2); // reconnected after 500 ms
      sockets[1].onopen?.();
      expect(events).toEqual(["open", "close", "open"]);
      link.close();
    } finally {
      vi.useRealTimers();
    }
  });

  it("send fails cleanly when no socket", () => {
    const { callbacks } = collector();
    const link = new WsLink("ws://x/ws", callbacks, () => new FakeSocket());
    expect(link.send("nope")).toBe(false);
  });
});
