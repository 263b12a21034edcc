/** WebSocket link with automatic reconnect.
 *
 * The socket constructor is injectable so tests can drive the link with a
 * fake; the browser build passes the global WebSocket.
 */

import { backoffDelayMs } from "./state.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface LinkCallbacks {
  onOpen(): void;
  onClose(): void;
  onText(text: string): void;
}

export class WsLink {
  private socket: SocketLike | null = null;
  private attempt = 0;
  private stopped = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly url: string,
    private readonly callbacks: LinkCallbacks,
    private readonly factory: SocketFactory,
  ) {}

  connect(): void {
    if (this.stopped) return;
    let sock: SocketLike;
    try {
      sock = this.factory(this.url);
    } catch {
      this.scheduleReconnect();
      return;
    }
    this.socket = sock;
    sock.onopen = () => {
      this.attempt = 0;
      this.callbacks.onOpen();
    };
    sock.onmessage = (ev) => {
      if (typeof ev.data === "string") this.callbacks.onText(ev.data);
    };
    sock.onerror = () => {
      /* close always follows */
    };
    sock.onclose = () => {
      this.socket = null;
      this.callbacks.onClose();
      this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    if (this.stopped) return;
    const delay = backoffDelayMs(this.attempt);
    this.attempt += 1;
    this.timer = setTimeout(() => this.connect(), delay);
  }

  send(text: string): boolean {
    if (this.socket === null) return false;
    try {
      this.socket.send(text);
      return true;
    } catch {
      return false;
    }
  }

  close(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.socket?.close();
  }
}
