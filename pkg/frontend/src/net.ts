// Reconnecting wrapper around the control WebSocket.  Commands sent
// while the socket is down are buffered (bounded) and flushed on open;
// reconnect attempts back off exponentially and reset once a
// connection succeeds.

import type { Command, ServerMessage } from "./protocol";
import { encodeCommand, parseServerMessage, ProtocolError } from "./protocol";

export type SocketStatus = "connecting" | "open" | "waiting" | "closed";

export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
}

export interface SocketOptions {
  onMessage: (msg: ServerMessage) => void;
  onStatus?: (status: SocketStatus, attempt: number) => void;
  onProtocolError?: (err: ProtocolError) => void;
  factory?: (url: string) => WebSocketLike;
  baseDelayMs?: number;
  maxDelayMs?: number;
}

const SEND_BUFFER_LIMIT = 32;

export class SocketClient {
  private readonly url: string;
  private readonly opts: SocketOptions;
  private ws: WebSocketLike | null = null;
  private buffer: Command[] = [];
  private attempt = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;
  private lastStatus: SocketStatus = "closed";

  constructor(url: string, opts: SocketOptions) {
    this.url = url;
    this.opts = opts;
  }

  connect(): void {
    if (this.stopped) return;
    const factory =
      this.opts.factory ??
      ((u: string) => new WebSocket(u) as unknown as WebSocketLike);
    this.status("connecting");
    const ws = factory(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.attempt = 0;
      this.status("open");
      const queued = this.buffer;
      this.buffer = [];
      for (const cmd of queued) ws.send(encodeCommand(cmd));
    };
    ws.onmessage = (ev) => {
      let msg: ServerMessage;
      try {
        msg = parseServerMessage(ev.data);
      } catch (err) {
        this.opts.onProtocolError?.(err as ProtocolError);
        return;
      }
      this.opts.onMessage(msg);
    };
    ws.onerror = () => {
      // the close handler owns reconnection; errors always precede close
    };
    ws.onclose = () => {
      if (this.ws !== ws) return;
      this.ws = null;
      if (this.stopped) {
        this.status("closed");
        return;
      }
      this.scheduleReconnect();
    };
  }

  /** Delay before reconnect attempt n (0-based): base * 2^n, capped. */
  reconnectDelay(attempt: number): number {
    const base = this.opts.baseDelayMs ?? 500;
    const cap = this.opts.maxDelayMs ?? 8000;
    return Math.min(cap, base * 2 ** attempt);
  }

  private scheduleReconnect(): void {
    const delay = this.reconnectDelay(this.attempt);
    this.attempt += 1;
    this.status("waiting");
    this.timer = setTimeout(() => {
      this.timer = null;
      this.connect();
    }, delay);
  }

  /** True when handed to the socket now, false when buffered or dropped. */
  send(cmd: Command): boolean {
    if (this.ws !== null && this.lastStatus === "open") {
      this.ws.send(encodeCommand(cmd));
      return true;
    }
    if (this.buffer.length < SEND_BUFFER_LIMIT) this.buffer.push(cmd);
    return false;
  }

  close(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    if (this.ws !== null) {
      this.ws.close();
      this.ws = null;
    }
    this.status("closed");
  }

  private status(s: SocketStatus): void {
    this.lastStatus = s;
    this.opts.onStatus?.(s, this.attempt);
  }

  get currentStatus(): SocketStatus {
    return this.lastStatus;
  }
}

/** Control socket URL for the page, overridable with ?ws=<url>. */
export function socketUrl(loc: {
  protocol: string;
  host: string;
  search: string;
}): string {
  const override = new URLSearchParams(loc.search).get("ws");
  if (override !== null && override !== "") return override;
  const scheme = loc.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${loc.host}/ws`;
}
