/** Console view model: pure reducers over inbound messages and clicks.
 *
 * The console never simulates anything locally; everything rendered comes
 * from gateway snapshots. Commands are tracked as pending until the ack or
 * error that echoes their seq arrives, then surface in the feed with the
 * gateway's verbatim reason.
 */

import {
  InboundMessage,
  PARADIGM_LABELS,
  Paradigm,
  Snapshot,
} from "./protocol.js";

export const FEED_LIMIT = 50;
export const STALE_AFTER_MS = 1000;

export type ConnectionStatus = "connecting" | "open" | "closed";

export interface FeedEntry {
  seq: number;
  kind: "command" | "mode_set" | "gap";
  paradigm?: Paradigm;
  label?: string;
  confidence?: number;
  status: "pending" | "accepted" | "rejected";
  reason?: string;
  atMs: number;
}

export interface ViewState {
  connection: ConnectionStatus;
  snapshot: Snapshot | null;
  lastSnapshotAtMs: number | null;
  snapshotIntervalsMs: number[];
  activeParadigm: Paradigm | null;
  feed: FeedEntry[]; // newest first, capped at FEED_LIMIT
  nextSeq: number;
  view: "topdown" | "altitude";
}

export function initialState(): ViewState {
  return {
    connection: "connecting",
    snapshot: null,
    lastSnapshotAtMs: null,
    snapshotIntervalsMs: [],
    activeParadigm: null,
    feed: [],
    nextSeq: 1,
    view: "topdown",
  };
}

function pushFeed(feed: FeedEntry[], entry: FeedEntry): FeedEntry[] {
  return [entry, ...feed].slice(0, FEED_LIMIT);
}

export function onConnected(state: ViewState): ViewState {
  const feed =
    state.feed.length > 0
      ? pushFeed(state.feed, {
          seq: 0,
          kind: "gap",
          status: "accepted",
          atMs: Date.now(),
        })
      : state.feed;
  return { ...state, connection: "open", feed };
}

export function onDisconnected(state: ViewState): ViewState {
  return { ...state, connection: "closed" };
}

export function onMessage(
  state: ViewState,
  msg: InboundMessage,
  nowMs: number,
): ViewState {
  switch (msg.kind) {
    case "state": {
      const intervals =
        state.lastSnapshotAtMs === null
          ? state.snapshotIntervalsMs
          : [...state.snapshotIntervalsMs, nowMs - state.lastSnapshotAtMs].slice(-20);
      return {
        ...state,
        snapshot: msg.snapshot,
        lastSnapshotAtMs: nowMs,
        snapshotIntervalsMs: intervals,
        activeParadigm: msg.snapshot.active_paradigm,
      };
    }
    case "ack": {
      let active = state.activeParadigm;
      if (msg.activeParadigm) active = msg.activeParadigm;
      return {
        ...state,
        activeParadigm: active,
        feed: state.feed.map((e) =>
          e.seq === msg.ackSeq && e.status === "pending"
            ? { ...e, status: "accepted" as const }
            : e,
        ),
      };
    }
    case "error": {
      if (msg.echoSeq === null) return state;
      return {
        ...state,
        feed: state.feed.map((e) =>
          e.seq === msg.echoSeq && e.status === "pending"
            ? { ...e, status: "rejected" as const, reason: msg.reason }
            : e,
        ),
      };
    }
    default:
      return state;
  }
}

export interface Outgoing {
  state: ViewState;
  payloadSeq: number;
}

export function trackCommand(
  state: ViewState,
  paradigm: Paradigm,
  label: string,
  nowMs: number,
): Outgoing {
  const seq = state.nextSeq;
  const entry: FeedEntry = {
    seq,
    kind: "command",
    paradigm,
    label,
    confidence: 1.0,
    status: "pending",
    atMs: nowMs,
  };
  return {
    state: { ...state, nextSeq: seq + 1, feed: pushFeed(state.feed, entry) },
    payloadSeq: seq,
  };
}

export function trackModeSet(
  state: ViewState,
  paradigm: Paradigm,
  nowMs: number,
): Outgoing {
  const seq = state.nextSeq;
  const entry: FeedEntry = {
    seq,
    kind: "mode_set",
    paradigm,
    status: "pending",
    atMs: nowMs,
  };
  return {
    state: { ...state, nextSeq: seq + 1, feed: pushFeed(state.feed, entry) },
    payloadSeq: seq,
  };
}

/** UI gating mirrors the gateway rule: only the active paradigm's command
 * buttons are enabled (mode switching itself is always allowed). */
export function enabledLabels(state: ViewState): string[] {
  if (state.connection !== "open" || state.activeParadigm === null) return [];
  return PARADIGM_LABELS[state.activeParadigm];
}

export function isStale(state: ViewState, nowMs: number): boolean {
  if (state.lastSnapshotAtMs === null) return true;
  return nowMs - state.lastSnapshotAtMs > STALE_AFTER_MS;
}

export function snapshotRateHz(state: ViewState): number {
  const xs = state.snapshotIntervalsMs;
  if (xs.length === 0) return 0;
  const mean = xs.reduce((a, b) => a + b, 0) / xs.length;
  return mean > 0 ? 1000 / mean : 0;
}

/** Reconnect backoff: deterministic doubling, capped at 8 s. */
export function backoffDelayMs(attempt: number): number {
  return Math.min(500 * 2 ** Math.max(0, attempt), 8000);
}
