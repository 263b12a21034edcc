/** Gateway wire schema: newline-free JSON text frames over WebSocket. */

export type Paradigm = "MI" | "VI" | "SI";

export const PARADIGMS: Paradigm[] = ["MI", "VI", "SI"];

export const PARADIGM_LABELS: Record<Paradigm, string[]> = {
  MI: ["left", "right", "up", "down"],
  VI: ["fall_in", "spread_out", "split"],
  SI: ["go", "stop", "follow_me", "return"],
};

export interface AgentDot {
  id: number;
  p: [number, number, number];
  v: [number, number, number];
  group: number;
}

export interface Snapshot {
  tick: number;
  mode: string;
  d_star: number;
  split_active: boolean;
  active_paradigm: Paradigm;
  agents: AgentDot[];
  metrics: {
    mean_pairwise: number;
    min_pairwise: number;
    clusters: number;
    mean_speed: number;
  };
}

export type InboundMessage =
  | { kind: "state"; seq: number; ts: number; snapshot: Snapshot }
  | { kind: "ack"; seq: number; ts: number; ackSeq: number; activeParadigm?: Paradigm }
  | { kind: "error"; seq: number; ts: number; reason: string; echoSeq: number | null }
  | { kind: "ignored" };

/** Parse one inbound frame; malformed input comes back as null, never throws. */
export function parseInbound(text: string): InboundMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const m = doc as Record<string, unknown>;
  if (m.v !== 1 || typeof m.type !== "string") return null;
  const seq = typeof m.seq === "number" ? m.seq : 0;
  const ts = typeof m.ts === "number" ? m.ts : 0;

  if (m.type === "state") {
    const snap = asSnapshot(m);
    return snap === null ? null : { kind: "state", seq, ts, snapshot: snap };
  }
  if (m.type === "ack") {
    if (typeof m.ack_seq !== "number") return null;
    const active =
      typeof m.active_paradigm === "string" && isParadigm(m.active_paradigm)
        ? m.active_paradigm
        : undefined;
    return { kind: "ack", seq, ts, ackSeq: m.ack_seq, activeParadigm: active };
  }
  if (m.type === "error") {
    const reason = typeof m.reason === "string" ? m.reason : "unknown";
    const echo = typeof m.echo_seq === "number" ? m.echo_seq : null;
    return { kind: "error", seq, ts, reason, echoSeq: echo };
  }
  return { kind: "ignored" };
}

function isParadigm(s: string): s is Paradigm {
  return (PARADIGMS as string[]).includes(s);
}

function asSnapshot(m: Record<string, unknown>): Snapshot | null {
  if (!Array.isArray(m.agents)) return null;
  if (typeof m.tick !== "number" || typeof m.mode !== "string") return null;
  const metrics = m.metrics as Snapshot["metrics"] | undefined;
  if (!metrics || typeof metrics.mean_pairwise !== "number") return null;
  const paradigm =
    typeof m.active_paradigm === "string" && isParadigm(m.active_paradigm)
      ? m.active_paradigm
      : "SI";
  const agents: AgentDot[] = [];
  for (const raw of m.agents) {
    const a = raw as Record<string, unknown>;
    if (!Array.isArray(a.p) || a.p.length !== 3) return null;
    agents.push({
      id: Number(a.id),
      p: [Number(a.p[0]), Number(a.p[1]), Number(a.p[2])],
      v: Array.isArray(a.v)
        ? [Number(a.v[0]), Number(a.v[1]), Number(a.v[2])]
        : [0, 0, 0],
      group: Number(a.group ?? 0),
    });
  }
  return {
    tick: m.tick,
    mode: m.mode,
    d_star: typeof m.d_star === "number" ? m.d_star : NaN,
    split_active: Boolean(m.split_active),
    active_paradigm: paradigm,
    agents,
    metrics,
  };
}

/** Operator commands always carry confidence 1.0 and origin "operator" so
 * session logs distinguish human clicks from decoder output. */
export function encodeCommand(
  seq: number,
  paradigm: Paradigm,
  label: string,
  tsMs: number,
): string {
  return JSON.stringify({
    v: 1,
    type: "command",
    seq,
    ts: tsMs,
    paradigm,
    label,
    confidence: 1.0,
    origin: "operator",
  });
}

export function encodeModeSet(seq: number, paradigm: Paradigm, tsMs: number): string {
  return JSON.stringify({ v: 1, type: "mode_set", seq, ts: tsMs, paradigm });
}
