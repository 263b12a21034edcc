/** Console bootstrap: wires the WebSocket link, the view-state store, the
 * DOM controls, and a render loop decoupled from message ingestion (the
 * canvas always draws the latest snapshot only).
 */

import { SocketLike, WsLink } from "./net.js";
import {
  PARADIGM_LABELS,
  PARADIGMS,
  Paradigm,
  encodeCommand,
  encodeModeSet,
  parseInbound,
} from "./protocol.js";
import { drawAltitude, drawTopDown } from "./render.js";
import {
  ViewState,
  enabledLabels,
  initialState,
  isStale,
  onConnected,
  onDisconnected,
  onMessage,
  snapshotRateHz,
  trackCommand,
  trackModeSet,
} from "./state.js";

let state: ViewState = initialState();

function wsUrl(): string {
  const override = new URLSearchParams(location.search).get("ws");
  if (override) return override;
  return `ws://${location.host}/ws`;
}

const link = new WsLink(
  wsUrl(),
  {
    onOpen: () => {
      state = onConnected(state);
    },
    onClose: () => {
      state = onDisconnected(state);
    },
    onText: (text) => {
      const msg = parseInbound(text);
      if (msg) state = onMessage(state, msg, performance.now());
    },
  },
  // the DOM WebSocket's handler types are stricter than SocketLike's,
  // but the shapes line up at runtime
  (url) => new WebSocket(url) as unknown as SocketLike,
);

function sendCommand(paradigm: Paradigm, label: string): void {
  const tracked = trackCommand(state, paradigm, label, performance.now());
  state = tracked.state;
  link.send(encodeCommand(tracked.payloadSeq, paradigm, label, Date.now() % 1e7));
}

function sendMode(paradigm: Paradigm): void {
  const tracked = trackModeSet(state, paradigm, performance.now());
  state = tracked.state;
  link.send(encodeModeSet(tracked.payloadSeq, paradigm, Date.now() % 1e7));
}

// ---- DOM scaffolding --------------------------------------------------------

const $ = (id: string) => document.getElementById(id)!;

function buildControls(): void {
  const modeRow = $("mode-row");
  for (const paradigm of PARADIGMS) {
    const btn = document.createElement("button");
    btn.textContent = `mode ${paradigm}`;
    btn.className = "mode-btn";
    btn.onclick = () => sendMode(paradigm);
    modeRow.appendChild(btn);
  }
  const grid = $("command-grid");
  for (const paradigm of PARADIGMS) {
    const box = document.createElement("div");
    box.className = "cmd-group";
    const title = document.createElement("h3");
    title.textContent = paradigm;
    box.appendChild(title);
    for (const label of PARADIGM_LABELS[paradigm]) {
      const btn = document.createElement("button");
      btn.textContent = label.replace("_", "-");
      btn.dataset.paradigm = paradigm;
      btn.dataset.label = label;
      btn.onclick = () => sendCommand(paradigm, label);
      box.appendChild(btn);
    }
    grid.appendChild(box);
  }
  ($("view-topdown") as HTMLButtonElement).onclick = () => {
    state = { ...state, view: "topdown" };
  };
  ($("view-altitude") as HTMLButtonElement).onclick = () => {
    state = { ...state, view: "altitude" };
  };
}

function refreshControls(): void {
  const allowed = new Set(enabledLabels(state));
  document
    .querySelectorAll<HTMLButtonElement>("#command-grid button[data-label]")
    .forEach((btn) => {
      btn.disabled = !allowed.has(btn.dataset.label!);
    });
}

function refreshPanel(): void {
  const now = performance.now();
  const banner = $("banner");
  if (state.connection !== "open") {
    banner.textContent = "DISCONNECTED - retrying";
    banner.className = "banner bad";
  } else if (isStale(state, now)) {
    banner.textContent = "STALE - no snapshot for > 1 s";
    banner.className = "banner warn";
  } else {
    banner.textContent = `live  ${snapshotRateHz(state).toFixed(1)} Hz`;
    banner.className = "banner ok";
  }

  const snap = state.snapshot;
  $("mode-badge").textContent = snap ? snap.mode : "-";
  $("paradigm-badge").textContent = state.activeParadigm ?? "-";
  $("stat-tick").textContent = snap ? String(snap.tick) : "-";
  $("stat-dstar").textContent = snap ? snap.d_star.toFixed(2) : "-";
  $("stat-pairwise").textContent = snap
    ? snap.metrics.mean_pairwise.toFixed(2)
    : "-";
  $("stat-clusters").textContent = snap ? String(snap.metrics.clusters) : "-";
  $("stat-speed").textContent = snap
    ? snap.metrics.mean_speed.toFixed(2)
    : "-";

  const feed = $("feed");
  feed.innerHTML = "";
  for (const entry of state.feed) {
    const li = document.createElement("li");
    if (entry.kind === "gap") {
      li.textContent = "--- reconnected (gap) ---";
      li.className = "gap";
    } else {
      const mark =
        entry.status === "accepted" ? "ok" : entry.status === "rejected" ? "bad" : "pending";
      li.className = mark;
      const what =
        entry.kind === "mode_set"
          ? `mode_set ${entry.paradigm}`
          : `${entry.paradigm} ${entry.label} (${entry.confidence?.toFixed(1)})`;
      li.textContent = `#${entry.seq} ${what} ${
        entry.status === "rejected" ? `rejected: ${entry.reason}` : entry.status
      }`;
    }
    feed.appendChild(li);
  }
}

function renderLoop(): void {
  const canvas = $("view") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  if (state.snapshot) {
    if (state.view === "topdown") {
      drawTopDown(ctx, state.snapshot, canvas.width, canvas.height);
    } else {
      drawAltitude(ctx, state.snapshot, canvas.width, canvas.height);
    }
  }
  refreshControls();
  refreshPanel();
  requestAnimationFrame(renderLoop);
}

buildControls();
link.connect();
requestAnimationFrame(renderLoop);
