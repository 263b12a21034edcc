/** Canvas drawing: top-down XY plane and altitude profile. */

import { AgentDot, Snapshot } from "./protocol.js";

export const GROUP_COLORS = ["#4fc3f7", "#ffb74d"];

export interface Mapping {
  scale: number;
  offsetX: number;
  offsetY: number;
}

/** World-to-canvas mapping that keeps all agents in view with padding and
 * never collapses for a single agent or a degenerate cloud. */
export function fitView(
  agents: AgentDot[],
  width: number,
  height: number,
  pad = 40,
  minSpan = 10,
): Mapping {
  let xs = agents.map((a) => a.p[0]);
  let ys = agents.map((a) => a.p[1]);
  if (xs.length === 0) {
    xs = [0];
    ys = [0];
  }
  const cx = (Math.min(...xs) + Math.max(...xs)) / 2;
  const cy = (Math.min(...ys) + Math.max(...ys)) / 2;
  const span = Math.max(
    Math.max(...xs) - Math.min(...xs),
    Math.max(...ys) - Math.min(...ys),
    minSpan,
  );
  const scale = Math.min(width - 2 * pad, height - 2 * pad) / span;
  return {
    scale,
    offsetX: width / 2 - cx * scale,
    offsetY: height / 2 + cy * scale,
  };
}

export function toCanvas(map: Mapping, x: number, y: number): [number, number] {
  return [map.offsetX + x * map.scale, map.offsetY - y * map.scale];
}

export function drawTopDown(
  ctx: CanvasRenderingContext2D,
  snap: Snapshot,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  const map = fitView(snap.agents, width, height);

  // reference grid every 5 m
  ctx.strokeStyle = "#223";
  ctx.lineWidth = 1;
  const gridStep = 5 * map.scale;
  if (gridStep > 8) {
    for (let gx = map.offsetX % gridStep; gx < width; gx += gridStep) {
      ctx.beginPath();
      ctx.moveTo(gx, 0);
      ctx.lineTo(gx, height);
      ctx.stroke();
    }
    for (let gy = map.offsetY % gridStep; gy < height; gy += gridStep) {
      ctx.beginPath();
      ctx.moveTo(0, gy);
      ctx.lineTo(width, gy);
      ctx.stroke();
    }
  }

  for (const agent of snap.agents) {
    const [x, y] = toCanvas(map, agent.p[0], agent.p[1]);
    ctx.fillStyle = GROUP_COLORS[agent.group % GROUP_COLORS.length];
    ctx.beginPath();
    ctx.arc(x, y, 6, 0, 2 * Math.PI);
    ctx.fill();
    // heading tick
    const speed = Math.hypot(agent.v[0], agent.v[1]);
    if (speed > 0.05) {
      ctx.strokeStyle = ctx.fillStyle;
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(x, y);
      ctx.lineTo(x + (agent.v[0] / speed) * 12, y - (agent.v[1] / speed) * 12);
      ctx.stroke();
    }
    ctx.fillStyle = "#99a";
    ctx.font = "10px monospace";
    ctx.fillText(String(agent.id), x + 8, y - 8);
  }
}

export function drawAltitude(
  ctx: CanvasRenderingContext2D,
  snap: Snapshot,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  const zs = snap.agents.map((a) => a.p[2]);
  const zMax = Math.max(10, ...zs) * 1.2;
  const slot = width / Math.max(1, snap.agents.length);

  ctx.strokeStyle = "#334";
  ctx.beginPath();
  ctx.moveTo(0, height - 1);
  ctx.lineTo(width, height - 1);
  ctx.stroke();

  snap.agents.forEach((agent, i) => {
    const h = (agent.p[2] / zMax) * (height - 10);
    const x = i * slot + slot / 2;
    ctx.fillStyle = GROUP_COLORS[agent.group % GROUP_COLORS.length];
    ctx.fillRect(x - 4, height - 1 - h, 8, h);
    ctx.fillStyle = "#99a";
    ctx.font = "9px monospace";
    ctx.fillText(agent.p[2].toFixed(1), x - 8, height - 4 - h);
  });
}
