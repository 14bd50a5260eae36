// Canvas drawing: physical entities always, overlays only when their
// channel is enabled. Top-down orthographic view, y up.

import { RobotView, SnapshotMessage, StationView } from "./protocol.js";

export interface Camera {
  panX: number;
  panY: number;
  zoom: number; // extra zoom on top of fit-to-canvas
}

function fitScale(canvas: HTMLCanvasElement, snap: SnapshotMessage): number {
  const sx = canvas.width / snap.world.width;
  const sy = canvas.height / snap.world.height;
  return Math.min(sx, sy) * 0.96;
}

export function draw(ctx: CanvasRenderingContext2D, canvas: HTMLCanvasElement,
                     snap: SnapshotMessage | null, camera: Camera): void {
  ctx.fillStyle = "#15181d";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (!snap) {
    ctx.fillStyle = "#9aa4b0";
    ctx.font = "16px system-ui, sans-serif";
    ctx.textAlign = "center";
    ctx.fillText("connecting…", canvas.width / 2, canvas.height / 2);
    return;
  }
  const scale = fitScale(canvas, snap) * camera.zoom;
  const ox = (canvas.width - snap.world.width * scale) / 2 + camera.panX;
  const oy = (canvas.height + snap.world.height * scale) / 2 + camera.panY;
  const X = (x: number) => ox + x * scale;
  const Y = (y: number) => oy - y * scale;

  drawFloor(ctx, snap, X, Y, scale);
  for (const s of snap.stations) drawStation(ctx, s, X, Y, scale);
  for (const r of snap.robots) drawTrajectory(ctx, r, X, Y, scale);
  for (const r of snap.robots) drawGhost(ctx, r, X, Y, scale);
  for (const r of snap.robots) drawRobot(ctx, r, X, Y, scale);
  for (const s of snap.stations) drawBalloon(ctx, s, X, Y, scale);
  drawWorker(ctx, snap, X, Y, scale);
}

type Map1 = (v: number) => number;

function drawFloor(ctx: CanvasRenderingContext2D, snap: SnapshotMessage,
                   X: Map1, Y: Map1, scale: number): void {
  ctx.strokeStyle = "#262b33";
  ctx.lineWidth = 1;
  ctx.strokeRect(X(0), Y(snap.world.height), snap.world.width * scale,
                 snap.world.height * scale);
  const cs = snap.world.cell_size;
  ctx.fillStyle = "#3a4250";
  for (const [c, r] of snap.world.shelves) {
    ctx.fillRect(X(c * cs), Y((r + 1) * cs), cs * scale, cs * scale);
  }
}

function drawStation(ctx: CanvasRenderingContext2D, s: StationView,
                     X: Map1, Y: Map1, scale: number): void {
  const half = 0.45 * scale;
  ctx.fillStyle = "#22543d";
  ctx.fillRect(X(s.x) - half, Y(s.y) - half, half * 2, half * 2);
  ctx.strokeStyle = "#48bb78";
  ctx.lineWidth = 2;
  ctx.strokeRect(X(s.x) - half, Y(s.y) - half, half * 2, half * 2);
  ctx.fillStyle = "#c6f6d5";
  ctx.font = `${Math.max(10, 0.5 * scale)}px system-ui, sans-serif`;
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  ctx.fillText(`S${s.id}`, X(s.x), Y(s.y));
  if (s.waiting.length > 0) {
    ctx.fillStyle = "#f6e05e";
    ctx.fillText(`${s.waiting.length}`, X(s.x), Y(s.y) - half - 8);
  }
}

function drawBalloon(ctx: CanvasRenderingContext2D, s: StationView,
                     X: Map1, Y: Map1, scale: number): void {
  if (!s.balloon) return;
  const bx = X(s.x);
  const by = Y(s.y) - 1.6 * scale;
  ctx.strokeStyle = "#f6ad55";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.moveTo(bx, Y(s.y) - 0.45 * scale);
  ctx.lineTo(bx, by + 0.35 * scale);
  ctx.stroke();
  ctx.fillStyle = "#f6ad55";
  ctx.beginPath();
  ctx.arc(bx, by, 0.35 * scale, 0, Math.PI * 2);
  ctx.fill();
  ctx.fillStyle = "#1a202c";
  ctx.font = `${Math.max(9, 0.4 * scale)}px system-ui, sans-serif`;
  ctx.fillText(`${s.id}`, bx, by);
}

function drawTrajectory(ctx: CanvasRenderingContext2D, r: RobotView,
                        X: Map1, Y: Map1, scale: number): void {
  if (!r.channels.trajectory || r.polyline.length < 2) return;
  ctx.strokeStyle = r.color;
  ctx.globalAlpha = 0.75;
  ctx.lineCap = "round";
  for (let i = 0; i < r.polyline.length - 1; i++) {
    const [x0, y0, w0] = r.polyline[i];
    const [x1, y1, w1] = r.polyline[i + 1];
    ctx.lineWidth = Math.max(1, ((w0 + w1) / 2) * scale);
    ctx.beginPath();
    ctx.moveTo(X(x0), Y(y0));
    ctx.lineTo(X(x1), Y(y1));
    ctx.stroke();
  }
  ctx.globalAlpha = 1;
}

/** Position along the polyline at a [0,1) fraction of its arc length. */
export function pointAlongPolyline(polyline: [number, number, number][],
                                   fraction: number): [number, number] {
  if (polyline.length === 0) return [0, 0];
  if (polyline.length === 1) return [polyline[0][0], polyline[0][1]];
  const lengths: number[] = [];
  let total = 0;
  for (let i = 0; i < polyline.length - 1; i++) {
    const dx = polyline[i + 1][0] - polyline[i][0];
    const dy = polyline[i + 1][1] - polyline[i][1];
    const len = Math.hypot(dx, dy);
    lengths.push(len);
    total += len;
  }
  if (total === 0) return [polyline[0][0], polyline[0][1]];
  let remaining = fraction * total;
  for (let i = 0; i < lengths.length; i++) {
    if (remaining <= lengths[i]) {
      const t = lengths[i] === 0 ? 0 : remaining / lengths[i];
      return [
        polyline[i][0] + (polyline[i + 1][0] - polyline[i][0]) * t,
        polyline[i][1] + (polyline[i + 1][1] - polyline[i][1]) * t,
      ];
    }
    remaining -= lengths[i];
  }
  const last = polyline[polyline.length - 1];
  return [last[0], last[1]];
}

function drawGhost(ctx: CanvasRenderingContext2D, r: RobotView,
                   X: Map1, Y: Map1, scale: number): void {
  if (!r.channels.transparent_avatar || r.polyline.length < 2) return;
  const [gx, gy] = pointAlongPolyline(r.polyline, r.avatar_phase);
  ctx.globalAlpha = 0.35;
  ctx.fillStyle = r.color;
  ctx.beginPath();
  ctx.arc(X(gx), Y(gy), 0.28 * scale, 0, Math.PI * 2);
  ctx.fill();
  ctx.globalAlpha = 1;
}

function drawRobot(ctx: CanvasRenderingContext2D, r: RobotView,
                   X: Map1, Y: Map1, scale: number): void {
  const radius = 0.3 * scale;
  // the physical robot is always visible in the console's god view
  ctx.fillStyle = r.color;
  ctx.beginPath();
  ctx.arc(X(r.x), Y(r.y), radius, 0, Math.PI * 2);
  ctx.fill();
  ctx.strokeStyle = "#0d0f12";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(X(r.x), Y(r.y));
  ctx.lineTo(X(r.x + 0.45 * Math.cos(r.heading)),
             Y(r.y + 0.45 * Math.sin(r.heading)));
  ctx.stroke();
  if (r.carrying) {
    ctx.fillStyle = "#d69e2e";
    ctx.fillRect(X(r.x) - 3, Y(r.y) - 3, 6, 6);
  }
  if (r.channels.live_location) {
    // the live-location marker: a bright halo plus the robot id
    ctx.strokeStyle = "#ffffff";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(X(r.x), Y(r.y), radius + 3, 0, Math.PI * 2);
    ctx.stroke();
    ctx.fillStyle = "#ffffff";
    ctx.font = `${Math.max(9, 0.45 * scale)}px system-ui, sans-serif`;
    ctx.textAlign = "center";
    ctx.fillText(`${r.id}`, X(r.x), Y(r.y) - radius - 8);
  }
}

function drawWorker(ctx: CanvasRenderingContext2D, snap: SnapshotMessage,
                    X: Map1, Y: Map1, scale: number): void {
  const w = snap.worker;
  const size = 0.4 * scale;
  ctx.save();
  ctx.translate(X(w.x), Y(w.y));
  ctx.rotate(-w.heading);
  // view wedge
  ctx.fillStyle = "rgba(237, 242, 247, 0.07)";
  ctx.beginPath();
  ctx.moveTo(0, 0);
  ctx.arc(0, 0, 5 * scale, -Math.PI / 3, Math.PI / 3);
  ctx.closePath();
  ctx.fill();
  // body
  ctx.fillStyle = "#edf2f7";
  ctx.beginPath();
  ctx.moveTo(size, 0);
  ctx.lineTo(-size * 0.7, size * 0.6);
  ctx.lineTo(-size * 0.7, -size * 0.6);
  ctx.closePath();
  ctx.fill();
  ctx.restore();
  if (snap.sim_time < w.busy_until) {
    ctx.fillStyle = "#fc8181";
    ctx.font = `${Math.max(9, 0.4 * scale)}px system-ui, sans-serif`;
    ctx.textAlign = "center";
    ctx.fillText("deciding…", X(w.x), Y(w.y) - 0.7 * scale);
  }
}
