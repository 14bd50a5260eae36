// Console entry point: socket, state, canvas, checkbox panel, teleop.
import { attachKeyboard, TeleopKeys } from "./input.js";
import { ReconnectingClient } from "./net.js";
import { ROBOT_CHANNELS, encodeCommand, parseServerMessage, } from "./protocol.js";
import { draw } from "./render.js";
import { ViewState, boxKey } from "./state.js";
const canvas = document.getElementById("floor");
const ctx = canvas.getContext("2d");
const panel = document.getElementById("agents");
const statusLine = document.getElementById("status");
const modeButtons = {
    expert: document.getElementById("mode-expert"),
    worker: document.getElementById("mode-worker"),
};
const pauseButton = document.getElementById("pause");
const speedInput = document.getElementById("speed");
const state = new ViewState();
const camera = { panX: 0, panY: 0, zoom: 1 };
const keys = new TeleopKeys();
let commandSeq = 0;
const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
const client = new ReconnectingClient({
    url: wsUrl,
    factory: (url) => new WebSocket(url),
    onMessage: (raw) => {
        const msg = parseServerMessage(raw);
        if (msg) {
            state.apply(msg);
            if (msg.type === "snapshot")
                rebuildPanel(msg);
        }
    },
    onStatus: (connected) => {
        if (connected)
            state.onConnect();
        else
            state.onDisconnect();
    },
});
function send(cmd) {
    return client.send(encodeCommand(cmd));
}
function sendToggle(kind, id, channel, on) {
    const commandId = `ui-${++commandSeq}`;
    state.optimisticToggle(boxKey(kind, id, channel), on, commandId);
    const sent = send({ type: "set_channel", agent_kind: kind, agent_id: id,
        channel, on, command_id: commandId });
    if (!sent)
        state.onDisconnect(); // queue nothing: server truth on reconnect
    refreshBoxes();
}
// -- checkbox panel -----------------------------------------------------------
let panelShape = "";
function rebuildPanel(snap) {
    const shape = `${snap.robots.length}:${snap.stations.length}`;
    if (shape === panelShape) {
        refreshBoxes();
        refreshStatus(snap);
        return;
    }
    panelShape = shape;
    panel.replaceChildren();
    for (const robot of snap.robots) {
        const row = document.createElement("div");
        row.className = "agent-row";
        const swatch = document.createElement("span");
        swatch.className = "swatch";
        swatch.style.background = robot.color;
        row.append(swatch, `R${robot.id}`);
        for (const channel of ROBOT_CHANNELS) {
            row.append(makeBox("robot", robot.id, channel));
        }
        panel.append(row);
    }
    for (const station of snap.stations) {
        const row = document.createElement("div");
        row.className = "agent-row";
        row.append(`S${station.id}`);
        row.append(makeBox("station", station.id, "balloon"));
        panel.append(row);
    }
    refreshBoxes();
    refreshStatus(snap);
}
function makeBox(kind, id, channel) {
    const label = document.createElement("label");
    const input = document.createElement("input");
    input.type = "checkbox";
    input.dataset.key = boxKey(kind, id, channel);
    input.addEventListener("change", () => sendToggle(kind, id, channel, input.checked));
    const short = { live_location: "loc", transparent_avatar: "ghost",
        trajectory: "path", balloon: "balloon" }[channel] ?? channel;
    label.append(input, short);
    return label;
}
function refreshBoxes() {
    for (const input of panel.querySelectorAll("input[data-key]")) {
        input.checked = state.boxValue(input.dataset.key);
    }
}
function refreshStatus(snap) {
    const parts = [
        state.connected ? "connected" : "reconnecting…",
        `t=${snap.sim_time.toFixed(1)}s`,
        `mode=${snap.mode}`,
        snap.paused ? "paused" : `speed=${snap.speed.toFixed(1)}x`,
    ];
    if (state.training) {
        const tr = state.training;
        parts.push(`iter=${tr.iteration} mix=${tr.mix.toFixed(2)} ` +
            `|D|=${tr.dataset_size} disagree=${tr.disable}`);
    }
    if (snap.complete)
        parts.push("trial complete");
    if (state.lastError)
        parts.push(`last error: ${state.lastError}`);
    statusLine.textContent = parts.join("  ·  ");
    pauseButton.textContent = snap.paused ? "resume" : "pause";
    modeButtons.expert.classList.toggle("active", snap.mode === "expert");
    modeButtons.worker.classList.toggle("active", snap.mode === "worker");
}
// -- controls -------------------------------------------------------------------
modeButtons.expert.addEventListener("click", () => send({ type: "mode", mode: "expert" }));
modeButtons.worker.addEventListener("click", () => send({ type: "mode", mode: "worker" }));
pauseButton.addEventListener("click", () => {
    const paused = state.snapshot?.paused ?? false;
    send({ type: paused ? "resume" : "pause" });
});
speedInput.addEventListener("change", () => {
    send({ type: "set_speed", multiplier: Number(speedInput.value) });
});
attachKeyboard(keys, window);
setInterval(() => {
    if (state.snapshot?.mode !== "worker")
        return;
    const cmd = keys.sample();
    if (cmd)
        send(cmd);
}, 100);
canvas.addEventListener("wheel", (ev) => {
    camera.zoom = Math.min(6, Math.max(0.4, camera.zoom * (ev.deltaY < 0 ? 1.1 : 0.9)));
    ev.preventDefault();
});
let dragging = null;
canvas.addEventListener("mousedown", (ev) => { dragging = [ev.clientX, ev.clientY]; });
window.addEventListener("mouseup", () => { dragging = null; });
window.addEventListener("mousemove", (ev) => {
    if (!dragging)
        return;
    camera.panX += ev.clientX - dragging[0];
    camera.panY += ev.clientY - dragging[1];
    dragging = [ev.clientX, ev.clientY];
});
function frame() {
    const ratio = window.devicePixelRatio || 1;
    const rect = canvas.getBoundingClientRect();
    if (canvas.width !== rect.width * ratio || canvas.height !== rect.height * ratio) {
        canvas.width = rect.width * ratio;
        canvas.height = rect.height * ratio;
    }
    draw(ctx, canvas, state.snapshot, camera);
    requestAnimationFrame(frame);
}
client.connect();
requestAnimationFrame(frame);
