// Wire schema for the bridge socket. Mirrors the server's FORMATS.md
// definitions; every message is a JSON object with a "type" discriminator.
export const ROBOT_CHANNELS = [
    "live_location", "transparent_avatar", "trajectory",
];
export function parseServerMessage(raw) {
    let value;
    try {
        value = JSON.parse(raw);
    }
    catch {
        return null;
    }
    if (typeof value !== "object" || value === null)
        return null;
    const msg = value;
    switch (msg.type) {
        case "snapshot":
        case "iteration_status":
        case "ack":
        case "error":
            return value;
        default:
            return null;
    }
}
export function encodeCommand(cmd) {
    return JSON.stringify(cmd);
}
