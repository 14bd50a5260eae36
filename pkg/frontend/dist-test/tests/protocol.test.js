import assert from "node:assert/strict";
import { test } from "node:test";
import { encodeCommand, parseServerMessage } from "../src/protocol.js";
test("parses known message types", () => {
    const ack = parseServerMessage('{"type": "ack", "command_id": "c1"}');
    assert.ok(ack && ack.type === "ack");
    const err = parseServerMessage('{"type": "error", "message": "nope"}');
    assert.ok(err && err.type === "error");
    const status = parseServerMessage('{"type": "iteration_status", "iteration": 1, "mix": 0.9, ' +
        '"dataset_size": 225, "disable": 12}');
    assert.ok(status && status.type === "iteration_status");
});
test("rejects junk", () => {
    assert.equal(parseServerMessage("{nope"), null);
    assert.equal(parseServerMessage('"just a string"'), null);
    assert.equal(parseServerMessage('{"type": "martian"}'), null);
});
test("set_channel command encodes the server's schema", () => {
    const raw = encodeCommand({
        type: "set_channel", agent_kind: "robot", agent_id: 5,
        channel: "trajectory", on: false, command_id: "ui-1",
    });
    const parsed = JSON.parse(raw);
    assert.deepEqual(parsed, {
        type: "set_channel", agent_kind: "robot", agent_id: 5,
        channel: "trajectory", on: false, command_id: "ui-1",
    });
});
test("teleop command carries the three axes", () => {
    const parsed = JSON.parse(encodeCommand({ type: "teleop", forward: 1, strafe: 0, yaw_rate: -1.5 }));
    assert.equal(parsed.forward, 1);
    assert.equal(parsed.yaw_rate, -1.5);
});
