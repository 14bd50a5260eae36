import assert from "node:assert/strict";
import { test } from "node:test";
import { ReconnectingClient } from "../src/net.js";
class FakeSocket {
    constructor() {
        this.sent = [];
        this.closed = false;
        this.onopen = null;
        this.onclose = null;
        this.onmessage = null;
        this.onerror = null;
    }
    send(data) {
        this.sent.push(data);
    }
    close() {
        this.closed = true;
        this.onclose?.();
    }
}
function harness() {
    const sockets = [];
    const scheduled = [];
    const messages = [];
    const statuses = [];
    const client = new ReconnectingClient({
        url: "ws://test/ws",
        factory: () => {
            const s = new FakeSocket();
            sockets.push(s);
            return s;
        },
        onMessage: (raw) => messages.push(raw),
        onStatus: (up) => statuses.push(up),
        baseDelayMs: 100,
        maxDelayMs: 800,
        schedule: (fn, ms) => scheduled.push({ fn, ms }),
    });
    return { client, sockets, scheduled, messages, statuses };
}
test("delivers messages after connecting", () => {
    const h = harness();
    h.client.connect();
    h.sockets[0].onopen();
    h.sockets[0].onmessage({ data: '{"type":"ack","command_id":"x"}' });
    assert.deepEqual(h.statuses, [true]);
    assert.equal(h.messages.length, 1);
    assert.ok(h.client.send("hello"));
    assert.deepEqual(h.sockets[0].sent, ["hello"]);
});
test("reconnects with exponential backoff and resets on success", () => {
    const h = harness();
    h.client.connect();
    h.sockets[0].onclose(); // drop before open
    assert.equal(h.scheduled[0].ms, 100);
    h.scheduled[0].fn(); // retry 1
    h.sockets[1].onclose();
    assert.equal(h.scheduled[1].ms, 200);
    h.scheduled[1].fn(); // retry 2
    h.sockets[2].onclose();
    assert.equal(h.scheduled[2].ms, 400);
    h.scheduled[2].fn();
    h.sockets[3].onopen(); // success resets the backoff
    h.sockets[3].onclose();
    assert.equal(h.scheduled[3].ms, 100);
});
test("backoff is capped", () => {
    const h = harness();
    h.client.connect();
    for (let i = 0; i < 6; i++) {
        h.sockets[i].onclose();
        h.scheduled[i].fn();
    }
    assert.equal(h.scheduled[5].ms, 800);
});
test("send fails while disconnected", () => {
    const h = harness();
    h.client.connect();
    h.sockets[0].onclose();
    assert.equal(h.client.send("x"), false);
});
test("stop prevents further reconnects", () => {
    const h = harness();
    h.client.connect();
    h.sockets[0].onopen();
    h.client.stop();
    assert.ok(h.sockets[0].closed);
    const before = h.scheduled.length;
    h.scheduled.slice(before).forEach((s) => s.fn());
    assert.equal(h.sockets.length, 1);
});
