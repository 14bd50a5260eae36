import assert from "node:assert/strict";
import { test } from "node:test";
import { ViewState, boxKey } from "../src/state.js";
function snapshot(overrides = {}) {
    return {
        type: "snapshot",
        sim_time: 1.0,
        tick: 10,
        mode: "expert",
        paused: false,
        speed: 1,
        complete: false,
        world: { width: 15, height: 12, cell_size: 0.5, shelves: [] },
        robots: [],
        stations: [],
        worker: { x: 0, y: 0, heading: 0, busy_until: 0 },
        checkboxes: {
            robots: {
                "0": { live_location: true, transparent_avatar: true, trajectory: true },
            },
            stations: { "0": true },
        },
        ...overrides,
    };
}
test("snapshot rebuilds checkbox truth", () => {
    const state = new ViewState();
    state.apply(snapshot());
    assert.equal(state.boxValue(boxKey("robot", 0, "trajectory")), true);
    assert.equal(state.boxValue(boxKey("station", 0, "balloon")), true);
});
test("optimistic toggle shows immediately and sticks on ack", () => {
    const state = new ViewState();
    state.apply(snapshot());
    const key = boxKey("robot", 0, "trajectory");
    state.optimisticToggle(key, false, "c1");
    assert.equal(state.boxValue(key), false);
    state.apply({ type: "ack", command_id: "c1" });
    assert.equal(state.pendingCount(), 0);
    assert.equal(state.boxValue(key), false);
});
test("rejected toggle rolls back to server truth", () => {
    const state = new ViewState();
    state.apply(snapshot());
    const key = boxKey("robot", 0, "trajectory");
    state.optimisticToggle(key, false, "c1");
    assert.equal(state.boxValue(key), false);
    state.apply({ type: "error", message: "unknown robot channel" });
    assert.equal(state.pendingCount(), 0);
    assert.equal(state.boxValue(key), true);
    assert.equal(state.lastError, "unknown robot channel");
});
test("unmatched replies resolve oldest-first", () => {
    const state = new ViewState();
    state.apply(snapshot());
    const a = boxKey("robot", 0, "live_location");
    const b = boxKey("station", 0, "balloon");
    state.optimisticToggle(a, false, "c1");
    state.optimisticToggle(b, false, "c2");
    state.apply({ type: "error", message: "nope" }); // resolves c1
    assert.equal(state.boxValue(a), true);
    assert.equal(state.boxValue(b), false);
    state.apply({ type: "ack", command_id: "c2" });
    assert.equal(state.boxValue(b), false);
    assert.equal(state.pendingCount(), 0);
});
test("disconnect drops optimistic edits; next snapshot is authoritative", () => {
    const state = new ViewState();
    state.apply(snapshot());
    const key = boxKey("station", 0, "balloon");
    state.optimisticToggle(key, false, "c9");
    assert.equal(state.boxValue(key), false);
    state.onDisconnect();
    assert.equal(state.boxValue(key), true); // rollback to last-known truth
    const snap = snapshot();
    snap.checkboxes.stations["0"] = false; // server applied it after all
    state.apply(snap);
    assert.equal(state.boxValue(key), false);
});
test("a single snapshot reconstructs the full view after a reset", () => {
    const state = new ViewState();
    state.apply(snapshot());
    state.apply({ type: "iteration_status", iteration: 3, mix: 0.5,
        dataset_size: 900, disable: 4 });
    const fresh = new ViewState();
    fresh.apply(snapshot({ training: { iteration: 3, mix: 0.5,
            dataset_size: 900, disable: 4 } }));
    assert.deepEqual(fresh.training, state.training);
    assert.equal(fresh.boxValue(boxKey("robot", 0, "trajectory")), state.boxValue(boxKey("robot", 0, "trajectory")));
});
