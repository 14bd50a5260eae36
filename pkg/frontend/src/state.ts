// View-side state: the latest snapshot plus a checkbox matrix that tracks
// server truth with optimistic local edits.
//
// The console holds no simulation truth of its own: a single snapshot
// rebuilds the whole view, and every optimistic edit is resolved by the
// server's ack (keep) or error reply (roll back). Replies arrive in send
// order, so unresolved edits resolve oldest-first when an id is missing.

import {
  IterationStatus, ServerMessage, SnapshotMessage,
} from "./protocol.js";

export type BoxKey = string; // "robot:3:trajectory" | "station:1:balloon"

export function boxKey(kind: "robot" | "station", id: number, channel: string): BoxKey {
  return `${kind}:${id}:${channel}`;
}

interface PendingEdit {
  commandId: string;
  key: BoxKey;
  value: boolean;
}

export class ViewState {
  snapshot: SnapshotMessage | null = null;
  training: IterationStatus | null = null;
  connected = false;
  lastError: string | null = null;
  private serverBoxes = new Map<BoxKey, boolean>();
  private pending: PendingEdit[] = [];

  /** Displayed checkbox value: optimistic edit if one is in flight. */
  boxValue(key: BoxKey): boolean {
    for (let i = this.pending.length - 1; i >= 0; i--) {
      if (this.pending[i].key === key) return this.pending[i].value;
    }
    return this.serverBoxes.get(key) ?? true;
  }

  /** All in-flight edits (exposed for tests and the renderer). */
  pendingCount(): number {
    return this.pending.length;
  }

  optimisticToggle(key: BoxKey, value: boolean, commandId: string): void {
    this.pending.push({ commandId, key, value });
  }

  apply(msg: ServerMessage): void {
    switch (msg.type) {
      case "snapshot":
        this.applySnapshot(msg);
        break;
      case "iteration_status": {
        const { iteration, mix, dataset_size, disable } = msg;
        this.training = { iteration, mix, dataset_size, disable };
        break;
      }
      case "ack":
        this.resolve(msg.command_id, true);
        break;
      case "error":
        this.lastError = msg.message;
        this.resolve(null, false);
        break;
    }
  }

  private applySnapshot(snap: SnapshotMessage): void {
    this.snapshot = snap;
    if (snap.training) this.training = snap.training;
    this.serverBoxes.clear();
    for (const [id, channels] of Object.entries(snap.checkboxes.robots)) {
      for (const [channel, on] of Object.entries(channels)) {
        this.serverBoxes.set(boxKey("robot", Number(id), channel), on);
      }
    }
    for (const [id, on] of Object.entries(snap.checkboxes.stations)) {
      this.serverBoxes.set(boxKey("station", Number(id), "balloon"), on);
    }
  }

  /** Resolve one pending edit: by id when the server echoed one, else the
   * oldest (replies are ordered). A rejected edit is dropped, which rolls
   * the displayed value back to server truth. */
  private resolve(commandId: string | null, accepted: boolean): void {
    let index = -1;
    if (commandId !== null) {
      index = this.pending.findIndex((p) => p.commandId === commandId);
    } else if (this.pending.length > 0) {
      index = 0;
    }
    if (index < 0) return;
    const [edit] = this.pending.splice(index, 1);
    if (accepted) {
      // the server will confirm via the next snapshot; reflect it now so the
      // box does not flap while that snapshot is in flight
      this.serverBoxes.set(edit.key, edit.value);
    }
  }

  /** A dropped connection invalidates optimistic edits; the next snapshot
   * after reconnecting carries authoritative checkbox truth. */
  onDisconnect(): void {
    this.connected = false;
    this.pending = [];
  }

  onConnect(): void {
    this.connected = true;
  }
}
