// Keyboard teleop: WASD drive, Q/E turn. While in worker mode the current
// key state is sent at a fixed cadence; a zero vector is sent once when all
// keys lift so the worker stops (the server holds the last velocity).

import { TeleopCommand } from "./protocol.js";

export class TeleopKeys {
  private held = new Set<string>();
  private wasMoving = false;

  down(code: string): void {
    this.held.add(code);
  }

  up(code: string): void {
    this.held.delete(code);
  }

  clear(): void {
    this.held.clear();
  }

  /** Returns the command to send this tick, or null when idle. */
  sample(): TeleopCommand | null {
    const forward = (this.held.has("KeyW") ? 1 : 0) - (this.held.has("KeyS") ? 1 : 0);
    const strafe = (this.held.has("KeyA") ? 1 : 0) - (this.held.has("KeyD") ? 1 : 0);
    const yaw = (this.held.has("KeyQ") ? 1.5 : 0) - (this.held.has("KeyE") ? 1.5 : 0);
    const moving = forward !== 0 || strafe !== 0 || yaw !== 0;
    if (!moving && !this.wasMoving) return null;
    this.wasMoving = moving;
    return { type: "teleop", forward, strafe, yaw_rate: yaw };
  }
}

export function attachKeyboard(keys: TeleopKeys, target: {
  addEventListener(type: string, handler: (ev: KeyboardEvent) => void): void;
}): void {
  target.addEventListener("keydown", (ev) => {
    if (["KeyW", "KeyA", "KeyS", "KeyD", "KeyQ", "KeyE"].includes(ev.code)) {
      keys.down(ev.code);
      ev.preventDefault?.();
    }
  });
  target.addEventListener("keyup", (ev) => keys.up(ev.code));
}
