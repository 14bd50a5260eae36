// Wire schema for the bridge socket. Mirrors the server's FORMATS.md
// definitions; every message is a JSON object with a "type" discriminator.

export type RobotChannel = "live_location" | "transparent_avatar" | "trajectory";

export const ROBOT_CHANNELS: RobotChannel[] = [
  "live_location", "transparent_avatar", "trajectory",
];

export interface RobotView {
  id: number;
  x: number;
  y: number;
  heading: number;
  status: string;
  carrying: boolean;
  remaining: number;
  color: string;
  channels: Record<RobotChannel, boolean>;
  polyline: [number, number, number][]; // x, y, width
  avatar_phase: number;
}

export interface StationView {
  id: number;
  x: number;
  y: number;
  waiting: number[];
  balloon: boolean;
}

export interface SnapshotMessage {
  type: "snapshot";
  sim_time: number;
  tick: number;
  mode: "expert" | "worker";
  paused: boolean;
  speed: number;
  complete: boolean;
  world: {
    width: number;
    height: number;
    cell_size: number;
    shelves: [number, number][];
  };
  robots: RobotView[];
  stations: StationView[];
  worker: { x: number; y: number; heading: number; busy_until: number };
  checkboxes: {
    robots: Record<string, Record<RobotChannel, boolean>>;
    stations: Record<string, boolean>;
  };
  training?: IterationStatus;
}

export interface IterationStatus {
  iteration: number;
  mix: number;
  dataset_size: number;
  disable: number;
}

export interface AckMessage {
  type: "ack";
  command_id: string;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage =
  | SnapshotMessage
  | (IterationStatus & { type: "iteration_status" })
  | AckMessage
  | ErrorMessage;

export interface SetChannelCommand {
  type: "set_channel";
  agent_kind: "robot" | "station";
  agent_id: number;
  channel: string;
  on: boolean;
  command_id: string;
}

export interface TeleopCommand {
  type: "teleop";
  forward: number;
  strafe: number;
  yaw_rate: number;
}

export type ClientCommand =
  | SetChannelCommand
  | TeleopCommand
  | { type: "pause" | "resume"; command_id?: string }
  | { type: "set_speed"; multiplier: number }
  | { type: "mode"; mode: "expert" | "worker" };

export function parseServerMessage(raw: string): ServerMessage | null {
  let value: unknown;
  try {
    value = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof value !== "object" || value === null) return null;
  const msg = value as { type?: unknown };
  switch (msg.type) {
    case "snapshot":
    case "iteration_status":
    case "ack":
    case "error":
      return value as ServerMessage;
    default:
      return null;
  }
}

export function encodeCommand(cmd: ClientCommand): string {
  return JSON.stringify(cmd);
}
