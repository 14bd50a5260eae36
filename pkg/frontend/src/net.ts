// Reconnecting socket wrapper. The browser WebSocket is injected as a
// factory so tests can drive the logic with a scripted fake.

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ReconnectingClientOptions {
  url: string;
  factory: SocketFactory;
  onMessage: (raw: string) => void;
  onStatus: (connected: boolean) => void;
  /** Base reconnect delay in ms; doubles per failure up to maxDelayMs. */
  baseDelayMs?: number;
  maxDelayMs?: number;
  schedule?: (fn: () => void, ms: number) => unknown;
}

export class ReconnectingClient {
  private socket: SocketLike | null = null;
  private attempts = 0;
  private stopped = false;
  private readonly base: number;
  private readonly max: number;
  private readonly schedule: (fn: () => void, ms: number) => unknown;

  constructor(private readonly opts: ReconnectingClientOptions) {
    this.base = opts.baseDelayMs ?? 500;
    this.max = opts.maxDelayMs ?? 8000;
    this.schedule = opts.schedule ?? ((fn, ms) => setTimeout(fn, ms));
  }

  connect(): void {
    if (this.stopped) return;
    const socket = this.opts.factory(this.opts.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      this.opts.onStatus(true);
    };
    socket.onmessage = (ev) => this.opts.onMessage(ev.data);
    socket.onclose = () => {
      this.socket = null;
      this.opts.onStatus(false);
      this.scheduleReconnect();
    };
    socket.onerror = () => {
      // the close handler owns reconnection
    };
  }

  nextDelay(): number {
    return Math.min(this.base * 2 ** this.attempts, this.max);
  }

  private scheduleReconnect(): void {
    if (this.stopped) return;
    const delay = this.nextDelay();
    this.attempts += 1;
    this.schedule(() => this.connect(), delay);
  }

  /** Send if connected; returns whether the message went out. */
  send(data: string): boolean {
    if (this.socket === null) return false;
    try {
      this.socket.send(data);
      return true;
    } catch {
      return false;
    }
  }

  stop(): void {
    this.stopped = true;
    this.socket?.close();
  }
}
