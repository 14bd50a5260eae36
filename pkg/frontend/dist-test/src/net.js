// Reconnecting socket wrapper. The browser WebSocket is injected as a
// factory so tests can drive the logic with a scripted fake.
export class ReconnectingClient {
    constructor(opts) {
        this.opts = opts;
        this.socket = null;
        this.attempts = 0;
        this.stopped = false;
        this.base = opts.baseDelayMs ?? 500;
        this.max = opts.maxDelayMs ?? 8000;
        this.schedule = opts.schedule ?? ((fn, ms) => setTimeout(fn, ms));
    }
    connect() {
        if (this.stopped)
            return;
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
    nextDelay() {
        return Math.min(this.base * 2 ** this.attempts, this.max);
    }
    scheduleReconnect() {
        if (this.stopped)
            return;
        const delay = this.nextDelay();
        this.attempts += 1;
        this.schedule(() => this.connect(), delay);
    }
    /** Send if connected; returns whether the message went out. */
    send(data) {
        if (this.socket === null)
            return false;
        try {
            this.socket.send(data);
            return true;
        }
        catch {
            return false;
        }
    }
    stop() {
        this.stopped = true;
        this.socket?.close();
    }
}
