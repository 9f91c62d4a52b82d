/**
 * Client session: socket lifecycle, frame state, and pointer-to-command
 * translation. All physics stays server-side; this class only holds the
 * latest frame, the viewport transform, and tool configuration.
 *
 * The WebSocket constructor, fetch, and the clock are injectable so the
 * whole class runs unchanged under node for testing.
 */

import {
  Command,
  Frame,
  PARAM_RANGES,
  ServerState,
  SmearCommand,
  decodeFrame,
  validateCommand,
} from "./protocol.js";
import { Point, Viewport, dragToSmear, letterbox } from "./transform.js";

export type Tool = "smear" | "deposit" | "none";

export type ConnectionState = "idle" | "connecting" | "open" | "reconnecting" | "closed";

interface WebSocketLike {
  binaryType: string;
  readyState: number;
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

type WebSocketCtor = new (url: string) => WebSocketLike;

export interface SessionOptions {
  /** Websocket endpoint, e.g. ws://127.0.0.1:8765/ws */
  url: string;
  /** HTTP endpoint of /state; derived from url when omitted. */
  stateUrl?: string;
  webSocketCtor?: WebSocketCtor;
  fetchFn?: typeof fetch;
  /** Smear throttle cap in ms; defaults to the server push period. */
  minSendIntervalMs?: number;
  reconnectBaseMs?: number;
  reconnectMaxMs?: number;
  now?: () => number;
  onFrame?: (frame: Frame) => void;
  onConnection?: (state: ConnectionState) => void;
  onServerError?: (message: string) => void;
}

const OPEN = 1;

export class UiSession {
  connection: ConnectionState = "idle";
  latestFrame: Frame | null = null;
  /** Malformed or size-mismatched binary payloads. */
  droppedFrames = 0;
  /** Error replies from the server (should stay 0: see validateCommand). */
  serverErrors = 0;
  /** Commands refused locally by the validation mirror. */
  rejectedLocal = 0;
  sentCommands = 0;
  viewport: Viewport = { scale: 1, offsetX: 0, offsetY: 0 };
  tool: Tool = "smear";
  toolParams = { radiusPx: 8, strength: 6, strokeId: 0 };
  /** Size and rates announced by GET /state. */
  announced: ServerState | null = null;

  private readonly opts: SessionOptions;
  private readonly makeSocket: WebSocketCtor;
  private readonly now: () => number;
  private ws: WebSocketLike | null = null;
  private canvasSize = { width: 0, height: 0 };
  private attempts = 0;
  private lastSmearAt = -Infinity;
  private dragAnchor: Point | null = null;
  private dragEmitted = false;
  private closedByUser = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(opts: SessionOptions) {
    this.opts = opts;
    const ctor = opts.webSocketCtor ?? (globalThis.WebSocket as unknown as WebSocketCtor);
    if (!ctor) throw new Error("no WebSocket implementation available");
    this.makeSocket = ctor;
    this.now = opts.now ?? (() => Date.now());
  }

  /** Canvas pixel size of the frame when one is known, else announced. */
  frameSize(): { width: number; height: number } | null {
    if (this.latestFrame) {
      return { width: this.latestFrame.width, height: this.latestFrame.height };
    }
    if (this.announced) {
      return { width: this.announced.width, height: this.announced.height };
    }
    return null;
  }

  private smearIntervalMs(): number {
    if (this.opts.minSendIntervalMs !== undefined) return this.opts.minSendIntervalMs;
    if (this.announced && this.announced.fps > 0) return 1000 / this.announced.fps;
    return 50;
  }

  private setConnection(state: ConnectionState): void {
    this.connection = state;
    this.opts.onConnection?.(state);
  }

  connect(): void {
    this.closedByUser = false;
    this.openSocket();
  }

  private openSocket(): void {
    this.setConnection(this.attempts > 0 ? "reconnecting" : "connecting");
    const ws = new this.makeSocket(this.opts.url);
    ws.binaryType = "arraybuffer";
    ws.onopen = () => {
      this.attempts = 0;
      this.setConnection("open");
    };
    ws.onmessage = (ev) => this.handleMessage(ev.data);
    ws.onerror = () => {
      /* onclose follows and owns reconnection */
    };
    ws.onclose = () => {
      this.ws = null;
      if (this.closedByUser) {
        this.setConnection("closed");
        return;
      }
      this.scheduleReconnect();
    };
    this.ws = ws;
  }

  private scheduleReconnect(): void {
    const base = this.opts.reconnectBaseMs ?? 500;
    const cap = this.opts.reconnectMaxMs ?? 8000;
    const delay = Math.min(base * 2 ** this.attempts, cap);
    this.attempts += 1;
    this.setConnection("reconnecting");
    this.reconnectTimer = setTimeout(() => this.openSocket(), delay);
  }

  close(): void {
    this.closedByUser = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.reconnectTimer = null;
    if (this.ws) this.ws.close();
    else this.setConnection("closed");
  }

  private handleMessage(data: unknown): void {
    if (typeof data === "string") {
      try {
        const msg = JSON.parse(data) as Record<string, unknown>;
        if (typeof msg.error === "string") {
          this.serverErrors += 1;
          this.opts.onServerError?.(msg.error);
        }
      } catch {
        this.serverErrors += 1;
      }
      return;
    }
    const buf = toArrayBuffer(data);
    if (!buf) return;
    const frame = decodeFrame(buf);
    if (!frame) {
      this.droppedFrames += 1;
      return;
    }
    if (
      this.announced &&
      (frame.width !== this.announced.width || frame.height !== this.announced.height)
    ) {
      this.droppedFrames += 1;
      return;
    }
    const sizeChanged =
      !this.latestFrame ||
      this.latestFrame.width !== frame.width ||
      this.latestFrame.height !== frame.height;
    this.latestFrame = frame;
    if (sizeChanged) this.refreshViewport();
    this.opts.onFrame?.(frame);
  }

  /** Fetch /state; updates the announced size and rate. */
  async pollState(): Promise<ServerState | null> {
    const fetchFn = this.opts.fetchFn ?? globalThis.fetch;
    const url = this.opts.stateUrl ?? deriveStateUrl(this.opts.url);
    try {
      const res = await fetchFn(url);
      if (!res.ok) return null;
      const state = (await res.json()) as ServerState;
      this.announced = state;
      this.refreshViewport();
      return state;
    } catch {
      return null;
    }
  }

  setCanvasSize(width: number, height: number): void {
    this.canvasSize = { width, height };
    this.refreshViewport();
  }

  private refreshViewport(): void {
    const frame = this.frameSize();
    if (!frame || this.canvasSize.width <= 0) return;
    this.viewport = letterbox(
      this.canvasSize.width,
      this.canvasSize.height,
      frame.width,
      frame.height,
    );
  }

  setToolParams(params: Partial<{ radiusPx: number; strength: number; strokeId: number }>): void {
    const next = { ...this.toolParams, ...params };
    // keep within the ranges the server will accept
    next.radiusPx = Math.max(next.radiusPx, 0.5);
    next.strength = Math.max(next.strength, 1e-3);
    next.strokeId = Math.max(Math.round(next.strokeId), 0);
    this.toolParams = next;
  }

  /**
   * Validate against the mirror and send. Returns true when the command
   * went out; false when the socket is closed or the mirror refused it.
   */
  send(cmd: Command): boolean {
    const frame = this.frameSize() ?? { width: Infinity, height: Infinity };
    const reason = validateCommand(cmd, frame);
    if (reason !== null) {
      this.rejectedLocal += 1;
      return false;
    }
    if (!this.ws || this.ws.readyState !== OPEN) return false;
    this.ws.send(JSON.stringify(cmd));
    this.sentCommands += 1;
    return true;
  }

  setParam(key: string, value: number): boolean {
    if (!(key in PARAM_RANGES)) return false;
    return this.send({ type: "SetParam", key, value });
  }

  // -- pointer input, in canvas coordinates ---------------------------------

  pointerDown(p: Point): void {
    if (this.tool === "none") return;
    this.dragAnchor = p;
    this.dragEmitted = false;
  }

  pointerMove(p: Point): SmearCommand | null {
    if (this.tool !== "smear" || !this.dragAnchor) return null;
    const frame = this.frameSize();
    if (!frame) return null;
    const t = this.now();
    if (t - this.lastSmearAt < this.smearIntervalMs()) return null;
    const cmd = dragToSmear(this.viewport, this.dragAnchor, p, frame, this.toolParams);
    if (!this.send(cmd)) return null;
    this.lastSmearAt = t;
    this.dragAnchor = p;
    this.dragEmitted = true;
    return cmd;
  }

  pointerUp(p: Point): Command | null {
    const anchor = this.dragAnchor;
    this.dragAnchor = null;
    if (this.tool === "none" || !anchor) return null;
    if (this.tool === "deposit") {
      const cmd: Command = { type: "DepositStroke", stroke_id: this.toolParams.strokeId };
      return this.send(cmd) ? cmd : null;
    }
    const frame = this.frameSize();
    if (!frame) return null;
    // a click that never crossed the throttle still deserves one command
    const t = this.now();
    if (this.dragEmitted && t - this.lastSmearAt < this.smearIntervalMs()) return null;
    const cmd = dragToSmear(this.viewport, anchor, p, frame, this.toolParams);
    if (!this.send(cmd)) return null;
    this.lastSmearAt = t;
    return cmd;
  }
}

function deriveStateUrl(wsUrl: string): string {
  const url = new URL(wsUrl);
  url.protocol = url.protocol === "wss:" ? "https:" : "http:";
  url.pathname = "/state";
  return url.toString();
}

function toArrayBuffer(data: unknown): ArrayBuffer | null {
  if (data instanceof ArrayBuffer) return data;
  // node's ws delivers Buffer (a Uint8Array view) unless told otherwise
  if (ArrayBuffer.isView(data)) {
    const view = data as Uint8Array;
    return view.buffer.slice(view.byteOffset, view.byteOffset + view.byteLength) as ArrayBuffer;
  }
  return null;
}
