/**
 * Wire format shared with the simulation service.
 *
 * Binary frames: "SSF1" magic, little-endian u32 width and height, then
 * width*height RGBA8 pixels. Text frames: JSON commands with a "type" tag.
 * The validation here mirrors the server's checks so the client never
 * sends a command the server would reject.
 */

export const FRAME_MAGIC = "SSF1";
export const FRAME_HEADER_BYTES = 12;

export interface Frame {
  width: number;
  height: number;
  /** RGBA8, row-major, width*height*4 bytes. */
  pixels: Uint8ClampedArray;
}

/** Decode one binary frame; returns null when the payload is malformed. */
export function decodeFrame(buf: ArrayBuffer): Frame | null {
  if (buf.byteLength < FRAME_HEADER_BYTES) return null;
  const bytes = new Uint8Array(buf, 0, 4);
  for (let i = 0; i < 4; i++) {
    if (bytes[i] !== FRAME_MAGIC.charCodeAt(i)) return null;
  }
  const view = new DataView(buf);
  const width = view.getUint32(4, true);
  const height = view.getUint32(8, true);
  if (width === 0 || height === 0) return null;
  if (buf.byteLength !== FRAME_HEADER_BYTES + width * height * 4) return null;
  return {
    width,
    height,
    pixels: new Uint8ClampedArray(buf, FRAME_HEADER_BYTES),
  };
}

/** Shape of GET /state. */
export interface ServerState {
  step: number;
  particles: number;
  paused: boolean;
  time: number;
  escaped: number;
  width: number;
  height: number;
  fps: number;
  v_threshold: number;
}

export interface SmearCommand {
  type: "Smear";
  x: number;
  y: number;
  dx: number;
  dy: number;
  radius_px: number;
  strength: number;
}

export interface DepositStrokeCommand {
  type: "DepositStroke";
  stroke_id: number;
}

export interface SetParamCommand {
  type: "SetParam";
  key: string;
  value: number;
}

export interface PlayScriptCommand {
  type: "PlayScript";
  from_event?: number;
  to_event?: number;
  interval_steps?: number;
}

export interface BareCommand {
  type: "Pause" | "Resume" | "Reset";
}

export type Command =
  | SmearCommand
  | DepositStrokeCommand
  | SetParamCommand
  | PlayScriptCommand
  | BareCommand;

/** Live-settable parameters and their server-side ranges. */
export const PARAM_RANGES: Record<string, (v: number) => boolean> = {
  fps: (v) => v > 0 && v <= 120,
  v_threshold: (v) => v >= 0,
  absorption: (v) => v > 0,
};

/** SimConfig fields the server refuses to change on a running state. */
export const FROZEN_PARAMS = ["grid", "dx", "gravity", "boundaries", "strict_domain"];

/** Numeric SimConfig scalars the server accepts live, with their ranges. */
export const MUTABLE_SIM_RANGES: Record<string, (v: number) => boolean> = {
  dt: (v) => v > 0,
  youngs_modulus: (v) => v > 0,
  poisson_ratio: (v) => v >= 0 && v < 0.5,
  friction_deg: () => true,
  density: (v) => v > 0,
  boundary_cells: (v) => Number.isInteger(v) && v >= 1,
  max_substeps: (v) => Number.isInteger(v) && v >= 1,
  cfl: (v) => v > 0 && v <= 1,
};

function finite(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

/**
 * Mirror of the server's command validation.
 *
 * Returns null when the command would be accepted, otherwise a short
 * reason. `canvas` is the server-announced painting size.
 */
export function validateCommand(
  cmd: unknown,
  canvas: { width: number; height: number },
): string | null {
  if (typeof cmd !== "object" || cmd === null || Array.isArray(cmd)) {
    return "command must be an object";
  }
  const c = cmd as Record<string, unknown>;
  switch (c.type) {
    case "Pause":
    case "Resume":
    case "Reset":
      return null;
    case "Smear": {
      for (const key of ["x", "y", "dx", "dy", "radius_px", "strength"]) {
        if (!finite(c[key])) return `${key} is not a finite number`;
      }
      const x = c.x as number;
      const y = c.y as number;
      if (x < 0 || x > canvas.width) return "x outside canvas";
      if (y < 0 || y > canvas.height) return "y outside canvas";
      if ((c.radius_px as number) <= 0) return "radius_px must be positive";
      if ((c.strength as number) <= 0) return "strength must be positive";
      return null;
    }
    case "DepositStroke":
      if (!Number.isInteger(c.stroke_id)) return "stroke_id must be an integer";
      return null;
    case "SetParam": {
      const key = c.key;
      if (typeof key !== "string") return "key must be a string";
      if (!finite(c.value)) return "value is not a finite number";
      if (FROZEN_PARAMS.includes(key)) return `${key} cannot change on a running state`;
      const range = PARAM_RANGES[key] ?? MUTABLE_SIM_RANGES[key];
      if (range) return range(c.value) ? null : `value out of range for ${key}`;
      return `unknown parameter ${key}`;
    }
    case "PlayScript": {
      const lo = c.from_event ?? 0;
      const hi = c.to_event ?? lo;
      if (!Number.isInteger(lo) || (lo as number) < 0) return "from_event must be >= 0";
      if (!Number.isInteger(hi) || (hi as number) < (lo as number)) {
        return "to_event must be >= from_event";
      }
      if ("interval_steps" in c) {
        if (!Number.isInteger(c.interval_steps) || (c.interval_steps as number) < 1) {
          return "interval_steps must be at least 1";
        }
      }
      return null;
    }
    default:
      return `unknown command type ${String(c.type)}`;
  }
}
