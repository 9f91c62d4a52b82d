/**
 * Canvas/simulation coordinate mapping.
 *
 * The server works in painting pixels ("sim space"); the display canvas
 * may have any size, so frames are letterboxed: scaled uniformly to fit
 * and centered. All pointer input must go through canvasToSim before it
 * becomes a command.
 */

import type { SmearCommand } from "./protocol.js";

export interface Viewport {
  /** Canvas pixels per sim pixel. */
  scale: number;
  /** Canvas x of sim x = 0. */
  offsetX: number;
  /** Canvas y of sim y = 0. */
  offsetY: number;
}

/** Uniform fit of a frameW x frameH image into a canvasW x canvasH box. */
export function letterbox(
  canvasW: number,
  canvasH: number,
  frameW: number,
  frameH: number,
): Viewport {
  if (canvasW <= 0 || canvasH <= 0 || frameW <= 0 || frameH <= 0) {
    return { scale: 1, offsetX: 0, offsetY: 0 };
  }
  const scale = Math.min(canvasW / frameW, canvasH / frameH);
  return {
    scale,
    offsetX: (canvasW - frameW * scale) / 2,
    offsetY: (canvasH - frameH * scale) / 2,
  };
}

export interface Point {
  x: number;
  y: number;
}

export function canvasToSim(vp: Viewport, p: Point): Point {
  return { x: (p.x - vp.offsetX) / vp.scale, y: (p.y - vp.offsetY) / vp.scale };
}

export function simToCanvas(vp: Viewport, p: Point): Point {
  return { x: p.x * vp.scale + vp.offsetX, y: p.y * vp.scale + vp.offsetY };
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}

/**
 * Turn one drag step (canvas coords) into a Smear command in sim space.
 *
 * Direction is the normalized drag delta; a zero-length drag (a click)
 * keeps direction (0, 0), which the server accepts as a radial poke.
 * The position is clamped to the canvas so a drag that leaves the
 * letterboxed area still produces a valid command.
 */
export function dragToSmear(
  vp: Viewport,
  from: Point,
  to: Point,
  frame: { width: number; height: number },
  params: { radiusPx: number; strength: number },
): SmearCommand {
  const a = canvasToSim(vp, from);
  const b = canvasToSim(vp, to);
  const dx = b.x - a.x;
  const dy = b.y - a.y;
  const len = Math.hypot(dx, dy);
  return {
    type: "Smear",
    x: clamp(b.x, 0, frame.width),
    y: clamp(b.y, 0, frame.height),
    dx: len > 0 ? dx / len : 0,
    dy: len > 0 ? dy / len : 0,
    radius_px: params.radiusPx,
    strength: params.strength,
  };
}
