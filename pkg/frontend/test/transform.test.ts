import { describe, expect, it } from "vitest";

import { canvasToSim, dragToSmear, letterbox, simToCanvas } from "../src/transform.js";

describe("letterbox", () => {
  it("pillarboxes a tall canvas", () => {
    const vp = letterbox(400, 800, 100, 100);
    expect(vp.scale).toBe(4);
    expect(vp.offsetX).toBe(0);
    expect(vp.offsetY).toBe(200);
  });

  it("letterboxes a wide canvas", () => {
    const vp = letterbox(800, 400, 100, 100);
    expect(vp.scale).toBe(4);
    expect(vp.offsetX).toBe(200);
    expect(vp.offsetY).toBe(0);
  });

  it("preserves the frame aspect ratio at any canvas shape", () => {
    for (const [cw, ch] of [
      [333, 777],
      [1280, 720],
      [64, 64],
      [97, 13],
    ] as const) {
      const vp = letterbox(cw, ch, 64, 48);
      const shownW = 64 * vp.scale;
      const shownH = 48 * vp.scale;
      expect(shownW / shownH).toBeCloseTo(64 / 48, 12);
      expect(shownW).toBeLessThanOrEqual(cw + 1e-9);
      expect(shownH).toBeLessThanOrEqual(ch + 1e-9);
      expect(vp.offsetX === 0 || vp.offsetY === 0).toBe(true);
    }
  });

  it("degenerate sizes fall back to identity", () => {
    expect(letterbox(0, 100, 64, 64)).toEqual({ scale: 1, offsetX: 0, offsetY: 0 });
  });
});

describe("coordinate round trip", () => {
  it("canvasToSim inverts simToCanvas", () => {
    const vp = letterbox(517, 301, 64, 48);
    for (const p of [
      { x: 0, y: 0 },
      { x: 64, y: 48 },
      { x: 13.7, y: 42.01 },
    ]) {
      const back = canvasToSim(vp, simToCanvas(vp, p));
      expect(back.x).toBeCloseTo(p.x, 9);
      expect(back.y).toBeCloseTo(p.y, 9);
    }
  });
});

describe("dragToSmear", () => {
  const vp = letterbox(480, 480, 64, 64);
  const frame = { width: 64, height: 64 };
  const params = { radiusPx: 8, strength: 5 };

  it("normalizes a horizontal drag to dx > 0, dy = 0", () => {
    const cmd = dragToSmear(vp, { x: 100, y: 150 }, { x: 110, y: 150 }, frame, params);
    expect(cmd.type).toBe("Smear");
    expect(cmd.dx).toBeCloseTo(1, 12);
    expect(cmd.dy).toBeCloseTo(0, 12);
    expect(Math.hypot(cmd.dx, cmd.dy)).toBeCloseTo(1, 12);
  });

  it("keeps zero direction for a click without drag", () => {
    const p = { x: 200, y: 200 };
    const cmd = dragToSmear(vp, p, p, frame, params);
    expect(cmd.dx).toBe(0);
    expect(cmd.dy).toBe(0);
    expect(cmd.radius_px).toBeGreaterThan(0);
  });

  it("positions the smear at the drag end in sim space", () => {
    const cmd = dragToSmear(vp, { x: 0, y: 0 }, { x: 240, y: 240 }, frame, params);
    expect(cmd.x).toBeCloseTo(32, 9);
    expect(cmd.y).toBeCloseTo(32, 9);
  });

  it("clamps positions that leave the frame", () => {
    const cmd = dragToSmear(vp, { x: 470, y: 240 }, { x: 600, y: 240 }, frame, params);
    expect(cmd.x).toBe(64);
    expect(cmd.y).toBeCloseTo(32, 9);
  });
});
