/**
 * Page wiring: one canvas showing the live sand surface, a toolbar for
 * tools and playback, and a status line fed by /state polling.
 *
 * The server address comes from the `?server=host:port` query parameter
 * and defaults to the page's own host.
 */

import { Frame } from "./protocol.js";
import { ConnectionState, Tool, UiSession } from "./session.js";

const STATE_POLL_MS = 500;

function must<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

function serverBase(): string {
  const q = new URLSearchParams(window.location.search).get("server");
  return q ?? window.location.host;
}

function blit(canvas: HTMLCanvasElement, scratch: HTMLCanvasElement, session: UiSession): void {
  const frame = session.latestFrame;
  const ctx = canvas.getContext("2d");
  if (!ctx || !frame) return;
  if (scratch.width !== frame.width || scratch.height !== frame.height) {
    scratch.width = frame.width;
    scratch.height = frame.height;
  }
  const sctx = scratch.getContext("2d");
  if (!sctx) return;
  const img = sctx.createImageData(frame.width, frame.height);
  img.data.set(frame.pixels);
  sctx.putImageData(img, 0, 0);
  const vp = session.viewport;
  ctx.fillStyle = "#15120e";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(
    scratch,
    vp.offsetX,
    vp.offsetY,
    frame.width * vp.scale,
    frame.height * vp.scale,
  );
}

function main(): void {
  const canvas = must<HTMLCanvasElement>("surface");
  const banner = must<HTMLDivElement>("banner");
  const status = must<HTMLDivElement>("status");
  const toolSelect = must<HTMLSelectElement>("tool");
  const radius = must<HTMLInputElement>("radius");
  const strength = must<HTMLInputElement>("strength");
  const strokeId = must<HTMLInputElement>("stroke-id");
  const scratch = document.createElement("canvas");

  const base = serverBase();
  const session = new UiSession({
    url: `ws://${base}/ws`,
    onConnection: (state: ConnectionState) => {
      banner.hidden = state === "open";
      banner.textContent = state === "reconnecting" ? "connection lost, retrying..." : state;
    },
    onFrame: (_frame: Frame) => {
      dirty = true;
    },
  });

  let dirty = false;
  const draw = () => {
    if (dirty) {
      blit(canvas, scratch, session);
      dirty = false;
    }
    requestAnimationFrame(draw);
  };
  requestAnimationFrame(draw);

  const resize = () => {
    canvas.width = canvas.clientWidth;
    canvas.height = canvas.clientHeight;
    session.setCanvasSize(canvas.width, canvas.height);
    dirty = true;
  };
  new ResizeObserver(resize).observe(canvas);
  resize();

  const point = (ev: PointerEvent) => {
    const rect = canvas.getBoundingClientRect();
    return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
  };
  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    session.pointerDown(point(ev));
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (ev.buttons) session.pointerMove(point(ev));
  });
  canvas.addEventListener("pointerup", (ev) => {
    canvas.releasePointerCapture(ev.pointerId);
    session.pointerUp(point(ev));
  });

  toolSelect.addEventListener("change", () => {
    session.tool = toolSelect.value as Tool;
  });
  radius.addEventListener("change", () =>
    session.setToolParams({ radiusPx: Number(radius.value) }),
  );
  strength.addEventListener("change", () =>
    session.setToolParams({ strength: Number(strength.value) }),
  );
  strokeId.addEventListener("change", () =>
    session.setToolParams({ strokeId: Number(strokeId.value) }),
  );

  must<HTMLButtonElement>("pause").addEventListener("click", () =>
    session.send({ type: "Pause" }),
  );
  must<HTMLButtonElement>("resume").addEventListener("click", () =>
    session.send({ type: "Resume" }),
  );
  must<HTMLButtonElement>("reset").addEventListener("click", () =>
    session.send({ type: "Reset" }),
  );
  must<HTMLButtonElement>("replay").addEventListener("click", () =>
    session.send({ type: "PlayScript", from_event: 0 }),
  );

  const poll = async () => {
    const state = await session.pollState();
    if (state) {
      status.textContent =
        `step ${state.step} | particles ${state.particles}` +
        `${state.paused ? " | paused" : ""} | dropped ${session.droppedFrames}`;
    }
    setTimeout(poll, STATE_POLL_MS);
  };

  session.connect();
  void poll();
}

window.addEventListener("DOMContentLoaded", main);
