/** DOM bootstrap: a tiny store around the pure reducer plus event wiring. */

import { ApiError, calibrate, createSession, fetchField, manualOverlay } from "./api.js";
import { diagramTransform, drawFieldDiagram, hitTestKeyPoint } from "./fieldview.js";
import { drawImagePane } from "./overlay.js";
import { decodePgm, type GrayImage } from "./pgm.js";
import {
  type AppEvent,
  type AppState,
  canCalibrate,
  currentPtz,
  exportRecord,
  initialState,
  reduce,
} from "./state.js";
import type { CameraBasePayload, PtzValues } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const element = document.getElementById(id);
  if (element === null) throw new Error(`missing element #${id}`);
  return element as T;
};

let state: AppState = initialState;
let localImage: GrayImage | null = null;

function dispatch(event: AppEvent): void {
  state = reduce(state, event);
  render();
}

function nextSeq(): number {
  return state.requestSeq + 1;
}

function render(): void {
  const imageCanvas = $<HTMLCanvasElement>("image-canvas");
  const fieldCanvas = $<HTMLCanvasElement>("field-canvas");
  imageCanvas.width = state.imageSize[0];
  imageCanvas.height = state.imageSize[1];
  drawImagePane(imageCanvas.getContext("2d")!, localImage, state.overlay, state.pairs);
  if (state.field !== null) {
    const t = diagramTransform(state.field, fieldCanvas.width, fieldCanvas.height);
    drawFieldDiagram(
      fieldCanvas.getContext("2d")!,
      state.field,
      t,
      state.pendingKeyPoint,
      state.pairs.map((p) => p.keyPoint),
    );
  }

  $("session-label").textContent = state.sessionId ?? "(no session)";
  $<HTMLButtonElement>("calibrate-button").disabled = !canCalibrate(state);
  $<HTMLButtonElement>("undo-button").disabled =
    state.pairs.length === 0 && state.replaceCandidate === null;
  $<HTMLButtonElement>("export-button").disabled = exportRecord(state) === null;
  $("pairs-label").textContent = state.pairs
    .map((p) => `${p.keyPoint} -> (${p.pixel[0].toFixed(1)}, ${p.pixel[1].toFixed(1)})`)
    .join("  |  ");

  const solution = state.solution;
  $("solution-label").textContent =
    solution === null
      ? "-"
      : `pan ${solution.pan_deg.toFixed(4)} deg, tilt ${solution.tilt_deg.toFixed(4)} deg, ` +
        `focal ${solution.focal_px.toFixed(1)} px, RMSE ${solution.rmse_px.toExponential(3)} px`;

  const replacePanel = $("replace-panel");
  replacePanel.style.display = state.replaceCandidate === null ? "none" : "block";
  const notice = $("notice");
  notice.textContent = state.notice ?? "";
  notice.style.display = state.notice === null ? "none" : "block";
  const error = $("error-banner");
  error.textContent = state.error ?? "";
  error.style.display = state.error === null ? "none" : "block";

  const ptz = currentPtz(state);
  if (ptz !== null) {
    $<HTMLInputElement>("pan-slider").value = String(ptz.pan_deg);
    $<HTMLInputElement>("tilt-slider").value = String(ptz.tilt_deg);
    $<HTMLInputElement>("focal-slider").value = String(ptz.focal_px);
    $("nudge-label").textContent =
      `pan ${ptz.pan_deg.toFixed(2)}  tilt ${ptz.tilt_deg.toFixed(2)}  focal ${ptz.focal_px.toFixed(0)}`;
  }
}

async function startSession(): Promise<void> {
  try {
    const base = JSON.parse($<HTMLTextAreaElement>("base-input").value) as CameraBasePayload;
    let image: Record<string, unknown> | null = null;
    const synthetic = $<HTMLInputElement>("synthetic-input").value.trim();
    if (synthetic.length > 0) {
      image = { synthetic: JSON.parse(synthetic) };
    }
    const created = await createSession(base, image);
    const field = await fetchField(created.session_id);
    dispatch({
      type: "session-ready",
      sessionId: created.session_id,
      base,
      field,
      imageSize: base.image_size,
    });
  } catch (err) {
    dispatch({ type: "calibrate-failed", seq: state.requestSeq, message: String(err) });
  }
}

async function runCalibration(): Promise<void> {
  if (!canCalibrate(state) || state.sessionId === null) return;
  const seq = nextSeq();
  const pairs = state.pairs;
  const sessionId = state.sessionId;
  dispatch({ type: "calibrate-requested", seq });
  try {
    const result = await calibrate(sessionId, pairs);
    dispatch({
      type: "calibrate-succeeded",
      seq,
      solution: result.solution,
      overlay: result.overlay,
    });
  } catch (err) {
    const message = err instanceof ApiError ? err.message : String(err);
    dispatch({ type: "calibrate-failed", seq, message });
  }
}

async function refreshOverlay(): Promise<void> {
  const ptz = currentPtz(state);
  if (ptz === null || state.sessionId === null) return;
  const seq = nextSeq();
  const sessionId = state.sessionId;
  dispatch({ type: "overlay-requested", seq });
  try {
    const result = await manualOverlay(sessionId, ptz);
    dispatch({ type: "overlay-loaded", seq, ptz: result.ptz, overlay: result.overlay });
  } catch (err) {
    const message = err instanceof ApiError ? err.message : String(err);
    dispatch({ type: "overlay-failed", seq, message });
  }
}

function wireNudge(id: string, param: keyof PtzValues): void {
  $<HTMLInputElement>(id).addEventListener("input", (event) => {
    const value = Number((event.target as HTMLInputElement).value);
    dispatch({ type: "nudge-changed", param, value });
    void refreshOverlay();
  });
}

function exportCamera(): void {
  const record = exportRecord(state);
  if (record === null) return;
  const blob = new Blob([JSON.stringify(record, null, 2)], { type: "application/json" });
  const anchor = document.createElement("a");
  anchor.href = URL.createObjectURL(blob);
  anchor.download = "camera.json";
  anchor.click();
  URL.revokeObjectURL(anchor.href);
}

export function bootstrap(): void {
  $("create-session-button").addEventListener("click", () => void startSession());
  $("calibrate-button").addEventListener("click", () => void runCalibration());
  $("undo-button").addEventListener("click", () => dispatch({ type: "undo" }));
  $("export-button").addEventListener("click", exportCamera);
  $("replace-confirm").addEventListener("click", () => dispatch({ type: "replace-confirmed" }));
  $("replace-cancel").addEventListener("click", () => dispatch({ type: "replace-cancelled" }));
  wireNudge("pan-slider", "pan_deg");
  wireNudge("tilt-slider", "tilt_deg");
  wireNudge("focal-slider", "focal_px");

  $<HTMLInputElement>("pgm-input").addEventListener("change", async (event) => {
    const file = (event.target as HTMLInputElement).files?.[0];
    if (!file) return;
    try {
      localImage = decodePgm(new Uint8Array(await file.arrayBuffer()));
    } catch (err) {
      dispatch({ type: "calibrate-failed", seq: state.requestSeq, message: String(err) });
      return;
    }
    render();
  });

  $<HTMLCanvasElement>("field-canvas").addEventListener("click", (event) => {
    if (state.field === null) return;
    const canvas = event.currentTarget as HTMLCanvasElement;
    const rect = canvas.getBoundingClientRect();
    const t = diagramTransform(state.field, canvas.width, canvas.height);
    const name = hitTestKeyPoint(
      state.field,
      t,
      ((event.clientX - rect.left) * canvas.width) / rect.width,
      ((event.clientY - rect.top) * canvas.height) / rect.height,
    );
    if (name !== null) dispatch({ type: "key-point-selected", name });
  });

  $<HTMLCanvasElement>("image-canvas").addEventListener("click", (event) => {
    const canvas = event.currentTarget as HTMLCanvasElement;
    const rect = canvas.getBoundingClientRect();
    dispatch({
      type: "image-clicked",
      pixel: [
        ((event.clientX - rect.left) * canvas.width) / rect.width,
        ((event.clientY - rect.top) * canvas.height) / rect.height,
      ],
    });
  });

  render();
}

if (typeof document !== "undefined" && document.getElementById("image-canvas") !== null) {
  bootstrap();
}
