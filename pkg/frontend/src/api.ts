/** Typed fetch wrappers for the calibration service. */

import type {
  ApiErrorBody,
  CameraBasePayload,
  CorrespondencePair,
  FieldModel,
  OverlayLine,
  PtzValues,
  Solution,
} from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly detail: unknown;

  constructor(body: ApiErrorBody, status: number) {
    super(`${body.message} (${body.code}, HTTP ${status})`);
    this.code = body.code;
    this.detail = body.detail;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let body: ApiErrorBody;
    try {
      body = (await response.json()) as ApiErrorBody;
    } catch {
      body = { code: "http_error", message: response.statusText };
    }
    throw new ApiError(body, response.status);
  }
  return (await response.json()) as T;
}

export function createSession(
  base: CameraBasePayload,
  image: Record<string, unknown> | null,
): Promise<{ session_id: string }> {
  return request("/sessions", {
    method: "POST",
    body: JSON.stringify({ base, image }),
  });
}

export function fetchField(sessionId: string): Promise<FieldModel> {
  return request(`/sessions/${sessionId}/field`);
}

export function calibrate(
  sessionId: string,
  pairs: CorrespondencePair[],
): Promise<{ solution: Solution; overlay: OverlayLine[] }> {
  return request(`/sessions/${sessionId}/calibrate`, {
    method: "POST",
    body: JSON.stringify({
      points: pairs.map((p) => ({ key_point: p.keyPoint, pixel: p.pixel })),
    }),
  });
}

export function manualOverlay(
  sessionId: string,
  ptz: PtzValues,
): Promise<{ ptz: PtzValues; overlay: OverlayLine[] }> {
  const params = new URLSearchParams({
    pan: String(ptz.pan_deg),
    tilt: String(ptz.tilt_deg),
    focal: String(ptz.focal_px),
  });
  return request(`/sessions/${sessionId}/overlay?${params}`);
}
