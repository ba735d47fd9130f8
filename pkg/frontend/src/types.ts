/** Payload shapes exchanged with the calibration service. */

export type Pixel = [number, number];

export interface FieldModel {
  length: number;
  width: number;
  key_points: Record<string, [number, number]>;
  segments: { name: string; p0: [number, number]; p1: [number, number] }[];
  arcs: {
    name: string;
    center: [number, number];
    radius: number;
    start_deg: number;
    end_deg: number;
  }[];
}

export interface CameraBasePayload {
  center: number[];
  rotation: number[];
  principal_point: number[];
  image_size: [number, number];
}

export interface PtzValues {
  pan_deg: number;
  tilt_deg: number;
  focal_px: number;
}

export interface Solution extends PtzValues {
  rmse_px: number;
  converged: boolean;
}

export interface OverlayLine {
  name: string;
  points: Pixel[];
}

export interface CorrespondencePair {
  keyPoint: string;
  pixel: Pixel;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail?: unknown;
}
