import { describe, expect, it } from "vitest";

import { diagramTransform, hitTestKeyPoint, toCanvas } from "../src/fieldview.js";
import { decodePgm } from "../src/pgm.js";
import type { FieldModel } from "../src/types.js";

const field: FieldModel = {
  length: 105,
  width: 68,
  key_points: { corner: [0, 0], center_mark: [52.5, 34], far: [105, 68] },
  segments: [],
  arcs: [],
};

describe("diagram transform", () => {
  it("maps the field into the canvas with y up", () => {
    const t = diagramTransform(field, 540, 380);
    const [x0, y0] = toCanvas(t, 0, 0);
    const [x1, y1] = toCanvas(t, 105, 68);
    expect(x1).toBeGreaterThan(x0);
    expect(y1).toBeLessThan(y0); // larger field y is higher on the canvas
    for (const v of [x0, y0, x1, y1]) {
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThanOrEqual(540);
    }
  });
});

describe("key point hit testing", () => {
  const t = diagramTransform(field, 540, 380);

  it("hits within the 8 px radius", () => {
    const [cx, cy] = toCanvas(t, 52.5, 34);
    expect(hitTestKeyPoint(field, t, cx + 5, cy - 5)).toBe("center_mark");
  });

  it("misses outside the radius", () => {
    const [cx, cy] = toCanvas(t, 52.5, 34);
    expect(hitTestKeyPoint(field, t, cx + 30, cy)).toBeNull();
  });

  it("prefers the nearest point", () => {
    const [cx, cy] = toCanvas(t, 0, 0);
    expect(hitTestKeyPoint(field, t, cx + 1, cy - 1)).toBe("corner");
  });
});

describe("pgm decoding", () => {
  it("decodes a small binary PGM", () => {
    const header = new TextEncoder().encode("P5\n# c\n3 2\n255\n");
    const raster = new Uint8Array([0, 1, 2, 3, 4, 5]);
    const data = new Uint8Array(header.length + raster.length);
    data.set(header);
    data.set(raster, header.length);
    const image = decodePgm(data);
    expect(image.width).toBe(3);
    expect(image.height).toBe(2);
    expect(Array.from(image.pixels)).toEqual([0, 1, 2, 3, 4, 5]);
  });

  it("rejects truncated rasters", () => {
    const data = new TextEncoder().encode("P5\n4 4\n255\nxx");
    expect(() => decodePgm(data)).toThrow(/truncated/);
  });

  it("rejects 16-bit files", () => {
    const data = new TextEncoder().encode("P5\n1 1\n65535\n..");
    expect(() => decodePgm(data)).toThrow(/8-bit/);
  });
});
