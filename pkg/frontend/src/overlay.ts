/** Image pane rendering: backdrop, projected markings, pick markers. */

import type { GrayImage } from "./pgm.js";
import type { CorrespondencePair, OverlayLine } from "./types.js";

export function drawImagePane(
  ctx: CanvasRenderingContext2D,
  image: GrayImage | null,
  overlay: OverlayLine[],
  pairs: CorrespondencePair[],
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  if (image !== null) {
    const rgba = new Uint8ClampedArray(image.width * image.height * 4);
    for (let i = 0; i < image.pixels.length; i++) {
      const v = image.pixels[i]!;
      rgba[4 * i] = v;
      rgba[4 * i + 1] = v;
      rgba[4 * i + 2] = v;
      rgba[4 * i + 3] = 255;
    }
    ctx.putImageData(new ImageData(rgba, image.width, image.height), 0, 0);
  } else {
    ctx.fillStyle = "#1b1f23";
    ctx.fillRect(0, 0, width, height);
  }

  ctx.strokeStyle = "#00e676";
  ctx.lineWidth = 1.5;
  for (const line of overlay) {
    if (line.points.length < 2) continue;
    ctx.beginPath();
    ctx.moveTo(line.points[0]![0], line.points[0]![1]);
    for (const [x, y] of line.points.slice(1)) ctx.lineTo(x, y);
    ctx.stroke();
  }

  for (const pair of pairs) {
    const [x, y] = pair.pixel;
    ctx.strokeStyle = "#ff5252";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(x - 7, y);
    ctx.lineTo(x + 7, y);
    ctx.moveTo(x, y - 7);
    ctx.lineTo(x, y + 7);
    ctx.stroke();
    ctx.fillStyle = "#ff5252";
    ctx.font = "12px sans-serif";
    ctx.fillText(pair.keyPoint, x + 9, y - 9);
  }
}
