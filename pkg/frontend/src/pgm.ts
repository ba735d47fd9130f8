/** Minimal binary PGM (P5, 8-bit) decoder for locally selected images. */

export interface GrayImage {
  width: number;
  height: number;
  pixels: Uint8Array;
}

export function decodePgm(data: Uint8Array): GrayImage {
  let pos = 0;

  const isSpace = (byte: number) =>
    byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;

  function nextToken(): string {
    while (pos < data.length) {
      const byte = data[pos]!;
      if (isSpace(byte)) {
        pos += 1;
      } else if (byte === 0x23 /* '#' */) {
        while (pos < data.length && data[pos] !== 0x0a) pos += 1;
      } else {
        break;
      }
    }
    const start = pos;
    while (pos < data.length && !isSpace(data[pos]!)) pos += 1;
    if (start === pos) throw new Error("truncated PGM header");
    return String.fromCharCode(...data.subarray(start, pos));
  }

  if (nextToken() !== "P5") throw new Error("not a binary PGM (P5) file");
  const width = Number(nextToken());
  const height = Number(nextToken());
  const maxval = Number(nextToken());
  if (!Number.isInteger(width) || !Number.isInteger(height) || width <= 0 || height <= 0) {
    throw new Error("bad PGM dimensions");
  }
  if (!(maxval > 0 && maxval <= 255)) throw new Error("only 8-bit PGM supported");
  pos += 1; // single whitespace byte after maxval
  const raster = data.subarray(pos, pos + width * height);
  if (raster.length !== width * height) throw new Error("truncated PGM raster");
  return { width, height, pixels: new Uint8Array(raster) };
}
