// Binary P5 graymap decoding for the preview panes. The service sends
// previews as image/x-portable-graymap, which browsers will not paint
// natively, so the bytes are unpacked here and blitted onto a canvas.

export interface Graymap {
  width: number;
  height: number;
  maxval: number;
  pixels: Uint8Array;
}

export function parsePgm(bytes: Uint8Array): Graymap {
  if (bytes.length < 2 || bytes[0] !== 0x50 || bytes[1] !== 0x35) {
    throw new Error('not a binary P5 graymap');
  }
  // Header: "P5" then three whitespace-separated integers, then a single
  // whitespace byte before the raster.
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < bytes.length && isSpace(bytes[pos])) pos += 1;
    if (pos < bytes.length && bytes[pos] === 0x23) {
      while (pos < bytes.length && bytes[pos] !== 0x0a) pos += 1; // comment line
      continue;
    }
    let value = 0;
    let digits = 0;
    while (pos < bytes.length && bytes[pos] >= 0x30 && bytes[pos] <= 0x39) {
      value = value * 10 + (bytes[pos] - 0x30);
      pos += 1;
      digits += 1;
    }
    if (digits === 0) throw new Error('truncated graymap header');
    fields.push(value);
  }
  pos += 1; // the single whitespace after maxval
  const [width, height, maxval] = fields;
  const pixels = bytes.subarray(pos, pos + width * height);
  if (pixels.length !== width * height) {
    throw new Error(`graymap raster is ${pixels.length} bytes, expected ${width * height}`);
  }
  return { width, height, maxval, pixels };
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}

/** Expand gray pixels to RGBA for a canvas ImageData buffer. */
export function grayToRgba(map: Graymap): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(map.width * map.height * 4);
  for (let i = 0; i < map.pixels.length; i += 1) {
    const v = map.maxval === 255 ? map.pixels[i] : Math.round((map.pixels[i] / map.maxval) * 255);
    out[i * 4] = v;
    out[i * 4 + 1] = v;
    out[i * 4 + 2] = v;
    out[i * 4 + 3] = 255;
  }
  return out;
}
