// Diverging color mapping, symmetric about zero: negative values blue,
// zero white, positive red. Fields oscillate in sign, so a symmetric
// scale keeps the zero level fixed while sliders move.

const NEG: [number, number, number] = [33, 102, 172];
const POS: [number, number, number] = [178, 24, 43];
const MID: [number, number, number] = [255, 255, 255];

export function divergingRgb(v: number, limit: number): [number, number, number] {
  let u = v / limit;
  if (u > 1) u = 1;
  else if (u < -1) u = -1;
  const from = MID;
  const to = u < 0 ? NEG : POS;
  const w = Math.abs(u);
  return [
    Math.round(from[0] + (to[0] - from[0]) * w),
    Math.round(from[1] + (to[1] - from[1]) * w),
    Math.round(from[2] + (to[2] - from[2]) * w),
  ];
}

/**
 * RGBA pixel buffer of the field, one pixel per cell in order. The values
 * pass through the color map untouched; any smoothing is the canvas
 * scaler's business, and we turn that off too.
 */
export function paintField(
  field: ArrayLike<number>,
  limit: number,
): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(field.length * 4);
  for (let i = 0; i < field.length; i++) {
    const [r, g, b] = divergingRgb(field[i], limit);
    out[i * 4] = r;
    out[i * 4 + 1] = g;
    out[i * 4 + 2] = b;
    out[i * 4 + 3] = 255;
  }
  return out;
}
