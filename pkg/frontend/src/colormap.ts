/** Heat colormap for the saliency overlay.
 *
 * Alpha scales with intensity so a zero map is fully transparent: the
 * overlay never obscures regions the gradient does not care about. */

export interface Rgba {
  r: number;
  g: number;
  b: number;
  a: number;
}

/** Map a saliency byte (0..255) to an overlay color. Alpha tops out at
 * half-opaque so the morphology stays readable underneath. */
export function heatColor(v: number): Rgba {
  const t = Math.max(0, Math.min(255, v)) / 255;
  // black -> red -> yellow ramp
  const r = Math.round(255 * Math.min(1, t * 2));
  const g = Math.round(255 * Math.max(0, t * 2 - 1));
  return { r, g, b: 0, a: Math.round(127.5 * t) };
}

/** Paint a saliency map into an RGBA pixel buffer (length h*w*4). */
export function saliencyToRgba(data: Uint8Array, out: Uint8ClampedArray): void {
  if (out.length !== data.length * 4) {
    throw new Error(`rgba buffer length ${out.length}, want ${data.length * 4}`);
  }
  for (let i = 0; i < data.length; i++) {
    const c = heatColor(data[i] ?? 0);
    out[i * 4] = c.r;
    out[i * 4 + 1] = c.g;
    out[i * 4 + 2] = c.b;
    out[i * 4 + 3] = c.a;
  }
}

/** Paint a morphology byte grid (0 or 255, but any byte works) into an
 * RGBA buffer: donor warm, acceptor dark blue. */
export function gridToRgba(data: Uint8Array, out: Uint8ClampedArray): void {
  if (out.length !== data.length * 4) {
    throw new Error(`rgba buffer length ${out.length}, want ${data.length * 4}`);
  }
  for (let i = 0; i < data.length; i++) {
    const v = (data[i] ?? 0) / 255;
    out[i * 4] = Math.round(40 + 215 * v);
    out[i * 4 + 1] = Math.round(44 + 136 * v);
    out[i * 4 + 2] = Math.round(84 - 24 * v);
    out[i * 4 + 3] = 255;
  }
}
