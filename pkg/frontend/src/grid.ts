/** Byte-valued morphology grid and the circular paint brush.
 *
 * The grid is the single source of truth for the editor: 0 is acceptor,
 * 255 is donor, anything between comes from imported grayscale images.
 * All mutating helpers return fresh grids; callers own history.
 */

export const GRID_SIZE = 101;

export interface Grid {
  readonly height: number;
  readonly width: number;
  data: Uint8Array; // row-major, height*width bytes
}

export type Phase = "donor" | "acceptor";

export interface Brush {
  phase: Phase;
  radius: number; // pixels, 1..15
}

export function makeGrid(height = GRID_SIZE, width = GRID_SIZE, fill = 0): Grid {
  if (height < 1 || width < 1) throw new Error(`bad grid size ${height}x${width}`);
  return { height, width, data: new Uint8Array(height * width).fill(fill) };
}

export function cloneGrid(g: Grid): Grid {
  return { height: g.height, width: g.width, data: new Uint8Array(g.data) };
}

export function gridsEqual(a: Grid, b: Grid): boolean {
  if (a.height !== b.height || a.width !== b.width) return false;
  for (let i = 0; i < a.data.length; i++) {
    if (a.data[i] !== b.data[i]) return false;
  }
  return true;
}

export function getPixel(g: Grid, row: number, col: number): number {
  return g.data[row * g.width + col] as number;
}

/** Paint a filled circle; pixels at Euclidean distance <= radius from the
 * center get the brush phase. Writes are clipped to the grid. */
export function applyBrush(g: Grid, row: number, col: number, brush: Brush): Grid {
  if (row < 0 || row >= g.height || col < 0 || col >= g.width) {
    throw new Error(`brush center (${row}, ${col}) outside ${g.height}x${g.width}`);
  }
  if (brush.radius < 1 || brush.radius > 15) {
    throw new Error(`brush radius ${brush.radius} outside 1..15`);
  }
  const value = brush.phase === "donor" ? 255 : 0;
  const out = cloneGrid(g);
  const r = brush.radius;
  const r2 = r * r;
  for (let dr = -r; dr <= r; dr++) {
    const rr = row + dr;
    if (rr < 0 || rr >= g.height) continue;
    for (let dc = -r; dc <= r; dc++) {
      const cc = col + dc;
      if (cc < 0 || cc >= g.width) continue;
      if (dr * dr + dc * dc <= r2) out.data[rr * g.width + cc] = value;
    }
  }
  return out;
}
