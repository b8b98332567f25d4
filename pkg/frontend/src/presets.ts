/** Bundled starting morphologies. All five are deterministic: loading the
 * same preset twice yields bitwise-identical grids, which keeps exported
 * PGMs and server predictions stable across sessions. */

import { GRID_SIZE, Grid, makeGrid } from "./grid.js";

export const PRESET_NAMES = [
  "bilayer",
  "columns_w4",
  "columns_w10",
  "blocking_layer",
  "blob_field",
] as const;

export type PresetName = (typeof PRESET_NAMES)[number];

export function isPresetName(name: string): name is PresetName {
  return (PRESET_NAMES as readonly string[]).includes(name);
}

export function loadPreset(name: PresetName): Grid {
  switch (name) {
    case "bilayer":
      return bilayer(50);
    case "columns_w4":
      return columns(4);
    case "columns_w10":
      return columns(10);
    case "blocking_layer":
      return blockingLayer(columns(4), 6);
    case "blob_field":
      return blobField(7);
  }
}

/** Bottom `donorRows` rows donor, the rest acceptor. */
function bilayer(donorRows: number): Grid {
  const g = makeGrid();
  for (let r = GRID_SIZE - donorRows; r < GRID_SIZE; r++) {
    g.data.fill(255, r * GRID_SIZE, (r + 1) * GRID_SIZE);
  }
  return g;
}

/** Full-height vertical stripes of the given width, donor first. */
function columns(width: number): Grid {
  const g = makeGrid();
  for (let c = 0; c < GRID_SIZE; c++) {
    if (Math.floor(c / width) % 2 === 0) {
      for (let r = 0; r < GRID_SIZE; r++) g.data[r * GRID_SIZE + c] = 255;
    }
  }
  return g;
}

/** Overwrite the bottom rows with acceptor, cutting donor off the anode. */
function blockingLayer(base: Grid, rows: number): Grid {
  base.data.fill(0, (GRID_SIZE - rows) * GRID_SIZE);
  return base;
}

/** Smoothed seeded noise thresholded at its median: an irregular two-phase
 * field with roughly balanced coverage, for free-form editing demos. */
function blobField(seed: number): Grid {
  const rand = mulberry32(seed);
  let field: Float64Array = new Float64Array(GRID_SIZE * GRID_SIZE);
  for (let i = 0; i < field.length; i++) field[i] = rand();
  for (let pass = 0; pass < 4; pass++) field = boxBlur(field, 3);

  const sorted = Float64Array.from(field).sort();
  const median = sorted[sorted.length >> 1] as number;
  const g = makeGrid();
  for (let i = 0; i < field.length; i++) {
    g.data[i] = (field[i] as number) > median ? 255 : 0;
  }
  return g;
}

function boxBlur(field: Float64Array, radius: number): Float64Array {
  const out = new Float64Array(field.length);
  for (let r = 0; r < GRID_SIZE; r++) {
    for (let c = 0; c < GRID_SIZE; c++) {
      let sum = 0;
      let count = 0;
      for (let dr = -radius; dr <= radius; dr++) {
        const rr = r + dr;
        if (rr < 0 || rr >= GRID_SIZE) continue;
        for (let dc = -radius; dc <= radius; dc++) {
          const cc = c + dc;
          if (cc < 0 || cc >= GRID_SIZE) continue;
          sum += field[rr * GRID_SIZE + cc] as number;
          count++;
        }
      }
      out[r * GRID_SIZE + c] = sum / count;
    }
  }
  return out;
}

/** Small deterministic PRNG; good enough for one decorative preset. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}
