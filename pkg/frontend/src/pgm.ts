/** Binary PGM (P5, maxval 255) reader and writer.
 *
 * The byte layout mirrors the Python side exactly: header "P5\n{w} {h}\n255\n"
 * followed by raw row-major bytes, no comments. Exporting a grid and
 * re-importing it is an identity, and the server's CLI reads the files
 * unchanged.
 */

import { Grid } from "./grid.js";

export function encodePgm(g: Grid): Uint8Array {
  const header = `P5\n${g.width} ${g.height}\n255\n`;
  const head = new TextEncoder().encode(header);
  const out = new Uint8Array(head.length + g.data.length);
  out.set(head, 0);
  out.set(g.data, head.length);
  return out;
}

export function decodePgm(bytes: Uint8Array): Grid {
  // Header: magic, width, height, maxval, one whitespace after maxval.
  let pos = 0;
  const fields: string[] = [];
  while (fields.length < 4) {
    while (pos < bytes.length && isSpace(bytes[pos] as number)) pos++;
    if (pos >= bytes.length) throw new Error("truncated PGM header");
    let start = pos;
    while (pos < bytes.length && !isSpace(bytes[pos] as number)) pos++;
    fields.push(new TextDecoder().decode(bytes.subarray(start, pos)));
  }
  if (fields[0] !== "P5") throw new Error(`not a binary PGM: magic ${fields[0]}`);
  const width = Number(fields[1]);
  const height = Number(fields[2]);
  const maxval = Number(fields[3]);
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new Error(`bad PGM dimensions ${fields[1]}x${fields[2]}`);
  }
  if (maxval !== 255) throw new Error(`unsupported maxval ${fields[3]}`);
  pos += 1; // single whitespace byte terminates the header
  const need = width * height;
  if (bytes.length - pos !== need) {
    throw new Error(`PGM payload has ${bytes.length - pos} bytes, want ${need}`);
  }
  return { height, width, data: bytes.slice(pos, pos + need) };
}

function isSpace(b: number): boolean {
  return b === 0x20 || b === 0x0a || b === 0x0d || b === 0x09;
}
