/** Bounded undo/redo history of grid snapshots.
 *
 * The stack never aliases its inputs: snapshots are copied in and copied
 * back out, so undo followed by redo is bitwise exact even if the caller
 * mutates what it got back.
 */

import { Grid, cloneGrid } from "./grid.js";

export class UndoStack {
  private undos: Grid[] = [];
  private redos: Grid[] = [];

  constructor(readonly capacity = 64) {
    if (capacity < 50) throw new Error(`capacity ${capacity} below the guaranteed 50`);
  }

  get undoDepth(): number {
    return this.undos.length;
  }

  get redoDepth(): number {
    return this.redos.length;
  }

  canUndo(): boolean {
    return this.undos.length > 0;
  }

  canRedo(): boolean {
    return this.redos.length > 0;
  }

  /** Record the state being replaced. Clears the redo branch. */
  push(before: Grid): void {
    this.undos.push(cloneGrid(before));
    if (this.undos.length > this.capacity) this.undos.shift();
    this.redos = [];
  }

  /** Step back: returns the previous grid, or null at the bottom. */
  undo(current: Grid): Grid | null {
    const prev = this.undos.pop();
    if (prev === undefined) return null;
    this.redos.push(cloneGrid(current));
    if (this.redos.length > this.capacity) this.redos.shift();
    return cloneGrid(prev);
  }

  /** Step forward again: returns the undone grid, or null if none. */
  redo(current: Grid): Grid | null {
    const next = this.redos.pop();
    if (next === undefined) return null;
    this.undos.push(cloneGrid(current));
    if (this.undos.length > this.capacity) this.undos.shift();
    return cloneGrid(next);
  }
}
