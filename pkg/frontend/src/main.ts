/** Browser entry point: wires the editor canvas, the live classifier
 * readout, the saliency overlay, and the design-job panel to the HTTP API.
 *
 * All rendering is 5x nearest-neighbor (101 cells -> 505 px) so phase
 * boundaries stay crisp. Prediction requests are rate limited and stamped
 * with a revision so a slow response for an old grid can never overwrite
 * the readout for the current one. */

import { ApiClient, DesignJobView, Prediction, payloadToGrid } from "./api.js";
import { gridToRgba, saliencyToRgba } from "./colormap.js";
import { rateLimit } from "./debounce.js";
import { Brush, GRID_SIZE, Grid, Phase, applyBrush, cloneGrid, gridsEqual, makeGrid } from "./grid.js";
import { decodePgm, encodePgm } from "./pgm.js";
import { PRESET_NAMES, loadPreset } from "./presets.js";
import { RevisionTracker } from "./revision.js";
import { UndoStack } from "./undo.js";

const SCALE = 5;
const PREDICT_INTERVAL_MS = 150;
const JOB_POLL_MS = 500;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  private grid: Grid = loadPreset("bilayer");
  private saliency: Uint8Array | null = null;
  private showSaliency = false;
  private lastPrediction: Prediction | null = null;
  private stale = false;
  private painting = false;
  private strokeBefore: Grid | null = null;
  private jobId: string | null = null;
  private jobTimer: number | null = null;
  private predictBusy = false;
  private predictQueued = false;
  private saliencyBusy = false;
  private saliencyQueued = false;

  private readonly api = new ApiClient();
  private readonly undo = new UndoStack(64);
  private readonly revs = new RevisionTracker();

  private readonly canvas = el<HTMLCanvasElement>("grid-canvas");
  private readonly ctx = this.canvas.getContext("2d")!;
  private readonly cellBuf = new Uint8ClampedArray(GRID_SIZE * GRID_SIZE * 4);
  private readonly offscreen = document.createElement("canvas");

  private readonly requestPredict = rateLimit(() => this.firePredict(), PREDICT_INTERVAL_MS);

  constructor() {
    this.offscreen.width = GRID_SIZE;
    this.offscreen.height = GRID_SIZE;
    this.canvas.width = GRID_SIZE * SCALE;
    this.canvas.height = GRID_SIZE * SCALE;
    this.ctx.imageSmoothingEnabled = false;

    this.wireCanvas();
    this.wireControls();
    this.render();
    this.requestPredict();
    void this.showHealth();
  }

  private brush(): Brush {
    const phase = (document.querySelector('input[name="phase"]:checked') as HTMLInputElement)
      .value as Phase;
    const radius = Number(el<HTMLInputElement>("brush-radius").value);
    return { phase, radius };
  }

  private wireCanvas(): void {
    const pos = (ev: MouseEvent): [number, number] => {
      const rect = this.canvas.getBoundingClientRect();
      const col = Math.floor(((ev.clientX - rect.left) / rect.width) * GRID_SIZE);
      const row = Math.floor(((ev.clientY - rect.top) / rect.height) * GRID_SIZE);
      return [row, col];
    };
    this.canvas.addEventListener("mousedown", (ev) => {
      this.painting = true;
      this.strokeBefore = cloneGrid(this.grid);
      this.paintAt(...pos(ev));
    });
    this.canvas.addEventListener("mousemove", (ev) => {
      if (this.painting) this.paintAt(...pos(ev));
    });
    const finish = () => {
      if (!this.painting) return;
      this.painting = false;
      // one undo entry per stroke, and only if the stroke changed anything
      if (this.strokeBefore && !gridsEqual(this.strokeBefore, this.grid)) {
        this.undo.push(this.strokeBefore);
        this.updateUndoButtons();
      }
      this.strokeBefore = null;
    };
    this.canvas.addEventListener("mouseup", finish);
    this.canvas.addEventListener("mouseleave", finish);
  }

  private paintAt(row: number, col: number): void {
    if (row < 0 || row >= GRID_SIZE || col < 0 || col >= GRID_SIZE) return;
    this.grid = applyBrush(this.grid, row, col, this.brush());
    this.onGridChanged();
  }

  private wireControls(): void {
    const presetBar = el<HTMLDivElement>("preset-bar");
    for (const name of PRESET_NAMES) {
      const btn = document.createElement("button");
      btn.textContent = name.replace(/_/g, " ");
      btn.addEventListener("click", () => this.setGrid(loadPreset(name)));
      presetBar.appendChild(btn);
    }

    el<HTMLButtonElement>("btn-undo").addEventListener("click", () => {
      const prev = this.undo.undo(this.grid);
      if (prev) {
        this.grid = prev;
        this.onGridChanged();
      }
      this.updateUndoButtons();
    });
    el<HTMLButtonElement>("btn-redo").addEventListener("click", () => {
      const next = this.undo.redo(this.grid);
      if (next) {
        this.grid = next;
        this.onGridChanged();
      }
      this.updateUndoButtons();
    });

    el<HTMLInputElement>("brush-radius").addEventListener("input", () => {
      el<HTMLSpanElement>("brush-radius-value").textContent =
        el<HTMLInputElement>("brush-radius").value;
    });

    el<HTMLInputElement>("toggle-saliency").addEventListener("change", (ev) => {
      this.showSaliency = (ev.target as HTMLInputElement).checked;
      this.saliency = null;
      this.render();
      if (this.showSaliency) void this.fetchSaliency();
    });

    el<HTMLButtonElement>("btn-oracle").addEventListener("click", () => void this.runOracle());

    el<HTMLButtonElement>("btn-export").addEventListener("click", () => this.exportPgm());
    el<HTMLInputElement>("file-import").addEventListener("change", (ev) => {
      const input = ev.target as HTMLInputElement;
      const file = input.files?.[0];
      if (file) void this.importPgm(file);
      input.value = "";
    });

    el<HTMLButtonElement>("btn-job-start").addEventListener("click", () => void this.startJob());
    el<HTMLButtonElement>("btn-job-cancel").addEventListener("click", () => void this.cancelJob());
    el<HTMLButtonElement>("btn-job-adopt").addEventListener("click", () => void this.adoptJobBest());
  }

  private setGrid(g: Grid): void {
    this.undo.push(this.grid);
    this.grid = g;
    this.onGridChanged();
    this.updateUndoButtons();
  }

  private onGridChanged(): void {
    this.revs.bump();
    this.stale = this.lastPrediction !== null;
    this.saliency = null;
    this.render();
    this.renderPrediction();
    this.requestPredict();
  }

  private updateUndoButtons(): void {
    el<HTMLButtonElement>("btn-undo").disabled = !this.undo.canUndo();
    el<HTMLButtonElement>("btn-redo").disabled = !this.undo.canRedo();
  }

  private render(): void {
    gridToRgba(this.grid.data, this.cellBuf);
    const img = new ImageData(this.cellBuf, GRID_SIZE, GRID_SIZE);
    const octx = this.offscreen.getContext("2d")!;
    octx.putImageData(img, 0, 0);
    this.ctx.imageSmoothingEnabled = false;
    this.ctx.drawImage(this.offscreen, 0, 0, this.canvas.width, this.canvas.height);

    if (this.showSaliency && this.saliency) {
      const overlay = new Uint8ClampedArray(GRID_SIZE * GRID_SIZE * 4);
      saliencyToRgba(this.saliency, overlay);
      octx.putImageData(new ImageData(overlay, GRID_SIZE, GRID_SIZE), 0, 0);
      this.ctx.drawImage(this.offscreen, 0, 0, this.canvas.width, this.canvas.height);
    }
  }

  private firePredict(): void {
    // one in-flight predict at a time; a request that arrives while one
    // is out is remembered and re-fired once it settles
    if (this.predictBusy) {
      this.predictQueued = true;
      return;
    }
    this.predictBusy = true;
    const rev = this.revs.revision;
    const snapshot = this.grid;
    this.api
      .predict(snapshot)
      .then((pred) => {
        if (!this.revs.isCurrent(rev)) return; // stale response, drop it
        this.lastPrediction = pred;
        this.stale = false;
        this.setError(null);
        this.renderPrediction();
        if (this.showSaliency) void this.fetchSaliency();
      })
      .catch((err: unknown) => {
        if (!this.revs.isCurrent(rev)) return;
        this.setError(err instanceof Error ? err.message : String(err));
      })
      .finally(() => {
        this.predictBusy = false;
        if (this.predictQueued) {
          this.predictQueued = false;
          this.firePredict();
        }
      });
  }

  private renderPrediction(): void {
    const badge = el<HTMLDivElement>("class-badge");
    const bars = el<HTMLDivElement>("prob-bars");
    const staleMark = el<HTMLSpanElement>("stale-marker");
    staleMark.hidden = !this.stale;
    if (!this.lastPrediction) {
      badge.textContent = "–";
      return;
    }
    badge.textContent = String(this.lastPrediction.class);
    bars.replaceChildren();
    this.lastPrediction.probs.forEach((p, cls) => {
      const row = document.createElement("div");
      row.className = "prob-row";
      const label = document.createElement("span");
      label.textContent = String(cls);
      const track = document.createElement("div");
      track.className = "prob-track";
      const fill = document.createElement("div");
      fill.className = "prob-fill" + (cls === this.lastPrediction!.class ? " top" : "");
      fill.style.width = `${(p * 100).toFixed(1)}%`;
      track.appendChild(fill);
      const pct = document.createElement("span");
      pct.className = "prob-pct";
      pct.textContent = `${(p * 100).toFixed(1)}%`;
      row.append(label, track, pct);
      bars.appendChild(row);
    });
  }

  private async fetchSaliency(): Promise<void> {
    if (this.saliencyBusy) {
      this.saliencyQueued = true;
      return;
    }
    this.saliencyBusy = true;
    const rev = this.revs.revision;
    try {
      const map = await this.api.saliency(this.grid);
      if (this.revs.isCurrent(rev) && this.showSaliency) {
        this.saliency = map.data;
        this.render();
      }
    } catch (err) {
      if (this.revs.isCurrent(rev)) {
        this.setError(err instanceof Error ? err.message : String(err));
      }
    } finally {
      this.saliencyBusy = false;
      if (this.saliencyQueued) {
        this.saliencyQueued = false;
        if (this.showSaliency) void this.fetchSaliency();
      }
    }
  }

  private async runOracle(): Promise<void> {
    const out = el<HTMLDivElement>("oracle-out");
    out.textContent = "solving…";
    try {
      const rep = await this.api.oracle(this.grid);
      out.replaceChildren();
      const rows: [string, string][] = [
        ["jsc", rep.jsc.toFixed(4)],
        ["proxy", rep.proxy.toFixed(4)],
        ["eta_diss", rep.eta_diss.toFixed(4)],
        ["eta_transport", rep.eta_transport.toFixed(4)],
        ["class", String(rep.class)],
      ];
      for (const [k, v] of rows) {
        const div = document.createElement("div");
        div.innerHTML = `<span class="k">${k}</span><span class="v">${v}</span>`;
        out.appendChild(div);
      }
    } catch (err) {
      out.textContent = err instanceof Error ? err.message : String(err);
    }
  }

  private setError(msg: string | null): void {
    const banner = el<HTMLDivElement>("error-banner");
    banner.hidden = msg === null;
    // the last good prediction stays on screen; the banner just flags it
    if (msg !== null) banner.textContent = msg;
  }

  private exportPgm(): void {
    const bytes = encodePgm(this.grid);
    const ab = new ArrayBuffer(bytes.length);
    new Uint8Array(ab).set(bytes);
    const blob = new Blob([ab], { type: "image/x-portable-graymap" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "morphology.pgm";
    a.click();
    URL.revokeObjectURL(a.href);
  }

  private async importPgm(file: File): Promise<void> {
    try {
      const g = decodePgm(new Uint8Array(await file.arrayBuffer()));
      if (g.height !== GRID_SIZE || g.width !== GRID_SIZE) {
        throw new Error(`expected ${GRID_SIZE}x${GRID_SIZE}, got ${g.width}x${g.height}`);
      }
      this.setGrid(g);
    } catch (err) {
      this.setError(err instanceof Error ? err.message : String(err));
    }
  }

  private async startJob(): Promise<void> {
    const status = el<HTMLDivElement>("job-status");
    try {
      const iters = Number(el<HTMLInputElement>("job-iters").value);
      const n = Number(el<HTMLInputElement>("job-samples").value);
      const { job_id } = await this.api.startDesign("bilayer", { max_iters: iters, n_samples: n });
      this.jobId = job_id;
      status.textContent = `job ${job_id.slice(0, 8)} started`;
      el<HTMLButtonElement>("btn-job-start").disabled = true;
      el<HTMLButtonElement>("btn-job-cancel").disabled = false;
      this.pollJob();
    } catch (err) {
      status.textContent = err instanceof Error ? err.message : String(err);
    }
  }

  private pollJob(): void {
    if (this.jobTimer !== null) window.clearTimeout(this.jobTimer);
    this.jobTimer = window.setTimeout(() => void this.stepJobPoll(), JOB_POLL_MS);
  }

  private async stepJobPoll(): Promise<void> {
    if (!this.jobId) return;
    const status = el<HTMLDivElement>("job-status");
    try {
      const view = await this.api.designStatus(this.jobId);
      this.renderJob(view);
      if (view.status === "running") {
        this.pollJob();
      } else {
        el<HTMLButtonElement>("btn-job-start").disabled = false;
        el<HTMLButtonElement>("btn-job-cancel").disabled = true;
        el<HTMLButtonElement>("btn-job-adopt").disabled = view.best === undefined;
      }
    } catch (err) {
      status.textContent = err instanceof Error ? err.message : String(err);
      el<HTMLButtonElement>("btn-job-start").disabled = false;
      el<HTMLButtonElement>("btn-job-cancel").disabled = true;
    }
  }

  private renderJob(view: DesignJobView): void {
    const status = el<HTMLDivElement>("job-status");
    const fit = view.best_fitness === undefined ? "–" : view.best_fitness.toFixed(4);
    let line = `${view.status} | iter ${view.iteration} | best ${fit}`;
    if (view.error) line += ` | ${view.error}`;
    status.textContent = line;
  }

  private async cancelJob(): Promise<void> {
    if (!this.jobId) return;
    try {
      await this.api.cancelDesign(this.jobId);
    } catch (err) {
      el<HTMLDivElement>("job-status").textContent =
        err instanceof Error ? err.message : String(err);
    }
  }

  private async adoptJobBest(): Promise<void> {
    if (!this.jobId) return;
    try {
      const view = await this.api.designStatus(this.jobId);
      if (view.best) this.setGrid(payloadToGrid(view.best));
    } catch (err) {
      this.setError(err instanceof Error ? err.message : String(err));
    }
  }

  private async showHealth(): Promise<void> {
    const node = el<HTMLSpanElement>("health-line");
    try {
      const h = await this.api.health();
      node.textContent = `model ${h.model_digest.slice(0, 12)}`;
    } catch {
      node.textContent = "server unreachable";
    }
  }
}

new App();
