"""Reduced-order device-physics labeler: a J_sc proxy from a two-phase
morphology.

Physics in two stages.  Excitons generated in the donor phase diffuse with
decay (length L_D) and dissociate instantly at donor pixels touching the
acceptor, giving a dissociation efficiency and a per-interface-pixel
absorbed flux.  The freed charges then need connected paths, holes through
donor to the bottom electrode and electrons through acceptor to the top;
path length decays survival with length L_t.  The product of the two stages,
scaled by donor coverage, is the proxy.

Geometry matches the generator: unit pixels, 4-connectivity, lateral wrap,
open top/bottom.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .morpho import (
    BinaryMorphology,
    DatasetManifest,
    Morphology,
    assign_class,
    binarize,
    compute_binning,
    interface_mask,
    load_morphology,
)


class SolverDiverged(RuntimeError):
    """Conjugate gradients hit the iteration cap before the tolerance."""


class NoDonorPixels(ValueError):
    """The morphology contains no donor phase to generate excitons in."""


@dataclass(frozen=True)
class OracleParams:
    exciton_length: float = 10.0  # L_D, pixels
    transport_length: float = 100.0  # L_t, pixels
    generation: float = 1.0  # G, per donor pixel
    solver_tol: float = 1e-8
    solver_max_iters: int = 20000
    j_scale: float = 14.0

    def __post_init__(self):
        if self.exciton_length <= 0 or self.transport_length <= 0:
            raise ValueError("exciton_length and transport_length must be positive")
        if self.generation <= 0:
            raise ValueError("generation must be positive")
        if not 0.0 < self.solver_tol <= 1e-4:
            raise ValueError(f"solver_tol must lie in (0, 1e-4], got {self.solver_tol}")


@dataclass(frozen=True)
class OracleResult:
    jsc: float
    proxy: float
    eta_diss: float
    eta_transport: float
    interface_flux: dict


def _neighbor_sum(x: np.ndarray) -> np.ndarray:
    """Sum of 4-neighbor values: lateral wrap, missing rows contribute 0."""
    out = np.roll(x, 1, axis=1) + np.roll(x, -1, axis=1)
    out[1:, :] += x[:-1, :]
    out[:-1, :] += x[1:, :]
    return out


def _cg(apply_a, rhs: np.ndarray, mask: np.ndarray, tol: float, max_iters: int):
    """Conjugate gradients on the pixels selected by mask; x is a full grid
    that stays zero elsewhere."""
    x = np.zeros_like(rhs)
    r = np.where(mask, rhs, 0.0)
    p = r.copy()
    rs = float((r * r).sum())
    rhs_norm = np.sqrt(rs)
    if rhs_norm == 0.0:
        return x
    for _ in range(max_iters):
        if np.sqrt(rs) <= tol * rhs_norm:
            return x
        ap = apply_a(p)
        alpha = rs / float((p * ap).sum())
        x += alpha * p
        r -= alpha * ap
        rs_new = float((r * r).sum())
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise SolverDiverged(f"no convergence in {max_iters} iterations")


def solve_exciton(b: BinaryMorphology, p: OracleParams):
    """Steady diffusion-decay-generation solve on the donor phase.

    Returns (density grid, eta_diss, interface_flux).  Interface donor
    pixels absorb (density pinned to 0); free donor pixels satisfy
    L_D^2 lap(n) - n + G = 0 with no-flux top/bottom.
    """
    donor = b.donor_mask
    n_donor = int(donor.sum())
    if n_donor == 0:
        raise NoDonorPixels("morphology has no donor pixels")

    iface = donor & interface_mask(b)
    free = donor & ~iface
    l2 = p.exciton_length**2
    g = p.generation

    # Free donor pixels never touch acceptor, so their in-grid neighbors are
    # all donor; deg counts them (4 interior, 3 on the top/bottom rows).
    deg = _neighbor_sum(donor.astype(np.float64))
    diag = 1.0 + l2 * deg

    def apply_a(x):
        return np.where(free, diag * x - l2 * _neighbor_sum(x), 0.0)

    rhs = np.where(free, g, 0.0)
    density = _cg(apply_a, rhs, free, p.solver_tol, p.solver_max_iters)

    eta_diss = 1.0 - float(density.sum()) / (g * n_donor)
    flux_grid = g + l2 * _neighbor_sum(density)
    rows, cols = np.nonzero(iface)
    interface_flux = {
        (int(r), int(c)): float(flux_grid[r, c]) for r, c in zip(rows, cols)
    }
    return density, eta_diss, interface_flux


def _grid_bfs(mask: np.ndarray, sources: np.ndarray) -> np.ndarray:
    """Multi-source BFS distance within mask; unreachable pixels get inf."""
    dist = np.full(mask.shape, np.inf)
    frontier = sources & mask
    dist[frontier] = 0.0
    d = 0.0
    while frontier.any():
        d += 1.0
        grown = frontier | np.roll(frontier, 1, axis=1) | np.roll(frontier, -1, axis=1)
        grown[1:, :] |= frontier[:-1, :]
        grown[:-1, :] |= frontier[1:, :]
        frontier = grown & mask & np.isinf(dist)
        dist[frontier] = d
    return dist


def transport_survival(b: BinaryMorphology, p: OracleParams, interface_flux):
    """Path-decay survival per interface pixel and the flux-weighted mean.

    Holes walk the donor phase to the bottom row, electrons the acceptor
    phase (entered through an adjacent acceptor pixel) to the top row.
    """
    donor = b.donor_mask
    h, _ = donor.shape

    hole_sources = np.zeros_like(donor)
    hole_sources[h - 1, :] = donor[h - 1, :]
    d_hole = _grid_bfs(donor, hole_sources)

    acceptor = ~donor
    electron_sources = np.zeros_like(donor)
    electron_sources[0, :] = acceptor[0, :]
    d_acc = _grid_bfs(acceptor, electron_sources)
    # per pixel, the best electron entry among its acceptor neighbors
    d_electron = np.where(acceptor, d_acc, np.inf)
    best_entry = np.minimum(
        np.roll(d_electron, 1, axis=1), np.roll(d_electron, -1, axis=1)
    )
    best_entry[1:, :] = np.minimum(best_entry[1:, :], d_electron[:-1, :])
    best_entry[:-1, :] = np.minimum(best_entry[:-1, :], d_electron[1:, :])

    survival = {}
    weighted = 0.0
    total = 0.0
    for (r, c), flux in interface_flux.items():
        path = d_hole[r, c] + best_entry[r, c]
        s = float(np.exp(-path / p.transport_length)) if np.isfinite(path) else 0.0
        survival[(r, c)] = s
        weighted += flux * s
        total += flux
    eta_transport = weighted / total if total > 0.0 else 0.0
    return survival, eta_transport


def evaluate(m: Morphology, p: OracleParams = OracleParams()) -> OracleResult:
    """Full proxy evaluation; degenerate single-phase inputs score 0."""
    b = binarize(m)
    h, w = b.donor_mask.shape
    try:
        _, eta_diss, interface_flux = solve_exciton(b, p)
    except NoDonorPixels:
        return OracleResult(
            jsc=0.0, proxy=0.0, eta_diss=0.0, eta_transport=0.0, interface_flux={}
        )
    survival, eta_transport = transport_survival(b, p, interface_flux)
    proxy = sum(
        flux * survival[pix] for pix, flux in interface_flux.items()
    ) / (p.generation * h * w)
    return OracleResult(
        jsc=p.j_scale * proxy,
        proxy=proxy,
        eta_diss=eta_diss,
        eta_transport=eta_transport,
        interface_flux=interface_flux,
    )


def label_dataset(
    manifest: DatasetManifest, p: OracleParams = OracleParams(), base_dir="."
) -> DatasetManifest:
    """Fill jsc for every sample, bin over the train split, label all splits.

    Bin edges come from the training range and are frozen into the manifest;
    other splits are classed with those edges (clamped outside).
    """
    jscs = []
    for s in manifest.samples:
        path = Path(base_dir) / s.path if not Path(s.path).is_absolute() else Path(s.path)
        try:
            m = load_morphology(path)
            jscs.append(evaluate(m, p).jsc)
        except (OSError, ValueError, SolverDiverged) as e:
            raise type(e)(f"{path}: {e}") from e
    train_jscs = [
        j for j, s in zip(jscs, manifest.samples) if s.split == "train"
    ]
    binning = compute_binning(train_jscs)
    samples = tuple(
        replace(s, jsc=j, class_id=assign_class(j, binning))
        for s, j in zip(manifest.samples, jscs)
    )
    return DatasetManifest(
        samples=samples, binning=binning, provenance=manifest.provenance
    )
