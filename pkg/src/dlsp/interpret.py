"""Model introspection: input saliency and where it concentrates.

Saliency is the absolute gradient of one class logit with respect to the
input pixels, rescaled so the strongest pixel is 1.  The concentration
statistic compares mean saliency on a band around the donor/acceptor
interface against the mean over the rest of the grid; a trained model
should lean on the interface, so the ratio is the quantity of interest.
"""

from __future__ import annotations

import numpy as np

from .morpho import BinaryMorphology, Morphology, interface_mask
from .nn.model import CnnModel, backward_from_logits, forward_with_caches


def _as_values(grid) -> np.ndarray:
    if isinstance(grid, Morphology):
        return grid.values
    if isinstance(grid, BinaryMorphology):
        return grid.donor_mask.astype(np.float64)
    return np.asarray(grid, dtype=np.float64)


def saliency(model: CnnModel, grid, target: int | None = None) -> np.ndarray:
    """|d logit_target / d pixel|, max-normalised; an all-zero map stays zero.

    ``target`` defaults to the model's predicted class for this grid.
    """
    values = _as_values(grid)
    x = values[None, :, :, None]
    logits, caches = forward_with_caches(model, x)
    if target is None:
        target = int(np.argmax(logits[0]))
    elif not 0 <= target < model.arch.n_classes:
        raise ValueError(f"target must lie in [0, {model.arch.n_classes}), got {target}")
    pick = np.zeros_like(logits)
    pick[0, target] = 1.0
    dx, _ = backward_from_logits(model, caches, pick)
    out = np.abs(np.asarray(dx[0, :, :, 0], dtype=np.float64))
    peak = out.max()
    return out / peak if peak > 0.0 else out


def dilate(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    """Grow by 4-neighbor steps; lateral edges wrap, top/bottom do not."""
    out = mask.astype(bool).copy()
    for _ in range(radius):
        grown = out | np.roll(out, 1, axis=1) | np.roll(out, -1, axis=1)
        grown[1:, :] |= out[:-1, :]
        grown[:-1, :] |= out[1:, :]
        out = grown
    return out


def interface_concentration(sal: np.ndarray, b: BinaryMorphology) -> float:
    """Band mean over complement mean; never NaN.

    The band is the phase interface dilated by one pixel.  An empty band
    (single-phase grid) gives 0.  A complement with zero mean under a
    nonzero band gives +inf.
    """
    sal = np.asarray(sal, dtype=np.float64)
    if sal.shape != b.donor_mask.shape:
        raise ValueError(f"saliency {sal.shape} does not match grid {b.donor_mask.shape}")
    band = dilate(interface_mask(b), 1)
    if not band.any():
        return 0.0
    band_mean = float(sal[band].mean())
    complement = ~band
    comp_mean = float(sal[complement].mean()) if complement.any() else 0.0
    if comp_mean == 0.0:
        return float("inf") if band_mean > 0.0 else 0.0
    return band_mean / comp_mean


def mean_interface_concentration(model: CnnModel, grids) -> float:
    """Average concentration over an iterable of binary grids."""
    ratios = []
    for b in grids:
        if not isinstance(b, BinaryMorphology):
            b = BinaryMorphology(np.asarray(b) > 0.5)
        ratios.append(interface_concentration(saliency(model, b), b))
    if not ratios:
        raise ValueError("no grids given")
    return float(np.mean(ratios))
