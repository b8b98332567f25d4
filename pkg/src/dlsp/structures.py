"""Hand-constructed reference morphologies: bilayers, columnar stripes, and
blocking-layer edits.

These never enter training data; they exist for analytic solver checks,
out-of-sample evaluation, and design-loop seeds.
"""

from __future__ import annotations

import numpy as np

from .morpho import DEFAULT_SIZE, Morphology


def make_bilayer(
    donor_thickness: int, height: int = DEFAULT_SIZE, width: int = DEFAULT_SIZE
) -> Morphology:
    """Acceptor on top, a donor slab of the given thickness on the bottom."""
    if not 1 <= donor_thickness < height:
        raise ValueError(f"donor_thickness must lie in [1, {height}), got {donor_thickness}")
    v = np.zeros((height, width))
    v[height - donor_thickness :, :] = 1.0
    return Morphology(v)


def make_columns(
    column_width: int, height: int = DEFAULT_SIZE, width: int = DEFAULT_SIZE
) -> Morphology:
    """Full-height vertical stripes of alternating phase, donor first.

    Widths that do not divide the grid leave a truncated final stripe.
    """
    if column_width < 1:
        raise ValueError(f"column_width must be >= 1, got {column_width}")
    cols = (np.arange(width) // column_width) % 2 == 0
    return Morphology(np.tile(cols.astype(np.float64), (height, 1)))


def balanced_columns(
    column_width: int, height: int = DEFAULT_SIZE, width: int = DEFAULT_SIZE
) -> Morphology:
    """Columnar stripes with a phase offset fixing donor coverage across
    widths.

    Plain stripes on a grid the period does not divide leave donor coverage
    swinging with the width (0.50-0.66 on 101 columns), drowning the
    dissociation trend a width sweep is after.  The offset is chosen per
    width to pin coverage at its closest-to-half value, preferring patterns
    whose wrap seam does not merge two like-phase stripes; ties go to the
    smallest offset, so the construction is deterministic.
    """
    if column_width < 1:
        raise ValueError(f"column_width must be >= 1, got {column_width}")
    period = 2 * column_width
    best = None
    for offset in range(period):
        cols = ((np.arange(width) + offset) % period) < column_width
        key = (abs(int(cols.sum()) - width / 2.0), cols[0] == cols[-1], offset)
        if best is None or key < best[0]:
            best = (key, cols)
    return Morphology(np.tile(best[1].astype(np.float64), (height, 1)))


def add_blocking_layer(m: Morphology, rows: int = 6) -> Morphology:
    """Overwrite the bottom rows with acceptor, severing donor-anode contact."""
    if not 1 <= rows < m.height:
        raise ValueError(f"rows must lie in [1, {m.height}), got {rows}")
    v = m.values.copy()
    v[m.height - rows :, :] = 0.0
    return Morphology(v)
