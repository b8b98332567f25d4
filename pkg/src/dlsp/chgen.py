"""Phase-separated morphology generation by Cahn-Hilliard integration.

The order parameter phi lives on a periodic square grid with phi = +1 pure
donor and phi = -1 pure acceptor.  One step applies the linearly-stabilized
semi-implicit spectral update of

    dphi/dt = M lap(phi^3 - phi - eps2 lap phi)

which is unconditionally stable in practice at S = 2 and conserves the mean
of phi exactly (the k = 0 mode is never touched).  Snapshots along a run are
center-cropped to 101x101 and mapped to grayscale donor fraction.

The FFT here is a from-scratch radix-2 iterative transform; the stepper is
its only production consumer but it is exported for reuse and testing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .morpho import Morphology

CROP_SIZE = 101

DEFAULT_SNAPSHOT_STEPS = tuple(100 * 2**k for k in range(7))

# Donor fractions 0.4-0.6 for label diversity; cycled across runs by the
# generate driver.
BLEND_MEANS = (-0.2, -0.1, 0.0, 0.1, 0.2)


class NonPowerOfTwoSize(ValueError):
    """FFT input length is not a power of two."""


class NumericalBlowup(RuntimeError):
    """The phase field left its physical range; parameters are bad."""


# ---------------------------------------------------------------------------
# Radix-2 FFT


@lru_cache(maxsize=None)
def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    rev.setflags(write=False)
    return rev


@lru_cache(maxsize=None)
def _twiddles(half: int, sign: int) -> np.ndarray:
    w = np.exp(sign * 1j * np.pi * np.arange(half) / half)
    w.setflags(write=False)
    return w


def _check_length(n: int) -> None:
    if n < 1 or n & (n - 1):
        raise NonPowerOfTwoSize(f"length {n} is not a power of two")


def _fft_last_axis(a: np.ndarray, sign: int) -> np.ndarray:
    """Iterative Cooley-Tukey over the last axis, all rows at once.

    Ping-pong between two buffers so each stage is two strided writes
    instead of a concatenate.
    """
    n = a.shape[-1]
    _check_length(n)
    buf = np.ascontiguousarray(a[..., _bit_reversal(n)], dtype=np.complex128)
    tmp = np.empty_like(buf)
    half = 1
    while half < n:
        stage = (*buf.shape[:-1], n // (2 * half), 2, half)
        pairs = buf.reshape(stage)
        dest = tmp.reshape(stage)
        even = pairs[..., 0, :]
        odd = pairs[..., 1, :] * _twiddles(half, sign)
        np.add(even, odd, out=dest[..., 0, :])
        np.subtract(even, odd, out=dest[..., 1, :])
        buf, tmp = tmp, buf
        half *= 2
    return buf


def fft2(grid: np.ndarray) -> np.ndarray:
    """Unnormalized 2D forward transform of a power-of-two-sided grid."""
    a = np.asarray(grid)
    if a.ndim != 2:
        raise ValueError(f"expected a 2D grid, got shape {a.shape}")
    out = _fft_last_axis(a, -1)
    return _fft_last_axis(out.T, -1).T


def ifft2(grid: np.ndarray) -> np.ndarray:
    """Inverse of fft2; divides by the total point count."""
    a = np.asarray(grid)
    if a.ndim != 2:
        raise ValueError(f"expected a 2D grid, got shape {a.shape}")
    out = _fft_last_axis(a, +1)
    out = _fft_last_axis(out.T, +1).T
    return out / (a.shape[0] * a.shape[1])


# ---------------------------------------------------------------------------
# Parameters and state


@dataclass(frozen=True)
class ChParams:
    grid_n: int = 128
    eps2: float = 1.0
    mobility: float = 1.0
    dt: float = 0.1
    stabilization: float = 2.0
    blend_mean: float = 0.0
    noise_amp: float = 0.1
    seed: int = 0
    snapshot_steps: tuple[int, ...] = DEFAULT_SNAPSHOT_STEPS

    def __post_init__(self):
        n = self.grid_n
        if n < 32 or n & (n - 1):
            raise ValueError(f"grid_n must be a power of two >= 32, got {n}")
        if self.dt <= 0 or self.eps2 <= 0 or self.mobility <= 0:
            raise ValueError("dt, eps2 and mobility must be positive")
        if abs(self.blend_mean) + self.noise_amp >= 1.0:
            raise ValueError("|blend_mean| + noise_amp must stay below 1")
        steps = tuple(int(s) for s in self.snapshot_steps)
        if not steps or any(s <= 0 for s in steps) or list(steps) != sorted(set(steps)):
            raise ValueError("snapshot_steps must be increasing positive integers")
        object.__setattr__(self, "snapshot_steps", steps)


@dataclass(frozen=True)
class ChState:
    phi: np.ndarray
    step: int
    dt: float

    def __post_init__(self):
        phi = np.array(self.phi, dtype=np.float64)
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def time(self) -> float:
        return self.step * self.dt


@lru_cache(maxsize=8)
def _spectral_tables(grid_n, eps2, mobility, dt, stabilization):
    """k^2 grid and the implicit denominator, shared across steps and runs."""
    j = np.arange(grid_n)
    j = np.where(j < grid_n // 2, j, j - grid_n)
    k = 2.0 * np.pi * j / grid_n
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    dtm = dt * mobility
    denom = 1.0 + dtm * stabilization * k2 + dtm * eps2 * k2**2
    k2.setflags(write=False)
    denom.setflags(write=False)
    return k2, denom


def ch_init(params: ChParams) -> ChState:
    """Uniform blend plus seeded uniform noise in [-noise_amp, +noise_amp]."""
    rng = np.random.default_rng(params.seed)
    phi = params.blend_mean + rng.uniform(
        -params.noise_amp, params.noise_amp, (params.grid_n, params.grid_n)
    )
    return ChState(phi=phi, step=0, dt=params.dt)


def _real_pair_spectra(a: np.ndarray, b: np.ndarray):
    """Spectra of two real grids from one transform of a + i*b.

    Uses the Hermitian split X(k) = A(k) + i*B(k), A(k) = (X(k) +
    conj(X(-k)))/2; exact, so it changes nothing but the flop count.
    """
    x = fft2(a + 1j * b)
    rev = np.roll(x[::-1, ::-1], (1, 1), axis=(0, 1))  # X(-k)
    c = np.conj(rev)
    return 0.5 * (x + c), -0.5j * (x - c)


def ch_step(state: ChState, params: ChParams) -> ChState:
    """One semi-implicit spectral update; the k=0 mode passes through."""
    k2, denom = _spectral_tables(
        params.grid_n,
        params.eps2,
        params.mobility,
        params.dt,
        params.stabilization,
    )
    phi = state.phi
    dtm = params.dt * params.mobility
    phi_hat, g_hat = _real_pair_spectra(phi, phi**3 - phi)
    num = (1.0 + dtm * params.stabilization * k2) * phi_hat - dtm * k2 * g_hat
    phi_new = ifft2(num / denom).real
    if np.abs(phi_new).max() > 10.0:
        raise NumericalBlowup(
            f"max|phi| = {np.abs(phi_new).max():.3g} at step {state.step + 1}"
        )
    return replace(state, phi=phi_new, step=state.step + 1)


def energy(state: ChState, params: ChParams) -> float:
    """Discrete Ginzburg-Landau energy with periodic forward differences."""
    phi = state.phi
    gx = np.roll(phi, -1, axis=1) - phi
    gy = np.roll(phi, -1, axis=0) - phi
    well = 0.25 * (phi**2 - 1.0) ** 2
    return float((well + 0.5 * params.eps2 * (gx**2 + gy**2)).sum())


def crop_center(phi: np.ndarray, size: int = CROP_SIZE) -> np.ndarray:
    h, w = phi.shape
    if h < size or w < size:
        raise ValueError(f"cannot crop {size} from {h}x{w}")
    r, c = (h - size) // 2, (w - size) // 2
    return phi[r : r + size, c : c + size]


def to_morphology(state: ChState) -> Morphology:
    """Center-crop and map phi in [-1,1] to donor fraction in [0,1].

    Grids smaller than the standard crop are kept whole.
    """
    size = min(CROP_SIZE, *state.phi.shape)
    gray = np.clip((crop_center(state.phi, size) + 1.0) / 2.0, 0.0, 1.0)
    return Morphology(gray)


def snapshot_group(seed: int, step: int) -> str:
    """Group id shared by all augmented variants of one snapshot."""
    return f"ch_{seed}_{step}"


def ch_run(params: ChParams) -> list[Morphology]:
    """Integrate to the last snapshot step, emitting a cropped morphology at
    each step in params.snapshot_steps (same order)."""
    state = ch_init(params)
    wanted = set(params.snapshot_steps)
    out = []
    for _ in range(max(params.snapshot_steps)):
        state = ch_step(state, params)
        if state.step in wanted:
            out.append(to_morphology(state))
    return out


def params_text(params: ChParams) -> str:
    """key=value echo of run parameters for the generation sidecar."""
    lines = [
        f"grid_n={params.grid_n}",
        f"eps2={params.eps2!r}",
        f"mobility={params.mobility!r}",
        f"dt={params.dt!r}",
        f"stabilization={params.stabilization!r}",
        f"blend_mean={params.blend_mean!r}",
        f"noise_amp={params.noise_amp!r}",
        f"seed={params.seed}",
        "snapshot_steps=" + ",".join(str(s) for s in params.snapshot_steps),
    ]
    return "\n".join(lines) + "\n"
