import numpy as np
import pytest

from dlsp.chgen import NonPowerOfTwoSize, fft2, ifft2


def direct_dft2(x):
    """Textbook four-loop DFT, the independent reference for fft2."""
    h, w = x.shape
    out = np.zeros((h, w), dtype=np.complex128)
    for u in range(h):
        for v in range(w):
            acc = 0.0 + 0.0j
            for i in range(h):
                for j in range(w):
                    acc += x[i, j] * np.exp(-2j * np.pi * (u * i / h + v * j / w))
            out[u, v] = acc
    return out


def test_impulse_spectrum_is_flat():
    x = np.zeros((4, 4))
    x[0, 0] = 1.0
    assert np.allclose(fft2(x), np.ones((4, 4)), atol=1e-12)


def test_constant_grid_concentrates_at_dc():
    x = np.full((8, 8), 3.25)
    out = fft2(x)
    assert out[0, 0] == pytest.approx(3.25 * 64)
    out[0, 0] = 0.0
    assert np.abs(out).max() < 1e-10


def test_matches_direct_dft_8x8():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((8, 8))
    assert np.abs(fft2(x) - direct_dft2(x)).max() < 1e-9


def test_matches_library_fft_16x16():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    assert np.abs(fft2(x) - np.fft.fft2(x)).max() < 1e-10


def test_round_trip_128():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((128, 128))
    assert np.abs(ifft2(fft2(x)) - x).max() <= 1e-10


def test_linearity():
    rng = np.random.default_rng(3)
    a, b = rng.standard_normal((2, 16, 16))
    lhs = fft2(2.0 * a - 0.5 * b)
    rhs = 2.0 * fft2(a) - 0.5 * fft2(b)
    assert np.abs(lhs - rhs).max() < 1e-10


def test_rejects_non_power_of_two():
    with pytest.raises(NonPowerOfTwoSize):
        fft2(np.zeros((12, 12)))
    with pytest.raises(NonPowerOfTwoSize):
        ifft2(np.zeros((8, 96)))


def test_rejects_non_2d():
    with pytest.raises(ValueError):
        fft2(np.zeros(16))


def test_rectangular_power_of_two_grid():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((8, 32))
    assert np.abs(fft2(x) - np.fft.fft2(x)).max() < 1e-10
    assert np.abs(ifft2(fft2(x)) - x).max() < 1e-10
