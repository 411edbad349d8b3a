"""Small FFT helpers for periodic grids on the unit torus.

All routines assume uniform grids with cell size 1/n and use the
convention that wavenumber k corresponds to the mode exp(2*pi*i*k*x).
"""

import numpy as np


def wavenumbers(n):
    """Integer wavenumbers matching numpy's fft layout."""
    return np.fft.fftfreq(n, d=1.0 / n)


def gradient(field, axis=0):
    """Spectral derivative of a periodic field along one axis."""
    n = field.shape[axis]
    k = wavenumbers(n)
    shape = [1] * field.ndim
    shape[axis] = n
    fac = (2j * np.pi * k).reshape(shape)
    return np.real(np.fft.ifft(fac * np.fft.fft(field, axis=axis), axis=axis))


def shift(field, amounts, axis=0):
    """Translate periodic samples by arbitrary (per-row) amounts.

    ``field`` has the spatial axis ``axis``; ``amounts`` is either a scalar
    or an array broadcastable against the remaining axes.  The translation
    is exact for the trigonometric interpolant of the samples.
    """
    n = field.shape[axis]
    k = wavenumbers(n)
    fh = np.fft.fft(field, axis=axis)
    shape = [1] * field.ndim
    shape[axis] = n
    kk = k.reshape(shape)
    amounts = np.asarray(amounts, dtype=float)
    if amounts.ndim:
        # per-slice shifts: amounts indexed by the other axes
        exp_shape = list(field.shape)
        exp_shape[axis] = 1
        amounts = amounts.reshape(exp_shape)
    phase = np.exp(-2j * np.pi * kk * amounts)
    return np.real(np.fft.ifft(fh * phase, axis=axis))
