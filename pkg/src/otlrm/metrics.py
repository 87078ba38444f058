"""Band-wise PSNR and SSIM."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError

SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(X, Y):
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape != Y.shape:
        raise DimensionError(f"shapes differ: {X.shape} vs {Y.shape}")
    if X.ndim == 2:
        X, Y = X[:, :, None], Y[:, :, None]
    if X.ndim != 3:
        raise DimensionError(f"expected 2-D or 3-D data, got shape {X.shape}")
    return X, Y


def psnr(X, Y, peak=1.0):
    """Per-band PSNR in dB and their mean; identical bands give ``inf``."""
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    X, Y = _pair(X, Y)
    mse = ((X - Y) ** 2).mean(axis=(0, 1))
    with np.errstate(divide="ignore"):
        bands = 10.0 * np.log10(peak ** 2 / mse)
    return bands, float(bands.mean())


def _gaussian_window(size=SSIM_WIN, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def _filter2(img, g):
    # separable 'valid' correlation
    tmp = sliding_window_view(img, g.size, axis=0) @ g
    return sliding_window_view(tmp, g.size, axis=1) @ g


def ssim_band(x, y, data_range=1.0):
    if min(x.shape) < SSIM_WIN:
        raise DimensionError(f"band {x.shape} is smaller than the {SSIM_WIN}x{SSIM_WIN} window")
    g = _gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mx, my = _filter2(x, g), _filter2(y, g)
    sxx = _filter2(x * x, g) - mx * mx
    syy = _filter2(y * y, g) - my * my
    sxy = _filter2(x * y, g) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float((num / den).mean())


def ssim(X, Y, data_range=1.0):
    """Per-band mean SSIM (11x11 Gaussian window, sigma 1.5) and the band average."""
    X, Y = _pair(X, Y)
    bands = np.array([ssim_band(X[:, :, k], Y[:, :, k], data_range) for k in range(X.shape[2])])
    return bands, float(bands.mean())


def report(X, Y, peak=1.0):
    pb, p = psnr(X, Y, peak)
    sb, s = ssim(X, Y, peak)
    return {"psnr": p, "ssim": s, "psnr_bands": pb.tolist(), "ssim_bands": sb.tolist()}
