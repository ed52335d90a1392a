# metrics/image.py
"""
マスク付き PSNR / SSIM（信号レンジ 1.0）。

SSIM: 11-tap ガウシアン窓 σ=1.5、K1=0.01、K2=0.03。
局所統計はマスクで重み付けし、窓が画像に収まり中心がマスク内の位置だけを平均する。
"""
from __future__ import annotations
from typing import Optional

import numpy as np
from scipy.ndimage import correlate1d

PSNR_CAP = 99.0
WINDOW = 11
SIGMA = 1.5
K1, K2 = 0.01, 0.03
DATA_RANGE = 1.0


def _prepare(a, b, mask):
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.ndim == 2:
        x, y = x[..., None], y[..., None]
    if x.ndim != 3:
        raise ValueError(f"expected (H,W) or (H,W,C) images, got {x.shape}")
    m = np.ones(x.shape[:2], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if m.shape != x.shape[:2]:
        raise ValueError(f"mask shape {m.shape} does not match image {x.shape[:2]}")
    return x, y, m


def psnr(a, b, mask: Optional[np.ndarray] = None) -> float:
    x, y, m = _prepare(a, b, mask)
    if not m.any():
        raise ValueError("mask is empty")
    mse = float(np.mean((x[m] - y[m]) ** 2))
    if mse <= 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(DATA_RANGE ** 2 / mse))


def gaussian_window(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _filter(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    out = correlate1d(img, g, axis=0, mode="constant")
    return correlate1d(out, g, axis=1, mode="constant")


def ssim_map(a, b, mask: Optional[np.ndarray] = None):
    """
    Returns:
        smap: (H,W,C) 局所 SSIM
        centers: (H,W) 平均に使う窓中心
    """
    x, y, m = _prepare(a, b, mask)
    h, w = m.shape
    if h < WINDOW or w < WINDOW:
        raise ValueError(f"image {w}x{h} is smaller than the {WINDOW}x{WINDOW} window")
    g = gaussian_window()
    wm = m.astype(np.float64)
    norm = _filter(wm, g)
    c1 = (K1 * DATA_RANGE) ** 2
    c2 = (K2 * DATA_RANGE) ** 2

    half = WINDOW // 2
    centers = np.zeros_like(m)
    centers[half:h - half, half:w - half] = m[half:h - half, half:w - half]
    safe = np.where(norm > 0, norm, 1.0)

    smap = np.zeros(x.shape)
    for ch in range(x.shape[2]):
        xa, yb = x[..., ch], y[..., ch]
        mu_x = _filter(wm * xa, g) / safe
        mu_y = _filter(wm * yb, g) / safe
        s_xx = _filter(wm * xa * xa, g) / safe - mu_x * mu_x
        s_yy = _filter(wm * yb * yb, g) / safe - mu_y * mu_y
        s_xy = _filter(wm * xa * yb, g) / safe - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * s_xy + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (s_xx + s_yy + c2)
        smap[..., ch] = num / den
    return smap, centers


def ssim(a, b, mask: Optional[np.ndarray] = None) -> float:
    smap, centers = ssim_map(a, b, mask)
    if not centers.any():
        raise ValueError("no window center lies inside the mask")
    return float(smap[centers].mean())
