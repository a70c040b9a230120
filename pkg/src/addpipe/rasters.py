"""Raster primitives: PNG I/O, mask decoding, morphology, and feathered compositing.

Masks are single-channel uint8 arrays with values {0, 255}; images are uint8
arrays, either (H, W) grayscale or (H, W, 3) RGB.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import IngestionError

MASK_ON = 255


def load_image(path) -> np.ndarray:
    img = Image.open(path)
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB")
    return np.asarray(img)


def save_png(array: np.ndarray, path) -> None:
    Image.fromarray(array).save(path, format="PNG")


def encode_png(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(data)))


def mask_area(mask: np.ndarray) -> int:
    return int(np.count_nonzero(mask))


def mask_bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    """Tight (x, y, w, h) bounding box of set pixels; (0, 0, 0, 0) for empty masks."""
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return (0, 0, 0, 0)
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    return (x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def rasterize_polygons(polygons: list[list[float]], height: int, width: int) -> np.ndarray:
    """Rasterize flat [x1, y1, x2, y2, ...] polygon lists to one binary mask.

    Scanline fill with the even-odd rule evaluated at pixel centers
    (x + 0.5, y + 0.5). Multiple polygons are OR-combined.
    """
    mask = np.zeros((height, width), dtype=np.uint8)
    for flat in polygons:
        if len(flat) < 6 or len(flat) % 2 != 0:
            continue
        xs = np.asarray(flat[0::2], dtype=np.float64)
        ys = np.asarray(flat[1::2], dtype=np.float64)
        n = len(xs)
        for row in range(height):
            cy = row + 0.5
            crossings = []
            for i in range(n):
                x0, y0 = xs[i], ys[i]
                x1, y1 = xs[(i + 1) % n], ys[(i + 1) % n]
                # half-open edge rule avoids double-counting shared vertices
                if (y0 <= cy < y1) or (y1 <= cy < y0):
                    crossings.append(x0 + (cy - y0) * (x1 - x0) / (y1 - y0))
            crossings.sort()
            for j in range(0, len(crossings) - 1, 2):
                lo = int(np.ceil(crossings[j] - 0.5))
                hi = int(np.floor(crossings[j + 1] - 0.5))
                if hi >= lo:
                    mask[row, max(lo, 0) : min(hi, width - 1) + 1] = MASK_ON
    return mask


def decode_rle(counts: list[int], height: int, width: int) -> np.ndarray:
    """Decode uncompressed COCO run-length counts (column-major, starting with off-runs)."""
    total = height * width
    if sum(counts) != total:
        raise IngestionError(f"RLE counts sum {sum(counts)} != {height}x{width}")
    flat = np.zeros(total, dtype=np.uint8)
    pos = 0
    value = 0
    for run in counts:
        if value:
            flat[pos : pos + run] = MASK_ON
        pos += run
        value ^= 1
    return flat.reshape((width, height)).T


def dilate(mask: np.ndarray, radius_px: int, element: str = "square") -> np.ndarray:
    """Minkowski dilation; the square element uses a (2r+1)x(2r+1) footprint."""
    if radius_px < 0:
        raise ValueError("dilation radius must be >= 0")
    if radius_px == 0 or not mask.any():
        return mask.copy()
    size = 2 * radius_px + 1
    if element == "square":
        footprint = np.ones((size, size), dtype=bool)
    elif element == "disc":
        yy, xx = np.mgrid[-radius_px : radius_px + 1, -radius_px : radius_px + 1]
        footprint = (yy**2 + xx**2) <= radius_px**2
    else:
        raise ValueError(f"unknown structuring element '{element}'")
    out = ndimage.binary_dilation(mask > 0, structure=footprint)
    return np.where(out, MASK_ON, 0).astype(np.uint8)


def feathered_weights(mask: np.ndarray, sigma: float, dilate_radius: int = 0, element: str = "square") -> np.ndarray:
    """Soft [0, 1] weight map: dilate the mask, then Gaussian-blur with std sigma.

    Pixels outside the blur support of the dilated mask are exactly 0.
    """
    work = dilate(mask, dilate_radius, element) if dilate_radius > 0 else mask
    w = (work > 0).astype(np.float64)
    if sigma > 0:
        w = ndimage.gaussian_filter(w, sigma=sigma, mode="reflect")
    return np.clip(w, 0.0, 1.0)


def blend_with_weights(source: np.ndarray, inpainted: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """out = w * inpainted + (1 - w) * source, rounded once; w == 0 pixels copy source bit-for-bit."""
    if source.shape != inpainted.shape:
        raise ValueError("source and inpainted shapes differ")
    w = weights[..., None] if source.ndim == 3 else weights
    out = np.rint(w * inpainted.astype(np.float64) + (1.0 - w) * source.astype(np.float64))
    out = np.clip(out, 0, 255).astype(np.uint8)
    zero = np.broadcast_to(w == 0.0, source.shape)
    out[zero] = source[zero]
    return out


def mean_color(image: np.ndarray) -> np.ndarray:
    """Per-channel mean over all pixels, float64."""
    if image.ndim == 2:
        return np.asarray([image.astype(np.float64).mean()])
    return image.astype(np.float64).reshape(-1, image.shape[2]).mean(axis=0)


def composite_on_mean_background(
    image: np.ndarray, mask: np.ndarray, sigma: float, dilate_radius: int = 0, element: str = "square"
) -> np.ndarray:
    """Replace the unmasked background with the image's mean color, feathering edges.

    Returns a float64 raster: mean + w * (image - mean). Grouped this way (plus
    an exact snap at w == 1) so fully-weighted pixels and constant-color images
    reproduce the original values bit-for-bit.
    """
    w = feathered_weights(mask, sigma, dilate_radius, element)
    mean = mean_color(image)
    img = image.astype(np.float64)
    if image.ndim == 3:
        base = mean[None, None, :]
        out = base + w[..., None] * (img - base)
        full = np.broadcast_to((w == 1.0)[..., None], img.shape)
    else:
        out = mean[0] + w * (img - mean[0])
        full = w == 1.0
    out[full] = img[full]
    return out
