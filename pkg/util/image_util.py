"""
===============================================================================
BEV IMAGE TOOLS - LOAD, ROTATE/CROP ALONG THE AGENT, PATCHIFY
===============================================================================

Purpose:
    Image side of data preparation:

      1) read_bev_image(): PNG/JPEG via Pillow, or the raw "BEV1" container
      2) rotate_crop(): s x s crop in the agent-centric frame, agent pinned at
         output pixel (row s/2, col s/4), rows running along the heading
      3) extract_patches()/patchify(): raster-order flattened patches and their
         linear projection to image tokens

Key behaviors:
    - World <-> pixel mapping: col = (x - origin_x) / mpp, row = (y - origin_y) / mpp.
      SDD-style pixel datasets use mpp = 1 and origin (0, 0).
    - Sampling modes: "nearest" (exact, used for anchor checks) and "bilinear"
      (training crops). Samples falling outside the source read as 0.
    - Patch flattening order is channel-last: (row, col, channel) inside each
      patch, patches ordered row-major over the patch grid.

Raw container layout (little-endian):
    magic b"BEV1" | height uint32 | width uint32 | height*width*3 uint8 (HWC)

===============================================================================
"""

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from PIL import Image

from util.errors_util import ConfigError, CropError, DimensionError, LoadError, PathError
from util.transform_util import RigidTransform2D, invert, transform_points

logger = logging.getLogger("BevImage")

RAW_MAGIC = b"BEV1"
SAMPLING_MODES = ("nearest", "bilinear")


# =============================================================================
# IMAGE TYPE
# =============================================================================
@dataclass
class BevImage:
    pixels: np.ndarray
    meters_per_pixel: float = 1.0
    origin: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise DimensionError(f"BEV image must be HxWx3, got {px.shape}")
        if np.any(px < 0):
            raise DimensionError("BEV image intensities must be nonnegative")
        mpp = float(self.meters_per_pixel)
        if not np.isfinite(mpp) or mpp <= 0:
            raise ConfigError(f"meters_per_pixel must be finite and positive, got {self.meters_per_pixel}")
        self.pixels = px
        self.meters_per_pixel = mpp
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def world_to_pixel(self, xy: np.ndarray) -> np.ndarray:
        """World points [..., 2] -> fractional (row, col) [..., 2]."""
        xy = np.asarray(xy, dtype=np.float64)
        col = (xy[..., 0] - self.origin[0]) / self.meters_per_pixel
        row = (xy[..., 1] - self.origin[1]) / self.meters_per_pixel
        return np.stack([row, col], axis=-1)

    def pixel_to_world(self, rc: np.ndarray) -> np.ndarray:
        rc = np.asarray(rc, dtype=np.float64)
        x = self.origin[0] + rc[..., 1] * self.meters_per_pixel
        y = self.origin[1] + rc[..., 0] * self.meters_per_pixel
        return np.stack([x, y], axis=-1)

    def to_dict(self) -> dict:
        return {
            "pixels": self.pixels,
            "meters_per_pixel": self.meters_per_pixel,
            "origin": list(self.origin),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BevImage":
        return cls(np.asarray(d["pixels"]), d["meters_per_pixel"], tuple(d["origin"]))


# =============================================================================
# I/O
# =============================================================================
def read_bev_image(path, meters_per_pixel: float = 1.0, origin=(0.0, 0.0)) -> BevImage:
    path = Path(path)
    if not path.exists():
        raise PathError(path)
    with path.open("rb") as fh:
        head = fh.read(4)
    if head == RAW_MAGIC:
        raw = path.read_bytes()
        if len(raw) < 12:
            raise LoadError(f"{path}: truncated raw image header")
        h, w = struct.unpack_from("<II", raw, 4)
        expected = 12 + h * w * 3
        if len(raw) != expected:
            raise LoadError(f"{path}: raw image holds {len(raw)} bytes, expected {expected}")
        pixels = np.frombuffer(raw, dtype=np.uint8, offset=12).reshape(h, w, 3)
    else:
        with Image.open(path) as img:
            pixels = np.asarray(img.convert("RGB"))
    logger.info("Loaded BEV image %s (%dx%d)", path, pixels.shape[0], pixels.shape[1])
    return BevImage(pixels.astype(np.float64), meters_per_pixel, origin)


def write_raw_image(image: BevImage, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.clip(np.rint(image.pixels), 0, 255).astype(np.uint8)
    path.write_bytes(RAW_MAGIC + struct.pack("<II", image.height, image.width) + data.tobytes())
    return path


def dump_crop(image: BevImage, path) -> Path:
    """Write a crop as PNG for inspection."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.clip(np.rint(image.pixels), 0, 255).astype(np.uint8), mode="RGB").save(path)
    return path


# =============================================================================
# ROTATE + CROP
# =============================================================================
def _sample_nearest(pixels: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    h, w = pixels.shape[:2]
    ri = np.floor(rows + 0.5).astype(np.int64)
    ci = np.floor(cols + 0.5).astype(np.int64)
    inside = (ri >= 0) & (ri < h) & (ci >= 0) & (ci < w)
    out = np.zeros(rows.shape + (pixels.shape[2],), dtype=pixels.dtype)
    out[inside] = pixels[ri[inside], ci[inside]]
    return out


def _sample_bilinear(pixels: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    h, w = pixels.shape[:2]
    r0 = np.floor(rows).astype(np.int64)
    c0 = np.floor(cols).astype(np.int64)
    fr = (rows - r0)[..., None]
    fc = (cols - c0)[..., None]
    out = np.zeros(rows.shape + (pixels.shape[2],), dtype=pixels.dtype)
    for dr, wr in ((0, 1.0 - fr), (1, fr)):
        for dc, wc in ((0, 1.0 - fc), (1, fc)):
            rr = r0 + dr
            cc = c0 + dc
            inside = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
            vals = np.zeros_like(out)
            vals[inside] = pixels[rr[inside], cc[inside]]
            out += wr * wc * vals
    return out


def crop_anchor(s: int) -> Tuple[int, int]:
    """Output (row, col) holding the agent's last observed position."""
    return s // 2, s // 4


def rotate_crop(
    image: BevImage,
    t: RigidTransform2D,
    s: int,
    *,
    sampling: str = "bilinear",
    pad: int = 0,
    out_size: Optional[int] = None,
) -> BevImage:
    """
    Crop an s x s window in the agent-centric frame defined by t.

    Parameters
    ----------
    image : BevImage
        Source image in world coordinates.
    t : RigidTransform2D
        World -> agent transform (heading_transform of the main agent).
    s : int
        Crop side in source pixels.
    sampling : {"nearest", "bilinear"}
    pad : int
        Zero padding (pixels) allowed around the source when validating the
        agent position and crop size.
    out_size : int, optional
        Output side in pixels; defaults to s. Other values resample the same
        s x s window onto an out_size grid (per-class crop sides feeding one
        patch grid).

    Raises
    ------
    CropError
        s < 2, s larger than the padded source, or the agent outside it.
    """
    if sampling not in SAMPLING_MODES:
        raise ConfigError(f"unknown sampling mode '{sampling}' (expected {SAMPLING_MODES})")
    if s < 2:
        raise CropError(f"crop side must be >= 2, got {s}")
    if s > min(image.height, image.width) + 2 * pad:
        raise CropError(
            f"crop side {s} exceeds padded source {image.height}x{image.width} (pad {pad})"
        )

    to_world = invert(t)
    agent_rc = image.world_to_pixel(to_world.translation)
    if not (-pad <= agent_rc[0] < image.height + pad and -pad <= agent_rc[1] < image.width + pad):
        raise CropError(f"agent pixel position {agent_rc.tolist()} outside the padded source")

    n = s if out_size is None else int(out_size)
    if n < 2:
        raise CropError(f"crop output side must be >= 2, got {n}")
    # output pixel size in world units
    mpp = image.meters_per_pixel * s / n
    anchor_r, anchor_c = crop_anchor(n)
    rr, cc = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    agent_xy = np.stack([(cc - anchor_c) * mpp, (rr - anchor_r) * mpp], axis=-1).astype(np.float64)
    world_xy = transform_points(to_world, agent_xy)
    src_rc = image.world_to_pixel(world_xy)

    sampler = _sample_nearest if sampling == "nearest" else _sample_bilinear
    pixels = sampler(image.pixels, src_rc[..., 0], src_rc[..., 1])
    return BevImage(pixels, mpp, (-anchor_c * mpp, -anchor_r * mpp))


# =============================================================================
# PATCHES
# =============================================================================
@dataclass
class PatchTokens:
    tokens: np.ndarray
    patch_size: int
    cache: Optional[tuple] = field(default=None, repr=False)

    @property
    def count(self) -> int:
        return self.tokens.shape[-2]


def patch_count(s: int, patch_size: int) -> int:
    if patch_size < 1 or s % patch_size != 0:
        raise ConfigError(f"crop side {s} is not divisible by patch size {patch_size}")
    return (s // patch_size) ** 2


def extract_patches(pixels: np.ndarray, patch_size: int) -> np.ndarray:
    """
    [..., s, s, C] -> [..., (s/p)^2, p*p*C], raster order, channel-last inside a patch.
    """
    *lead, h, w, c = pixels.shape
    if h != w:
        raise DimensionError(f"patchify expects a square crop, got {h}x{w}")
    patch_count(h, patch_size)
    g = h // patch_size
    x = pixels.reshape(*lead, g, patch_size, g, patch_size, c)
    nl = len(lead)
    order = list(range(nl)) + [nl, nl + 2, nl + 1, nl + 3, nl + 4]
    x = x.transpose(order)
    return x.reshape(*lead, g * g, patch_size * patch_size * c)


def patchify(image, patch_size: int, projection) -> PatchTokens:
    """
    Linearly embed raster-order patches of an s x s crop.

    `image` is a BevImage or a pixel array [..., s, s, 3] (a batch of crops).
    `projection` is a numerics.ops_util.LinearLayer with W [p*p*3, d_img];
    its forward cache rides on the result for the backward pass.
    """
    pixels = image.pixels if isinstance(image, BevImage) else np.asarray(image)
    patches = extract_patches(pixels.astype(projection.weight.tensor.dtype, copy=False), patch_size)
    tokens, cache = projection.forward(patches)
    return PatchTokens(tokens=tokens, patch_size=patch_size, cache=cache)
