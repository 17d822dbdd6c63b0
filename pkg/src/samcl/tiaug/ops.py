"""Occluder synthesis, sensor noise, geometric transforms and normalization.

Images are 2-D float64 arrays in degrees Celsius; masks are integer label
arrays of the same shape with 0 as background. Every sampling step is split
into ``sample_*`` (draws parameters from a Generator) and ``apply_*`` (pure
function of the parameters) so an AugParams record replays a sample exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..data.raster import polygon_mask
from ..errors import ContractViolation, StatisticsUnavailableError
from ..imaging import min_max_normalize
from .config import AugConfig, AugParams, GeometricParams, OccluderParams


@dataclass
class AugSample:
    image: np.ndarray  # normalized to [0, 1]
    mask: np.ndarray
    occlusion_map: np.ndarray
    applied_params: AugParams


def _check_pair(img: np.ndarray, mask: np.ndarray) -> None:
    if img.ndim != 2:
        raise ContractViolation(f"expected a 2-D thermal image, got shape {img.shape}")
    if mask.shape != img.shape:
        raise ContractViolation(f"mask shape {mask.shape} does not match image {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ContractViolation("thermal image contains non-finite values")


# -- statistics ---------------------------------------------------------------


def fg_bg_stats(img: np.ndarray, mask: np.ndarray) -> tuple[float, float]:
    """Mean over non-background pixels and mean over background pixels."""
    img = np.asarray(img, dtype=np.float64)
    mask = np.asarray(mask)
    _check_pair(img, mask)
    fg = mask != 0
    if not fg.any():
        raise StatisticsUnavailableError("face region is empty: no pixels with class != 0")
    if fg.all():
        raise StatisticsUnavailableError("background region is empty: no pixels with class 0")
    return float(img[fg].mean()), float(img[~fg].mean())


# -- noise ----------------------------------------------------------------------


def add_netd_noise(img: np.ndarray, netd_max: float, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. uniform noise on [0, netd_max) to every pixel.

    Floating-point addition can round ``img + d`` so that the realized
    difference reaches ``netd_max``; such pixels are stepped down one ulp at a
    time so the bound holds on the stored values too.
    """
    if not netd_max > 0:
        raise ContractViolation(f"netd_max must be > 0, got {netd_max}")
    img = np.asarray(img, dtype=np.float64)
    out = img + rng.uniform(0.0, netd_max, size=img.shape)
    over = (out - img) >= netd_max
    while over.any():
        out[over] = np.nextafter(out[over], -np.inf)
        over = (out - img) >= netd_max
    under = out < img
    out[under] = img[under]
    return out


# -- geometry -------------------------------------------------------------------


def sample_geometric(cfg: AugConfig, rng: np.random.Generator) -> GeometricParams:
    p = GeometricParams(output_size=cfg.output_size)
    p.hflip = bool(rng.random() < cfg.hflip_p)
    p.vflip = bool(rng.random() < cfg.vflip_p)
    if rng.random() < cfg.rotation_p:
        p.angle = float(rng.uniform(-cfg.rotation_degrees, cfg.rotation_degrees))
    if rng.random() < cfg.resize_p:
        p.resize = float(rng.uniform(*cfg.resize_range))
    if rng.random() < cfg.blur_p:
        p.blur_sigma = float(rng.uniform(*cfg.blur_sigma_range))
    return p


def geometric_output_shape(shape: tuple[int, int], p: GeometricParams) -> tuple[int, int]:
    if p.output_size is not None:
        return tuple(p.output_size)
    if p.resize == 1.0:
        return tuple(shape)
    return tuple(max(1, int(round(s * p.resize))) for s in shape)


def _fit(a: np.ndarray, size: tuple[int, int], fill) -> np.ndarray:
    """Center crop and/or pad to ``size``."""
    out = np.full(size, fill, dtype=a.dtype)
    src, dst = [], []
    for have, want in zip(a.shape, size):
        if have >= want:
            off = (have - want) // 2
            src.append(slice(off, off + want))
            dst.append(slice(0, want))
        else:
            off = (want - have) // 2
            src.append(slice(0, have))
            dst.append(slice(off, off + have))
    out[tuple(dst)] = a[tuple(src)]
    return out


def apply_geometric(img: np.ndarray, mask: np.ndarray, p: GeometricParams, fill: float):
    """Flip, rotate, resize, blur (image only), then fit to ``p.output_size``."""
    img = np.asarray(img, dtype=np.float64)
    mask = np.asarray(mask)
    if p.hflip:
        img, mask = img[:, ::-1], mask[:, ::-1]
    if p.vflip:
        img, mask = img[::-1, :], mask[::-1, :]
    if p.angle != 0.0:
        img = ndimage.rotate(img, p.angle, reshape=False, order=1, mode="constant", cval=fill)
        mask = ndimage.rotate(mask, p.angle, reshape=False, order=0, mode="constant", cval=0)
    if p.resize != 1.0:
        shape = geometric_output_shape(img.shape, GeometricParams(resize=p.resize))
        zoom = [n / o for n, o in zip(shape, img.shape)]
        img = ndimage.zoom(img, zoom, order=1, mode="nearest")
        mask = ndimage.zoom(mask, zoom, order=0, mode="nearest")
    if p.blur_sigma > 0.0:
        img = ndimage.gaussian_filter(img, p.blur_sigma, mode="nearest")
    if p.output_size is not None and tuple(img.shape) != tuple(p.output_size):
        img = _fit(img, tuple(p.output_size), fill)
        mask = _fit(mask, tuple(p.output_size), 0)
    return np.ascontiguousarray(img), np.ascontiguousarray(mask)


def _fill_value(img: np.ndarray, mask: np.ndarray) -> float:
    bg = mask == 0
    return float(img[bg].mean()) if bg.any() else float(img.min())


def geometric_transform(img: np.ndarray, mask: np.ndarray, cfg: AugConfig, rng: np.random.Generator):
    img = np.asarray(img, dtype=np.float64)
    _check_pair(img, np.asarray(mask))
    return apply_geometric(img, mask, sample_geometric(cfg, rng), _fill_value(img, mask))


# -- occluders ------------------------------------------------------------------


def _pick_regimes(k: int, cfg: AugConfig, rng: np.random.Generator) -> list[str]:
    enabled = [r for r, on in (("hot", cfg.enable_hot), ("cold", cfg.enable_cold)) if on]
    regimes = [enabled[int(rng.integers(len(enabled)))] for _ in range(k)]
    if cfg.ensure_both_regimes and len(enabled) == 2 and k >= 2:
        regimes[0], regimes[1] = "hot", "cold"
    return regimes


def _convex_vertices(radius_x: float, radius_y: float, theta: float, rng) -> list[tuple[float, float]]:
    # points on an ellipse at sorted angles always form a convex polygon
    n = int(rng.integers(3, 9))
    angles = np.sort(rng.uniform(0.0, 2 * math.pi, size=n))
    c, s = math.cos(theta), math.sin(theta)
    verts = []
    for a in angles:
        u, v = radius_x * math.cos(a), radius_y * math.sin(a)
        verts.append((float(u * c - v * s), float(u * s + v * c)))
    return verts


def _strand_vertices(length: float, theta: float, rng) -> list[tuple[float, float]]:
    n = int(rng.integers(6, 13))
    step = length / n
    heading = theta
    x = y = 0.0
    pts = [(0.0, 0.0)]
    for _ in range(n):
        heading += float(rng.normal(0.0, 0.35))
        x += step * math.cos(heading)
        y += step * math.sin(heading)
        pts.append((x, y))
    mx = sum(p[0] for p in pts) / len(pts)
    my = sum(p[1] for p in pts) / len(pts)
    return [(float(px - mx), float(py - my)) for px, py in pts]


def sample_occluders(shape: tuple[int, int], cfg: AugConfig, rng: np.random.Generator) -> list[OccluderParams]:
    lo, hi = cfg.occluder_count_range
    k = int(rng.integers(lo, hi + 1))
    if k == 0:
        return []
    h, w = shape
    regimes = _pick_regimes(k, cfg, rng)
    out = []
    for regime in regimes:
        kind = cfg.shapes[int(rng.integers(len(cfg.shapes)))]
        size = float(rng.uniform(*cfg.size_range))
        center = (float(rng.uniform(0, h)), float(rng.uniform(0, w)))
        theta = float(rng.uniform(0.0, math.pi))
        aspect = float(rng.uniform(0.4, 1.0))
        if regime == "hot":
            offset = float(rng.uniform(*cfg.hot_offset_range))
        else:
            offset = -float(rng.uniform(*cfg.cold_offset_range))
        softness = float(rng.uniform(*cfg.edge_softness_range))
        extent = size * min(h, w)
        thickness = 0.0
        verts: list[tuple[float, float]] = []
        if kind == "polygon":
            verts = _convex_vertices(extent / 2, aspect * extent / 2, theta, rng)
        elif kind == "strand":
            thickness = float(rng.uniform(1.5, 4.0))
            verts = _strand_vertices(extent, theta, rng)
        out.append(OccluderParams(kind, center, size, theta, aspect, regime, offset, softness, thickness, verts))
    return out


def _segment_distance(px, py, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    t = 0.0 if denom == 0 else np.clip(((px - ax) * dx + (py - ay) * dy) / denom, 0.0, 1.0)
    return np.hypot(px - (ax + t * dx), py - (ay + t * dy))


def occluder_footprint(o: OccluderParams, shape: tuple[int, int]) -> np.ndarray:
    """Hard boolean footprint of one object (never empty: falls back to the pixel under its center)."""
    h, w = shape
    cy, cx = o.center
    extent = o.size * min(h, w)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    if o.shape_kind in ("ellipse", "rectangle"):
        c, s = math.cos(o.orientation), math.sin(o.orientation)
        u = (xs - cx) * c + (ys - cy) * s
        v = -(xs - cx) * s + (ys - cy) * c
        a = max(extent / 2, 0.5)
        b = max(a * o.aspect, 0.5)
        if o.shape_kind == "ellipse":
            hard = (u / a) ** 2 + (v / b) ** 2 <= 1.0
        else:
            hard = (np.abs(u) <= a) & (np.abs(v) <= b)
    elif o.shape_kind == "polygon":
        hard = polygon_mask([(cx + vx, cy + vy) for vx, vy in o.vertices], h, w)
    elif o.shape_kind == "strand":
        dist = np.full(shape, np.inf)
        pts = [(cx + vx, cy + vy) for vx, vy in o.vertices]
        for (ax, ay), (bx, by) in zip(pts[:-1], pts[1:]):
            dist = np.minimum(dist, _segment_distance(xs, ys, ax, ay, bx, by))
        hard = dist <= o.thickness / 2
    else:
        raise ContractViolation(f"unknown occluder shape {o.shape_kind!r}")
    if not hard.any():
        hard[min(max(int(round(cy)), 0), h - 1), min(max(int(round(cx)), 0), w - 1)] = True
    return hard


def occluder_alpha(o: OccluderParams, shape: tuple[int, int]) -> np.ndarray:
    """Blend weight: 0 outside the footprint, ramping from just above 0.5 at its
    rim to 1 at ``edge_softness`` pixels inward."""
    hard = occluder_footprint(o, shape)
    if o.edge_softness <= 0.0:
        return hard.astype(np.float64)
    inward = ndimage.distance_transform_edt(hard)  # >= 1 on the footprint
    alpha = np.minimum(0.5 + 0.5 * inward / (1.0 + o.edge_softness), 1.0)
    return np.where(hard, alpha, 0.0)


def occluder_temperature(o: OccluderParams, face_mean: float, background_mean: float) -> float:
    if o.regime == "hot":
        return face_mean + o.temperature_offset
    return background_mean + o.temperature_offset


def render_occluders(img: np.ndarray, occluders, face_mean: float, background_mean: float):
    img = np.array(img, dtype=np.float64)
    occ = np.zeros(img.shape, dtype=bool)
    for o in occluders:
        alpha = occluder_alpha(o, img.shape)
        temp = occluder_temperature(o, face_mean, background_mean)
        img = (1.0 - alpha) * img + alpha * temp
        occ |= alpha > 0.5
    return img, occ


def synth_occluders(img, face_mask, cfg: AugConfig, rng: np.random.Generator, stats=None):
    """Paint hot/cold objects onto ``img``; returns (image, occlusion_map).

    ``stats`` = (face_mean, background_mean) overrides the statistics of
    ``img`` (the full pipeline anchors them to the source image).
    """
    img = np.asarray(img, dtype=np.float64)
    face_mask = np.asarray(face_mask)
    _check_pair(img, face_mask)
    face_mean, bg_mean = stats if stats is not None else fg_bg_stats(img, face_mask)
    occluders = sample_occluders(img.shape, cfg, rng)
    if not occluders:
        return img.copy(), np.zeros(img.shape, dtype=bool)
    return render_occluders(img, occluders, face_mean, bg_mean)


# -- full pipeline ----------------------------------------------------------------


def sample_params(img: np.ndarray, mask: np.ndarray, cfg: AugConfig, rng: np.random.Generator) -> AugParams:
    img = np.asarray(img, dtype=np.float64)
    mask = np.asarray(mask)
    _check_pair(img, mask)
    geo = sample_geometric(cfg, rng)
    occluders = sample_occluders(geometric_output_shape(img.shape, geo), cfg, rng)
    if occluders:
        face_mean, bg_mean = fg_bg_stats(img, mask)
    else:
        bg = mask == 0
        face_mean = float(img[~bg].mean()) if (~bg).any() else float(img.max())
        bg_mean = _fill_value(img, mask)
    noise_seed = int(rng.integers(2**63)) if cfg.noise else None
    return AugParams(geo, occluders, noise_seed, cfg.netd_max, face_mean, bg_mean)


def apply_params(img: np.ndarray, mask: np.ndarray, params: AugParams, normalize: bool = True) -> AugSample:
    """Deterministic replay: geometry, occluders, noise, then normalization."""
    img = np.asarray(img, dtype=np.float64)
    mask = np.asarray(mask)
    _check_pair(img, mask)
    out, out_mask = apply_geometric(img, mask, params.geometric, params.background_mean)
    out, occ = render_occluders(out, params.occluders, params.face_mean, params.background_mean)
    if params.noise_seed is not None:
        out = add_netd_noise(out, params.netd_max, np.random.default_rng(params.noise_seed))
    if normalize:
        out = min_max_normalize(out)
    return AugSample(out, out_mask, occ, params)


def augment(img, mask, cfg: AugConfig, rng: np.random.Generator, normalize: bool = True) -> AugSample:
    return apply_params(img, mask, sample_params(img, mask, cfg, rng), normalize=normalize)


def sample_seed(global_seed: int, index: int) -> np.random.SeedSequence:
    """Per-sample seed material, independent of which worker handles the sample."""
    return np.random.SeedSequence([int(global_seed), int(index)])
