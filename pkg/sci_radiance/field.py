"""
Explicit radiance field on a dense voxel grid and its volume renderer.

Density and spherical-harmonic coefficients are trilinearly interpolated from
voxel centres, density is activated with softplus and colour is clamped to [0, 1].
Rendering uses the standard quadrature with alpha_j = 1 - exp(-sigma_j * delta)
and the backward pass is derived analytically from the same quadrature.
"""
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
from scipy.special import expit

from sci_radiance.geometry import generate_rays
from sci_radiance.model import (
    Intrinsics,
    Pose,
    RadianceGrid,
    Ray,
    RenderOutput,
    SamplingConfig,
)
from sci_radiance.utils.sh import (
    SH_C0,
    eval_sh_basis,
    eval_sh_basis_grad,
    n_coefficients,
)

logger = logging.getLogger(__name__)

EMPTY_RAW_DENSITY = -40.0
DEFAULT_CHUNK_SIZE = 1024

_CORNER_OFFSETS = np.array(
    [[dx, dy, dz] for dx in (0, 1) for dy in (0, 1) for dz in (0, 1)], dtype=np.int64
)


def softplus(x: npt.NDArray) -> npt.NDArray:
    return np.logaddexp(0.0, x)


def inverse_softplus(y: npt.ArrayLike) -> npt.NDArray:
    return np.log(np.expm1(np.asarray(y, dtype=np.float64)))


class GridGradients(NamedTuple):
    """Gradients of a scalar objective with respect to grid parameters and rays"""

    density: npt.NDArray
    sh_coeffs: npt.NDArray
    origins: npt.NDArray
    directions: npt.NDArray


class RayBatchResult(NamedTuple):
    colors: npt.NDArray
    weights: npt.NDArray
    transmittance: npt.NDArray
    caches: list


class _Corners(NamedTuple):
    flat: npt.NDArray
    weights: npt.NDArray
    dweights: npt.NDArray
    inside: npt.NDArray


class _ChunkCache(NamedTuple):
    rays: slice
    corners: _Corners
    raw: npt.NDArray
    rgb: npt.NDArray
    rgb_raw: npt.NDArray
    coeffs: npt.NDArray
    coef_p: npt.NDArray
    basis: npt.NDArray
    directions: npt.NDArray
    t: npt.NDArray
    tau: npt.NDArray
    trans: npt.NDArray
    weights: npt.NDArray
    final_trans: npt.NDArray
    background: npt.NDArray
    delta: float


def init_grid(
    resolution: int | tuple[int, int, int],
    bbox_min: npt.ArrayLike,
    bbox_max: npt.ArrayLike,
    sh_degree: int = 0,
    density: float = 0.1,
    color: float = 0.5,
) -> RadianceGrid:
    """
    Uniform grid with the given activated density and a view independent grey.

    :param resolution: Voxels per axis (int) or (nx, ny, nz)
    :param bbox_min: Lower corner
    :param bbox_max: Upper corner
    :param sh_degree: Degree of the colour model
    :param density: Activated density of every voxel
    :param color: Decoded colour of every voxel

    :return: RadianceGrid
    """
    if isinstance(resolution, int):
        resolution = (resolution, resolution, resolution)
    n_coeffs = n_coefficients(sh_degree)
    sh_coeffs = np.zeros((*resolution, n_coeffs, 3))
    sh_coeffs[..., 0, :] = color / SH_C0
    return RadianceGrid(
        bbox_min=np.asarray(bbox_min, dtype=np.float64),
        bbox_max=np.asarray(bbox_max, dtype=np.float64),
        sh_degree=sh_degree,
        density=np.full(resolution, float(inverse_softplus(density))),
        sh_coeffs=sh_coeffs,
    )


def _corners(grid: RadianceGrid, points: npt.NDArray) -> _Corners:
    res = np.array(grid.resolution)
    extent = grid.bbox_max - grid.bbox_min
    inside = np.all((points >= grid.bbox_min) & (points <= grid.bbox_max), axis=1)

    g = (points - grid.bbox_min) / extent * res - 0.5
    clipped = (g < 0) | (g > res - 1)
    g = np.clip(g, 0, res - 1)
    i0 = np.minimum(np.floor(g).astype(np.int64), res - 2)
    frac = g - i0
    dg_dp = np.where(clipped, 0.0, res / extent)

    idx = i0[:, None, :] + _CORNER_OFFSETS[None]
    flat = (idx[..., 0] * res[1] + idx[..., 1]) * res[2] + idx[..., 2]

    upper = _CORNER_OFFSETS[None].astype(bool)
    axis_w = np.where(upper, frac[:, None, :], 1.0 - frac[:, None, :])
    sign = np.where(upper, 1.0, -1.0)
    weights = axis_w.prod(axis=2)
    dweights = np.stack(
        [
            sign[..., 0] * axis_w[..., 1] * axis_w[..., 2],
            sign[..., 1] * axis_w[..., 0] * axis_w[..., 2],
            sign[..., 2] * axis_w[..., 0] * axis_w[..., 1],
        ],
        axis=2,
    ) * dg_dp[:, None, :]

    weights = weights * inside[:, None]
    dweights = dweights * inside[:, None, None]
    return _Corners(flat=flat, weights=weights, dweights=dweights, inside=inside)


def _query(
    grid: RadianceGrid, points: npt.NDArray, basis: npt.NDArray
) -> tuple[npt.NDArray, npt.NDArray, npt.NDArray, npt.NDArray, npt.NDArray, _Corners]:
    corners = _corners(grid, points)
    raw = (grid.density.ravel()[corners.flat] * corners.weights).sum(axis=1)
    coeffs = grid.sh_coeffs.reshape(-1, grid.n_coeffs, 3)[corners.flat]
    coef_p = np.einsum("mc,mckj->mkj", corners.weights, coeffs)
    rgb_raw = np.einsum("mk,mkj->mj", basis, coef_p)
    return raw, rgb_raw, coeffs, coef_p, corners.inside, corners


def sample_field(
    grid: RadianceGrid, point: npt.ArrayLike, direction: npt.ArrayLike
) -> tuple[float, npt.NDArray]:
    """
    Density and colour of the field at a point seen from a direction. Points outside
    the bbox are empty and black.

    :param grid: Radiance grid
    :param point: 3D position
    :param direction: Unit viewing direction

    :return: Activated density and clamped RGB
    """
    points = np.asarray(point, dtype=np.float64).reshape(1, 3)
    directions = np.asarray(direction, dtype=np.float64).reshape(1, 3)
    basis = eval_sh_basis(grid.sh_degree, directions)
    raw, rgb_raw, _, _, inside, _ = _query(grid, points, basis)
    density = float(softplus(raw[0])) if inside[0] else 0.0
    return density, np.clip(rgb_raw[0], 0.0, 1.0)


def sample_distances(
    cfg: SamplingConfig, n_rays: int, jitter: None | npt.NDArray = None
) -> npt.NDArray:
    """Sample distances (n_rays, n_samples): bin centres or jittered positions"""
    offsets = 0.5 if jitter is None else jitter
    bins = np.arange(cfg.n_samples)[None, :] + offsets
    return np.broadcast_to(
        cfg.t_near + bins * cfg.bin_width, (n_rays, cfg.n_samples)
    ).copy()


def _forward_chunk(
    grid: RadianceGrid,
    origins: npt.NDArray,
    directions: npt.NDArray,
    cfg: SamplingConfig,
    jitter: None | npt.NDArray,
    rays: slice,
) -> tuple[npt.NDArray, _ChunkCache]:
    n_rays, n_samples = len(origins), cfg.n_samples
    delta = cfg.bin_width
    t = sample_distances(cfg, n_rays, jitter)
    points = (origins[:, None, :] + t[..., None] * directions[:, None, :]).reshape(
        -1, 3
    )
    ray_basis = eval_sh_basis(grid.sh_degree, directions)
    basis = np.repeat(ray_basis, n_samples, axis=0)

    raw, rgb_raw, coeffs, coef_p, inside, corners = _query(grid, points, basis)
    sigma = np.where(inside, softplus(raw), 0.0).reshape(n_rays, n_samples)
    rgb = np.clip(rgb_raw, 0.0, 1.0)

    tau = sigma * delta
    alpha = -np.expm1(-tau)
    cum = np.cumsum(tau, axis=1)
    trans = np.exp(-np.concatenate([np.zeros((n_rays, 1)), cum[:, :-1]], axis=1))
    final_trans = np.exp(-cum[:, -1])
    weights = trans * alpha

    background = np.ones(3) if cfg.white_background else np.zeros(3)
    colors = (weights[..., None] * rgb.reshape(n_rays, n_samples, 3)).sum(axis=1)
    colors += final_trans[:, None] * background

    cache = _ChunkCache(
        rays=rays,
        corners=corners,
        raw=raw,
        rgb=rgb,
        rgb_raw=rgb_raw,
        coeffs=coeffs,
        coef_p=coef_p,
        basis=basis,
        directions=directions,
        t=t,
        tau=tau,
        trans=trans,
        weights=weights,
        final_trans=final_trans,
        background=background,
        delta=delta,
    )
    return colors, cache


def _backward_chunk(
    grid: RadianceGrid, cache: _ChunkCache, upstream: npt.NDArray
) -> GridGradients:
    n_rays, n_samples = cache.weights.shape
    n_voxels = grid.density.size
    n_coeffs = grid.n_coeffs
    corners = cache.corners

    rgb = cache.rgb.reshape(n_rays, n_samples, 3)
    g_dot_c = (rgb * upstream[:, None, :]).sum(axis=2)
    weighted = cache.weights * g_dot_c
    later = weighted.sum(axis=1, keepdims=True) - np.cumsum(weighted, axis=1)
    trans_next = cache.trans * np.exp(-cache.tau)
    g_dot_bg = upstream @ cache.background
    d_tau = trans_next * g_dot_c - later
    d_tau -= (cache.final_trans * g_dot_bg)[:, None]

    d_raw = (d_tau * cache.delta).ravel() * np.where(
        corners.inside, expit(cache.raw), 0.0
    )

    d_rgb = (cache.weights[..., None] * upstream[:, None, :]).reshape(-1, 3)
    d_rgb_raw = d_rgb * ((cache.rgb_raw > 0.0) & (cache.rgb_raw < 1.0))
    d_coef_p = cache.basis[:, :, None] * d_rgb_raw[:, None, :]

    flat = corners.flat.ravel()
    density_grad = np.bincount(
        flat, weights=(corners.weights * d_raw[:, None]).ravel(), minlength=n_voxels
    )
    corner_coef_grad = (
        corners.weights[:, :, None, None] * d_coef_p[:, None, :, :]
    ).reshape(-1, n_coeffs * 3)
    sh_grad = np.stack(
        [
            np.bincount(flat, weights=corner_coef_grad[:, col], minlength=n_voxels)
            for col in range(n_coeffs * 3)
        ],
        axis=1,
    )

    density_values = grid.density.ravel()[corners.flat]
    d_point = d_raw[:, None] * np.einsum("mc,mca->ma", density_values, corners.dweights)
    coef_weight = np.einsum("mkj,mckj->mc", d_coef_p, cache.coeffs)
    d_point += np.einsum("mc,mca->ma", coef_weight, corners.dweights)
    d_point = d_point.reshape(n_rays, n_samples, 3)

    d_origins = d_point.sum(axis=1)
    d_directions = (cache.t[..., None] * d_point).sum(axis=1)
    if grid.sh_degree > 0:
        d_basis = np.einsum("mj,mkj->mk", d_rgb_raw, cache.coef_p)
        d_basis = d_basis.reshape(n_rays, n_samples, n_coeffs).sum(axis=1)
        basis_grad = eval_sh_basis_grad(grid.sh_degree, cache.directions)
        d_directions += np.einsum("rk,rka->ra", d_basis, basis_grad)

    return GridGradients(
        density=density_grad.reshape(grid.density.shape),
        sh_coeffs=sh_grad.reshape(grid.sh_coeffs.shape),
        origins=d_origins,
        directions=d_directions,
    )


def _chunks(n_rays: int, chunk_size: int) -> list[slice]:
    return [
        slice(start, min(start + chunk_size, n_rays))
        for start in range(0, n_rays, chunk_size)
    ]


def render_rays(
    grid: RadianceGrid,
    origins: npt.NDArray,
    directions: npt.NDArray,
    cfg: SamplingConfig,
    jitter: None | npt.NDArray = None,
    keep_cache: bool = False,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    n_workers: int = 1,
) -> RayBatchResult:
    """
    Render a batch of rays.

    :param grid: Radiance grid
    :param origins: (R, 3) ray origins
    :param directions: (R, 3) unit ray directions
    :param cfg: Sampling configuration
    :param jitter: Optional (R, n_samples) offsets in [0, 1) inside each bin. Bin
        centres are used if None
    :param keep_cache: Keep intermediate values for backward_from_cache
    :param chunk_size: Rays per chunk
    :param n_workers: Threads used to render chunks

    :return: Colours (R, 3), weights (R, n_samples), final transmittance (R,) and
        the caches (empty unless keep_cache is set)
    """
    n_rays = len(origins)
    slices = _chunks(n_rays, chunk_size)

    def run(rays: slice) -> tuple[npt.NDArray, _ChunkCache]:
        return _forward_chunk(
            grid,
            origins[rays],
            directions[rays],
            cfg,
            None if jitter is None else jitter[rays],
            rays,
        )

    if n_workers > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(run, slices))
    else:
        results = [run(rays) for rays in slices]

    colors = np.zeros((n_rays, 3))
    weights = np.zeros((n_rays, cfg.n_samples))
    transmittance = np.ones(n_rays)
    for chunk_colors, cache in results:
        colors[cache.rays] = chunk_colors
        weights[cache.rays] = cache.weights
        transmittance[cache.rays] = cache.final_trans

    caches = [cache for _, cache in results] if keep_cache else []
    return RayBatchResult(
        colors=colors, weights=weights, transmittance=transmittance, caches=caches
    )


def backward_from_cache(
    grid: RadianceGrid,
    result: RayBatchResult,
    upstream: npt.NDArray,
    deterministic: bool = True,
    n_workers: int = 1,
) -> GridGradients:
    """
    Reverse pass for a batch rendered with keep_cache=True.

    :param grid: The grid the batch was rendered from
    :param result: Output of render_rays with caches
    :param upstream: (R, 3) gradient of the objective with respect to ray colours
    :param deterministic: Reduce per-chunk gradient buffers in chunk order
    :param n_workers: Threads used for the chunks

    :return: Dense gradients for density and SH coefficients plus per-ray gradients
        with respect to origins and directions
    """
    if not result.caches and len(result.colors):
        raise ValueError("render_rays must be called with keep_cache=True")
    n_rays = len(result.colors)
    density = np.zeros(grid.density.shape)
    sh_coeffs = np.zeros(grid.sh_coeffs.shape)
    d_origins = np.zeros((n_rays, 3))
    d_directions = np.zeros((n_rays, 3))

    def run(cache: _ChunkCache) -> tuple[slice, GridGradients]:
        return cache.rays, _backward_chunk(grid, cache, upstream[cache.rays])

    if n_workers > 1 and len(result.caches) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(run, cache) for cache in result.caches]
            ordered = (
                [f.result() for f in futures]
                if deterministic
                else [f.result() for f in as_completed(futures)]
            )
    else:
        ordered = [run(cache) for cache in result.caches]

    for rays, grads in ordered:
        density += grads.density
        sh_coeffs += grads.sh_coeffs
        d_origins[rays] = grads.origins
        d_directions[rays] = grads.directions

    return GridGradients(
        density=density,
        sh_coeffs=sh_coeffs,
        origins=d_origins,
        directions=d_directions,
    )


def render_rays_backward(
    grid: RadianceGrid,
    origins: npt.NDArray,
    directions: npt.NDArray,
    cfg: SamplingConfig,
    upstream: npt.NDArray,
    jitter: None | npt.NDArray = None,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> GridGradients:
    """Gradients of sum(upstream * colours) for a batch of rays"""
    result = render_rays(
        grid, origins, directions, cfg, jitter, keep_cache=True, chunk_size=chunk_size
    )
    return backward_from_cache(grid, result, np.asarray(upstream, dtype=np.float64))


def render_ray(
    grid: RadianceGrid,
    ray: Ray,
    cfg: SamplingConfig,
    jitter: None | npt.NDArray = None,
) -> RenderOutput:
    """
    Volume render a single ray.

    :param grid: Radiance grid
    :param ray: Camera ray
    :param cfg: Sampling configuration
    :param jitter: Optional (n_samples,) offsets inside each bin

    :return: RenderOutput with colour, per-sample weights and final transmittance
    """
    result = render_rays(
        grid,
        ray.origin[None],
        ray.direction[None],
        cfg,
        None if jitter is None else np.asarray(jitter)[None],
    )
    return RenderOutput(
        color=result.colors[0],
        weights=result.weights[0],
        transmittance=float(result.transmittance[0]),
    )


def render_ray_backward(
    grid: RadianceGrid,
    ray: Ray,
    cfg: SamplingConfig,
    upstream: npt.ArrayLike,
    jitter: None | npt.NDArray = None,
) -> GridGradients:
    """Gradients of upstream . colour(ray) with respect to every grid parameter and
    the ray origin/direction"""
    grads = render_rays_backward(
        grid,
        ray.origin[None],
        ray.direction[None],
        cfg,
        np.asarray(upstream, dtype=np.float64).reshape(1, 3),
        None if jitter is None else np.asarray(jitter)[None],
    )
    return grads


def stratified_jitter(
    n_rays: int, cfg: SamplingConfig, rng: np.random.Generator
) -> None | npt.NDArray:
    if not cfg.stratified:
        return None
    return rng.random((n_rays, cfg.n_samples))


def render_frame(
    grid: RadianceGrid,
    pose: Pose,
    intr: Intrinsics,
    cfg: SamplingConfig,
    seed: int = 0,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    n_workers: int = 1,
) -> npt.NDArray:
    """
    Render a full image. Jitter (if enabled) is drawn per pixel in row-major order
    from a generator seeded with seed, so results are deterministic.

    :return: (H, W, 3) image
    """
    origins, directions = generate_rays(intr, pose)
    jitter = stratified_jitter(len(origins), cfg, np.random.default_rng(seed))
    result = render_rays(
        grid,
        origins,
        directions,
        cfg,
        jitter,
        chunk_size=chunk_size,
        n_workers=n_workers,
    )
    logger.debug("Rendered %sx%s frame", intr.height, intr.width)
    return result.colors.reshape(intr.height, intr.width, 3)


def density_tv(density: npt.NDArray, eps: float = 1e-8) -> tuple[float, npt.NDArray]:
    """
    Smoothed isotropic total variation of the raw density (mean over voxels) and its
    gradient.
    """
    diffs = []
    for axis in range(3):
        d = np.zeros_like(density)
        src = [slice(None)] * 3
        dst = [slice(None)] * 3
        src[axis] = slice(1, None)
        dst[axis] = slice(None, -1)
        d[tuple(dst)] = density[tuple(src)] - density[tuple(dst)]
        diffs.append(d)
    norm = np.sqrt(sum(d * d for d in diffs) + eps)
    n = density.size
    grad = np.zeros_like(density)
    for axis, d in enumerate(diffs):
        g = d / norm / n
        src = [slice(None)] * 3
        dst = [slice(None)] * 3
        src[axis] = slice(None, -1)
        dst[axis] = slice(1, None)
        grad -= g
        grad[tuple(dst)] += g[tuple(src)]
    return float(norm.sum() / n), grad
