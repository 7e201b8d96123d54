from typing import Callable

import numpy as np
import pytest

from sci_radiance.field import init_grid
from sci_radiance.model import (
    CameraConfig,
    Intrinsics,
    MaskStack,
    Primitive,
    RadianceGrid,
    SamplingConfig,
    ToyScene,
)
from sci_radiance.sci import generate_masks
from sci_radiance.utils.sh import SH_C0

GridFactory = Callable[..., RadianceGrid]


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture()
def small_intr() -> Intrinsics:
    return CameraConfig(width=8, height=8, fov_degrees=40).to_intrinsics()


@pytest.fixture()
def small_stack() -> MaskStack:
    return generate_masks(8, 8, 4, 0.5, seed=3)


@pytest.fixture()
def grid_factory() -> GridFactory:
    """Random grids with colours well inside (0, 1)"""

    def make(
        rng: np.random.Generator,
        resolution: int = 8,
        sh_degree: int = 1,
        bbox_min: tuple[float, float, float] = (-1.0, -1.0, -1.0),
        bbox_max: tuple[float, float, float] = (1.0, 1.0, 1.0),
    ) -> RadianceGrid:
        grid = init_grid(resolution, bbox_min, bbox_max, sh_degree=sh_degree)
        shape = grid.density.shape
        density = rng.uniform(-2.0, 1.0, shape)
        sh_coeffs = grid.sh_coeffs.copy()
        sh_coeffs[..., 0, :] += rng.normal(0.0, 0.3, (*shape, 3))
        if sh_degree > 0:
            sh_coeffs[..., 1:, :] = rng.normal(0.0, 0.1, sh_coeffs[..., 1:, :].shape)
        return grid.model_copy(update={"density": density, "sh_coeffs": sh_coeffs})

    return make


@pytest.fixture()
def linear_grid() -> RadianceGrid:
    """
    Grid whose raw density and colour coefficients are affine in the position, so
    that trilinear interpolation is exact and smooth away from the outer voxel
    layer. Covers the view volume of a camera at the origin looking down +z.
    """
    grid = init_grid(
        8, (-4.0, -4.0, -1.0), (4.0, 4.0, 9.0), sh_degree=1, density=0.5
    )
    res = np.array(grid.resolution)
    extent = grid.bbox_max - grid.bbox_min
    axes = [
        grid.bbox_min[a] + (np.arange(res[a]) + 0.5) * extent[a] / res[a]
        for a in range(3)
    ]
    x, y, z = np.meshgrid(*axes, indexing="ij")
    density = -1.0 + 0.3 * x + 0.2 * y + 0.1 * z
    sh_coeffs = grid.sh_coeffs.copy()
    base = np.stack(
        [0.5 + 0.05 * x - 0.03 * y, 0.45 + 0.02 * z, 0.5 - 0.04 * x + 0.03 * y],
        axis=-1,
    )
    sh_coeffs[..., 0, :] = base / SH_C0
    sh_coeffs[..., 1:, :] = np.array([0.05, -0.03, 0.04])[:, None] * np.ones(3)
    return grid.model_copy(update={"density": density, "sh_coeffs": sh_coeffs})


@pytest.fixture()
def slab_scene() -> ToyScene:
    """Flat box covering the whole view of a 30 degree camera at the origin"""
    return ToyScene(
        primitives=[
            Primitive(
                shape="box",
                center=(0.0, 0.0, 4.0),
                size=(1.4, 1.4, 0.5),
                albedo=(0.8, 0.6, 0.4),
                density=2.0,
            )
        ]
    )


@pytest.fixture()
def sphere_scene() -> ToyScene:
    return ToyScene(
        primitives=[
            Primitive(
                shape="sphere",
                center=(0.0, 0.0, 4.0),
                size=(1.0, 1.0, 1.0),
                albedo=(0.2, 0.7, 0.4),
                density=25.0,
            )
        ]
    )


@pytest.fixture()
def center_sampling() -> SamplingConfig:
    return SamplingConfig(t_near=2.0, t_far=6.0, n_samples=16, stratified=False)
