from math import isclose, radians, tan
from typing import Literal

import numpy as np
import numpy.typing as npt
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    field_validator,
    model_validator,
)
from pydantic_numpy import np_array_pydantic_annotated_typing

from sci_radiance.exceptions import DimensionMismatchError
from sci_radiance.utils.sh import n_coefficients

Vector3 = tuple[float, float, float]

FloatArray1D = np_array_pydantic_annotated_typing(data_type=np.float64, dimensions=1)
FloatArray2D = np_array_pydantic_annotated_typing(data_type=np.float64, dimensions=2)
FloatArray3D = np_array_pydantic_annotated_typing(data_type=np.float64, dimensions=3)
FloatArray5D = np_array_pydantic_annotated_typing(data_type=np.float64, dimensions=5)
FloatArray = np_array_pydantic_annotated_typing(data_type=np.float64)
Float32Array3D = np_array_pydantic_annotated_typing(data_type=np.float32, dimensions=3)
MaskArray3D = np_array_pydantic_annotated_typing(data_type=np.uint8, dimensions=3)


def _check_shape(value: npt.NDArray, shape: tuple[int, ...], name: str) -> None:
    if value.shape != shape:
        raise ValueError(f"{name} must have shape {shape}. Got {value.shape}")


class Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Pose(Model):
    """Rigid transform in SE(3) mapping camera coordinates to world coordinates"""

    rotation: FloatArray2D  # type: ignore
    """3x3 orthonormal rotation matrix"""

    translation: FloatArray1D  # type: ignore
    """Camera centre in world coordinates (scene units)"""

    @field_validator("rotation")
    @classmethod
    def rotation_is_3x3(cls, v: npt.NDArray) -> npt.NDArray:
        _check_shape(v, (3, 3), "rotation")
        return v

    @field_validator("translation")
    @classmethod
    def translation_is_3d(cls, v: npt.NDArray) -> npt.NDArray:
        _check_shape(v, (3,), "translation")
        return v

    @classmethod
    def identity(cls) -> "Pose":
        return cls(rotation=np.eye(3), translation=np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix: npt.NDArray) -> "Pose":
        """Build a pose from a 3x4 or 4x4 homogeneous matrix"""
        matrix = np.asarray(matrix, dtype=np.float64)
        return cls(rotation=matrix[:3, :3].copy(), translation=matrix[:3, 3].copy())

    def matrix(self) -> npt.NDArray:
        """Homogeneous 4x4 representation"""
        ret = np.eye(4)
        ret[:3, :3] = self.rotation
        ret[:3, 3] = self.translation
        return ret

    def __repr__(self) -> str:
        return (
            f"Pose(rotation={self.rotation.round(6).tolist()}, "
            f"translation={self.translation.round(6).tolist()})"
        )


class Twist(Model):
    """Element of the se(3) Lie algebra"""

    rho: FloatArray1D  # type: ignore
    """Translational part"""

    phi: FloatArray1D  # type: ignore
    """Rotational part (axis times angle in radians)"""

    @field_validator("rho", "phi")
    @classmethod
    def finite_3d(cls, v: npt.NDArray) -> npt.NDArray:
        _check_shape(v, (3,), "twist component")
        if not np.all(np.isfinite(v)):
            raise ValueError("Twist entries must be finite")
        return v

    @classmethod
    def zero(cls) -> "Twist":
        return cls(rho=np.zeros(3), phi=np.zeros(3))

    @classmethod
    def from_vector(cls, vector: npt.NDArray) -> "Twist":
        """Create from a 6-vector ordered (rho, phi)"""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (6,):
            raise ValueError(f"Twist vector must have 6 entries. Got {vector.shape}")
        return cls(rho=vector[:3].copy(), phi=vector[3:].copy())

    def vector(self) -> npt.NDArray:
        return np.concatenate([self.rho, self.phi])


class Intrinsics(Model):
    """Pinhole camera intrinsics. Pixel centres sit at integer + 0.5"""

    fx: PositiveFloat
    """Focal length in x (pixels)"""

    fy: PositiveFloat
    """Focal length in y (pixels)"""

    cx: float
    """Principal point x (pixels)"""

    cy: float
    """Principal point y (pixels)"""

    width: PositiveInt
    """Image width in pixels"""

    height: PositiveInt
    """Image height in pixels"""

    @model_validator(mode="after")  # type: ignore
    def principal_point_inside(self) -> "Intrinsics":
        if not 0 < self.cx < self.width:
            raise ValueError("cx must lie inside the image")
        if not 0 < self.cy < self.height:
            raise ValueError("cy must lie inside the image")
        return self

    @classmethod
    def from_fov(cls, width: int, height: int, fov_degrees: float) -> "Intrinsics":
        """Square pixels with the principal point at the image centre. The field of
        view is measured horizontally.
        """
        focal = 0.5 * width / tan(radians(fov_degrees) / 2)
        return cls(
            fx=focal, fy=focal, cx=width / 2, cy=height / 2, width=width, height=height
        )


class Ray(Model):
    """Camera ray for a single pixel"""

    origin: FloatArray1D  # type: ignore
    """Ray origin (scene units)"""

    direction: FloatArray1D  # type: ignore
    """Unit direction"""

    pixel: tuple[int, int]
    """(row, col) of the pixel the ray was generated for"""

    @model_validator(mode="after")  # type: ignore
    def direction_is_unit(self) -> "Ray":
        _check_shape(self.origin, (3,), "origin")
        _check_shape(self.direction, (3,), "direction")
        if abs(np.linalg.norm(self.direction) - 1) > 1e-9:
            raise ValueError("Ray direction must have unit norm")
        return self


class SamplingConfig(Model):
    """Sampling along camera rays for volume rendering"""

    t_near: NonNegativeFloat = 2.0
    """Near bound on the ray (scene units)"""

    t_far: PositiveFloat = 6.0
    """Far bound on the ray (scene units)"""

    n_samples: PositiveInt = 64
    """Number of samples per ray"""

    stratified: bool = True
    """Jitter samples uniformly inside their bin instead of using bin centres"""

    white_background: bool = False
    """Composite the remaining transmittance over white instead of black"""

    @model_validator(mode="after")  # type: ignore
    def check_bounds(self) -> "SamplingConfig":
        if self.t_near >= self.t_far:
            raise ValueError("t_near must be smaller than t_far")
        return self

    @property
    def bin_width(self) -> float:
        return (self.t_far - self.t_near) / self.n_samples


class RenderOutput(Model):
    """Result of rendering a single ray"""

    color: FloatArray1D  # type: ignore
    """Composited RGB colour"""

    weights: FloatArray1D  # type: ignore
    """Compositing weight per sample"""

    transmittance: float
    """Transmittance remaining after the last sample"""


class RadianceGrid(Model):
    """Dense voxel grid with raw density and spherical-harmonic colour per voxel.
    Arrays are indexed [x, y, z].
    """

    bbox_min: FloatArray1D  # type: ignore
    """Lower corner of the grid (scene units)"""

    bbox_max: FloatArray1D  # type: ignore
    """Upper corner of the grid (scene units)"""

    sh_degree: int = Field(ge=0, le=2)
    """Degree of the spherical-harmonic colour model"""

    density: FloatArray3D  # type: ignore
    """Raw (pre-softplus) density per voxel"""

    sh_coeffs: FloatArray5D  # type: ignore
    """Spherical-harmonic coefficients per voxel with shape (nx, ny, nz, K, 3)"""

    @model_validator(mode="after")  # type: ignore
    def check_layout(self) -> "RadianceGrid":
        _check_shape(self.bbox_min, (3,), "bbox_min")
        _check_shape(self.bbox_max, (3,), "bbox_max")
        if not np.all(self.bbox_min < self.bbox_max):
            raise ValueError("bbox_min must be smaller than bbox_max componentwise")
        if min(self.density.shape) < 2:
            raise ValueError("Grid needs at least two voxels per axis")
        _check_shape(
            self.sh_coeffs,
            (*self.density.shape, n_coefficients(self.sh_degree), 3),
            "sh_coeffs",
        )
        return self

    @property
    def resolution(self) -> tuple[int, int, int]:
        nx, ny, nz = self.density.shape
        return nx, ny, nz

    @property
    def n_coeffs(self) -> int:
        return n_coefficients(self.sh_degree)


class MaskStack(Model):
    """Binary modulation masks of a snapshot compressive imager"""

    masks: MaskArray3D  # type: ignore
    """Masks with shape (N, H, W), entries in {0, 1}"""

    seed: NonNegativeInt
    """Seed the masks were generated from"""

    target_or: float = Field(gt=0, le=1)
    """Configured overlapping rate"""

    @field_validator("masks")
    @classmethod
    def binary_entries(cls, v: npt.NDArray) -> npt.NDArray:
        if v.size and v.max() > 1:
            raise ValueError("Mask entries must be 0 or 1")
        return v

    @property
    def n_frames(self) -> int:
        return self.masks.shape[0]

    @property
    def height(self) -> int:
        return self.masks.shape[1]

    @property
    def width(self) -> int:
        return self.masks.shape[2]


class Measurement(Model):
    """Single compressed snapshot"""

    pixels: Float32Array3D  # type: ignore
    """Measured values with shape (H, W, C), C in {1, 3}"""

    noise_sigma: NonNegativeFloat = 0.0
    """Standard deviation of the additive noise used at formation"""

    @field_validator("pixels")
    @classmethod
    def valid_channels(cls, v: npt.NDArray) -> npt.NDArray:
        if v.shape[2] not in (1, 3):
            raise ValueError("Measurement needs 1 or 3 channels")
        return v

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


class TrainConfig(Model):
    """Hyperparameters of the joint scene and trajectory optimisation"""

    iterations: NonNegativeInt = 3000
    """Number of optimisation steps"""

    batch_rays: PositiveInt = 1024
    """Number of measurement pixels sampled per step"""

    lr_scene_start: PositiveFloat = 5e-2
    """Initial learning rate of the grid parameters"""

    lr_scene_end: PositiveFloat = 5e-3
    """Final learning rate of the grid parameters"""

    lr_pose_start: PositiveFloat = 1e-3
    """Initial learning rate of the trajectory twists"""

    lr_pose_end: PositiveFloat = 1e-5
    """Final learning rate of the trajectory twists"""

    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: PositiveFloat = 1e-8

    pose_init_trans_sigma: NonNegativeFloat = 0.01
    """Standard deviation of the initial endpoint translations"""

    seed: NonNegativeInt = 0
    """Seed for pose initialisation, ray sampling and jitter"""

    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    """Ray sampling used while training"""

    optimize_poses: bool = True
    """Optimise the trajectory endpoints jointly with the scene"""

    grid_resolution: PositiveInt = 32
    """Voxels per axis of the reconstructed grid"""

    bbox_min: Vector3 = (-1.5, -1.5, 2.5)
    """Lower corner of the reconstructed grid"""

    bbox_max: Vector3 = (1.5, 1.5, 5.5)
    """Upper corner of the reconstructed grid"""

    sh_degree: int = Field(default=0, ge=0, le=2)
    """Degree of the spherical-harmonic colour model"""

    tv_weight: NonNegativeFloat = 1e-4
    """Weight of the total-variation penalty on the grid density"""

    use_tv: bool = True
    """Disable to run without the total-variation penalty"""

    literal_interpolation: bool = False
    """Use s = i/N instead of s = (i-1)/(N-1) for the trajectory"""

    normalize_loss: bool = False
    """Divide measurement and rendered sums by the per-pixel mask count"""

    deterministic: bool = True
    """Reduce gradient buffers in a fixed order"""

    n_workers: PositiveInt = 1
    """Threads used for rendering chunks of rays"""

    chunk_size: PositiveInt = 1024
    """Rays per rendering chunk"""

    log_every: PositiveInt = 100
    """Log training progress every n iterations"""

    @model_validator(mode="after")  # type: ignore
    def check_schedules(self) -> "TrainConfig":
        if self.lr_scene_end > self.lr_scene_start:
            raise ValueError("lr_scene_end must not exceed lr_scene_start")
        if self.lr_pose_end > self.lr_pose_start:
            raise ValueError("lr_pose_end must not exceed lr_pose_start")
        if not all(lo < hi for lo, hi in zip(self.bbox_min, self.bbox_max)):
            raise ValueError("bbox_min must be smaller than bbox_max")
        return self

    @classmethod
    def full_scale_defaults(cls, **kwargs) -> "TrainConfig":
        """Schedule and batch size used for full-scale radiance-field training"""
        values = dict(
            iterations=200_000,
            batch_rays=5000,
            lr_scene_start=5e-4,
            lr_scene_end=5e-5,
            lr_pose_start=1e-3,
            lr_pose_end=1e-5,
            use_tv=False,
        )
        values.update(kwargs)
        return cls(**values)


class TrajectoryParams(Model):
    """Twists of the first and last camera pose of the exposure"""

    twist_start: Twist
    """Twist of the pose at the start of the exposure"""

    twist_end: Twist
    """Twist of the pose at the end of the exposure"""

    @classmethod
    def from_vector(cls, vector: npt.NDArray) -> "TrajectoryParams":
        vector = np.asarray(vector, dtype=np.float64)
        return cls(
            twist_start=Twist.from_vector(vector[:6]),
            twist_end=Twist.from_vector(vector[6:]),
        )

    def vector(self) -> npt.NDArray:
        """Stacked 12-vector (start, end)"""
        return np.concatenate([self.twist_start.vector(), self.twist_end.vector()])


class AdamState(Model):
    """Moments and step count of an Adam optimiser"""

    step: NonNegativeInt = 0
    first_moment: dict[str, FloatArray] = Field(default_factory=dict)  # type: ignore
    second_moment: dict[str, FloatArray] = Field(default_factory=dict)  # type: ignore


class GapTvConfig(Model):
    """Settings of the GAP-TV decoder"""

    outer_iterations: PositiveInt = 60
    """Projection/denoising rounds"""

    tv_iterations: PositiveInt = 20
    """Dual iterations of each TV denoising call"""

    tv_weight: PositiveFloat = 0.1
    """Initial TV weight"""

    tv_decay: float = Field(default=0.98, gt=0, le=1)
    """Factor applied to the TV weight after each outer iteration"""

    acceleration: bool = False
    """
    Use accelerated GAP (accumulate the measurement residual). The objective is
    only guaranteed to decrease monotonically without acceleration.
    """

    step_size: PositiveFloat = 1.0
    """Relaxation of the projection step"""


class ImagePair(Model):
    """Reference and candidate image for quality metrics. Values are clamped to
    [0, 1] on construction.

    :raises DimensionMismatchError: If the two images differ in shape
    """

    reference: FloatArray  # type: ignore
    """Ground truth image (H, W) or (H, W, C)"""

    candidate: FloatArray  # type: ignore
    """Image under evaluation"""

    @model_validator(mode="after")  # type: ignore
    def same_dims_and_clamp(self) -> "ImagePair":
        if self.reference.shape != self.candidate.shape:
            raise DimensionMismatchError(
                f"Image shapes differ: {self.reference.shape} vs "
                f"{self.candidate.shape}"
            )
        if self.reference.ndim not in (2, 3):
            raise DimensionMismatchError("Images must be HxW or HxWxC")
        self.reference = np.clip(self.reference, 0, 1)
        self.candidate = np.clip(self.candidate, 0, 1)
        return self


class Primitive(Model):
    """Analytic building block of a toy scene"""

    shape: Literal["sphere", "box"]
    """Ellipsoid (sphere) or axis aligned box"""

    center: Vector3
    """Centre (scene units)"""

    size: Vector3
    """Radii of the ellipsoid or half-extents of the box"""

    albedo: Vector3
    """RGB colour in [0, 1]"""

    density: PositiveFloat
    """Volume density inside the primitive"""

    texture: Literal["flat", "checker"] = "flat"
    """Checker textures alternate between albedo and half albedo"""

    texture_scale: PositiveFloat = 0.25
    """Edge length of a checker cell (scene units)"""

    @field_validator("albedo")
    @classmethod
    def albedo_in_range(cls, v: Vector3) -> Vector3:
        if any(c < 0 or c > 1 for c in v):
            raise ValueError("Albedo must lie in [0, 1]")
        return v

    @field_validator("size")
    @classmethod
    def positive_size(cls, v: Vector3) -> Vector3:
        if any(s <= 0 for s in v):
            raise ValueError("Primitive size must be positive")
        return v


class ToyScene(Model):
    """Procedural scene made of analytic primitives"""

    primitives: list[Primitive] = Field(default_factory=list)
    """Primitives; later primitives overwrite earlier ones where they overlap"""

    bbox_min: Vector3 = (-1.5, -1.5, 2.5)
    """Lower corner of the scene volume"""

    bbox_max: Vector3 = (1.5, 1.5, 5.5)
    """Upper corner of the scene volume"""

    background: Literal["black", "white"] = "black"
    """Colour behind the scene"""

    @model_validator(mode="after")  # type: ignore
    def primitives_inside(self) -> "ToyScene":
        lo = np.array(self.bbox_min)
        hi = np.array(self.bbox_max)
        if not np.all(lo < hi):
            raise ValueError("bbox_min must be smaller than bbox_max")
        for primitive in self.primitives:
            center = np.array(primitive.center)
            size = np.array(primitive.size)
            if np.any(center - size < lo) or np.any(center + size > hi):
                raise ValueError(f"Primitive at {primitive.center} exceeds the bbox")
        return self


class CameraConfig(Model):
    """Camera used for dataset generation and training"""

    width: PositiveInt = 64
    height: PositiveInt = 64
    fov_degrees: float = Field(default=40.0, gt=0, lt=180)

    def to_intrinsics(self) -> Intrinsics:
        return Intrinsics.from_fov(self.width, self.height, self.fov_degrees)


class DatasetConfig(Model):
    """Settings of a synthetic snapshot dataset"""

    preset: Literal["sparse", "cluster", "clutter"] = "cluster"
    """Toy scene preset"""

    n_frames: PositiveInt = 8
    """Compression ratio N"""

    overlap_rate: float = Field(default=0.25, gt=0, le=1)
    """Mask overlapping rate"""

    mask_mode: Literal["exact", "bernoulli"] = "exact"
    """Exact per-pixel counts or independent Bernoulli draws"""

    noise_sigma: NonNegativeFloat = 0.0
    """Standard deviation of the measurement noise"""

    seed: NonNegativeInt = 0
    """Seed of masks and noise"""

    grid_resolution: PositiveInt = 64
    """Voxels per axis of the baked ground-truth grid"""

    trajectory_translation: Vector3 = (0.2, 0.0, 0.0)
    """Translation of the last pose relative to the first"""

    trajectory_rotation: Vector3 = (0.0, 0.0, 0.0)
    """Rotation vector (radians) of the last pose relative to the first"""

    @model_validator(mode="after")  # type: ignore
    def integer_ones_count(self) -> "DatasetConfig":
        if self.mask_mode == "exact":
            ones = self.overlap_rate * self.n_frames
            if not isclose(ones, round(ones), abs_tol=1e-9):
                raise ValueError("overlap_rate * n_frames must be an integer")
        return self


class TrajectoryError(Model):
    """Endpoint errors of a recovered trajectory after aligning its start pose onto
    the ground truth"""

    translation_error: float
    """Distance between the aligned and the true end position (scene units)"""

    rotation_error_degrees: float
    """Angle of the relative rotation between aligned and true end pose"""

    relative_error: float
    """translation_error divided by the length of the true trajectory"""
