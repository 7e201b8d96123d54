"""
Binary and text formats of the pipeline. All binary formats are little-endian and
start with a four byte magic.

- SCGR: radiance grid checkpoint
- SCMK: mask stack
- SCMS: measurement
- SCTF: generic float32 tensor (row-major)
- pose text: one pose per line, the twelve entries of the row-major 3x4 matrix
"""
import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np
import numpy.typing as npt
from PIL import Image

from sci_radiance.exceptions import FileFormatError
from sci_radiance.model import AdamState, MaskStack, Measurement, Pose, RadianceGrid
from sci_radiance.utils.sh import n_coefficients

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

GRID_MAGIC = b"SCGR"
MASK_MAGIC = b"SCMK"
MEASUREMENT_MAGIC = b"SCMS"
TENSOR_MAGIC = b"SCTF"
FORMAT_VERSION = 1
DTYPE_F32 = 1

_GRID_HEADER = struct.Struct("<4sI3I6dI")
_MASK_HEADER = struct.Struct("<4sI3IQf")
_MEASUREMENT_HEADER = struct.Struct("<4s3If")
_TENSOR_HEADER = struct.Struct("<4sII")


def _read_bytes(path: PathLike) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def _unpack_header(
    header: struct.Struct, data: bytes, magic: bytes, path: PathLike
) -> tuple:
    if len(data) < header.size:
        raise FileFormatError(f"{path} is too short for a {magic.decode()} header")
    values = header.unpack_from(data)
    if values[0] != magic:
        raise FileFormatError(
            f"{path} has magic {values[0]!r}, expected {magic.decode()}"
        )
    return values[1:]


def _payload(
    data: bytes, offset: int, count: int, dtype: str, path: PathLike
) -> npt.NDArray:
    itemsize = np.dtype(dtype).itemsize
    if len(data) != offset + count * itemsize:
        raise FileFormatError(
            f"{path} payload has {len(data) - offset} bytes, expected "
            f"{count * itemsize}"
        )
    return np.frombuffer(data, dtype=dtype, count=count, offset=offset)


def _check_version(version: int, path: PathLike) -> None:
    if version != FORMAT_VERSION:
        raise FileFormatError(f"{path} has unsupported version {version}")


def write_grid(path: PathLike, grid: RadianceGrid) -> None:
    nx, ny, nz = grid.resolution
    header = _GRID_HEADER.pack(
        GRID_MAGIC,
        FORMAT_VERSION,
        nx,
        ny,
        nz,
        *grid.bbox_min.tolist(),
        *grid.bbox_max.tolist(),
        grid.sh_degree,
    )
    density = grid.density.astype("<f4").ravel(order="F")
    sh = np.transpose(grid.sh_coeffs, (2, 1, 0, 3, 4)).astype("<f4").ravel()
    with open(path, "wb") as f:
        f.write(header)
        f.write(density.tobytes())
        f.write(sh.tobytes())
    logger.debug("Wrote %sx%sx%s grid to %s", nx, ny, nz, path)


def read_grid(path: PathLike) -> RadianceGrid:
    """
    Read a grid checkpoint.

    :raises FileFormatError: On bad magic, version or payload size
    """
    data = _read_bytes(path)
    values = _unpack_header(_GRID_HEADER, data, GRID_MAGIC, path)
    _check_version(values[0], path)
    nx, ny, nz = values[1:4]
    bbox = np.array(values[4:10], dtype=np.float64)
    sh_degree = values[10]
    n_coeffs = n_coefficients(sh_degree)
    n_voxels = nx * ny * nz
    payload = _payload(
        data, _GRID_HEADER.size, n_voxels * (1 + 3 * n_coeffs), "<f4", path
    )
    density = payload[:n_voxels].reshape((nx, ny, nz), order="F")
    sh = payload[n_voxels:].reshape(nz, ny, nx, n_coeffs, 3)
    return RadianceGrid(
        bbox_min=bbox[:3],
        bbox_max=bbox[3:],
        sh_degree=sh_degree,
        density=density.astype(np.float64),
        sh_coeffs=np.transpose(sh, (2, 1, 0, 3, 4)).astype(np.float64),
    )


def write_masks(path: PathLike, stack: MaskStack) -> None:
    header = _MASK_HEADER.pack(
        MASK_MAGIC,
        FORMAT_VERSION,
        stack.n_frames,
        stack.height,
        stack.width,
        stack.seed,
        stack.target_or,
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(stack.masks, dtype=np.uint8).tobytes())


def read_masks(path: PathLike) -> MaskStack:
    data = _read_bytes(path)
    version, n, h, w, seed, target_or = _unpack_header(
        _MASK_HEADER, data, MASK_MAGIC, path
    )
    _check_version(version, path)
    masks = _payload(data, _MASK_HEADER.size, n * h * w, "u1", path)
    return MaskStack(
        masks=masks.reshape(n, h, w).copy(),
        seed=seed,
        target_or=target_or,
    )


def write_measurement(path: PathLike, measurement: Measurement) -> None:
    header = _MEASUREMENT_HEADER.pack(
        MEASUREMENT_MAGIC,
        measurement.height,
        measurement.width,
        measurement.channels,
        measurement.noise_sigma,
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(measurement.pixels.astype("<f4").tobytes())


def read_measurement(path: PathLike) -> Measurement:
    data = _read_bytes(path)
    h, w, c, sigma = _unpack_header(
        _MEASUREMENT_HEADER, data, MEASUREMENT_MAGIC, path
    )
    pixels = _payload(data, _MEASUREMENT_HEADER.size, h * w * c, "<f4", path)
    return Measurement(
        pixels=pixels.reshape(h, w, c).astype(np.float32), noise_sigma=sigma
    )


def write_tensor(path: PathLike, array: npt.ArrayLike) -> None:
    """Write an array as float32 TensorFile (row-major)"""
    array = np.asarray(array)
    header = _TENSOR_HEADER.pack(TENSOR_MAGIC, FORMAT_VERSION, array.ndim)
    dims = struct.pack(f"<{array.ndim}I", *array.shape)
    with open(path, "wb") as f:
        f.write(header)
        f.write(dims)
        f.write(struct.pack("<I", DTYPE_F32))
        f.write(np.ascontiguousarray(array, dtype="<f4").tobytes())


def read_tensor(path: PathLike) -> npt.NDArray:
    """
    Read a TensorFile.

    :raises FileFormatError: On bad magic, version, dtype tag or payload size
    :return: float32 array with the stored dims
    """
    data = _read_bytes(path)
    version, rank = _unpack_header(_TENSOR_HEADER, data, TENSOR_MAGIC, path)
    _check_version(version, path)
    offset = _TENSOR_HEADER.size
    if len(data) < offset + 4 * (rank + 1):
        raise FileFormatError(f"{path} is too short for {rank} dims")
    dims = struct.unpack_from(f"<{rank}I", data, offset)
    offset += 4 * rank
    (dtype_tag,) = struct.unpack_from("<I", data, offset)
    if dtype_tag != DTYPE_F32:
        raise FileFormatError(f"{path} has unsupported dtype tag {dtype_tag}")
    count = int(np.prod(dims)) if rank else 1
    payload = _payload(data, offset + 4, count, "<f4", path)
    return payload.reshape(dims).astype(np.float32)


def write_poses(path: PathLike, poses: list[Pose]) -> None:
    with open(path, "w") as f:
        for pose in poses:
            values = pose.matrix()[:3].ravel()
            f.write(" ".join("%.17g" % v for v in values) + "\n")


def read_poses(path: PathLike) -> list[Pose]:
    """
    Read a pose text file.

    :raises FileFormatError: If a line does not hold 12 numbers
    """
    poses = []
    with open(path, "r") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                values = np.array([float(v) for v in line.split()])
            except ValueError as e:
                raise FileFormatError(f"{path}:{line_no}: {e}") from e
            if values.size != 12:
                raise FileFormatError(
                    f"{path}:{line_no}: expected 12 values, got {values.size}"
                )
            poses.append(Pose.from_matrix(values.reshape(3, 4)))
    return poses


def write_optimizer_state(
    path: PathLike, scene_state: AdamState, pose_state: AdamState
) -> None:
    arrays: dict[str, npt.NDArray] = {
        "scene.step": np.array(scene_state.step),
        "pose.step": np.array(pose_state.step),
    }
    for prefix, state in (("scene", scene_state), ("pose", pose_state)):
        for name, value in state.first_moment.items():
            arrays[f"{prefix}.m.{name}"] = value
        for name, value in state.second_moment.items():
            arrays[f"{prefix}.v.{name}"] = value
    np.savez(path, **arrays)


def read_optimizer_state(path: PathLike) -> tuple[AdamState, AdamState]:
    states = {}
    with np.load(path) as data:
        for prefix in ("scene", "pose"):
            key = f"{prefix}.step"
            if key not in data:
                raise FileFormatError(f"{path} has no {prefix} optimizer state")
            first, second = {}, {}
            for name in data.files:
                if name.startswith(f"{prefix}.m."):
                    first[name[len(prefix) + 3 :]] = data[name].astype(np.float64)
                elif name.startswith(f"{prefix}.v."):
                    second[name[len(prefix) + 3 :]] = data[name].astype(np.float64)
            states[prefix] = AdamState(
                step=int(data[key]), first_moment=first, second_moment=second
            )
    return states["scene"], states["pose"]


def to_uint8(image: npt.NDArray) -> npt.NDArray:
    return np.round(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8)


def save_png(path: PathLike, image: npt.NDArray) -> None:
    """Save an (H, W), (H, W, 1) or (H, W, 3) image in [0, 1] as 8-bit PNG"""
    image = np.asarray(image)
    if image.ndim == 3 and image.shape[2] == 1:
        image = image[..., 0]
    Image.fromarray(to_uint8(image)).save(path)


def save_png_sequence(
    directory: PathLike, frames: npt.NDArray, prefix: str = "frame"
) -> list[Path]:
    """Save every frame of an (N, H, W[, C]) stack as <prefix>_<i>.png (1-based)"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(frames, start=1):
        path = directory / f"{prefix}_{i:03d}.png"
        save_png(path, frame)
        paths.append(path)
    logger.info("Wrote %s PNG files to %s", len(paths), directory)
    return paths
