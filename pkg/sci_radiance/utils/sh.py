"""Real spherical harmonics up to degree 2 (graphics convention)"""
import numpy as np
import numpy.typing as npt

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)


def n_coefficients(degree: int) -> int:
    return (degree + 1) ** 2


def eval_sh_basis(degree: int, directions: npt.NDArray) -> npt.NDArray:
    """
    Evaluate the basis for unit directions.

    :param degree: 0, 1 or 2
    :param directions: (M, 3) unit vectors

    :return: (M, K) basis values with K = (degree + 1)**2
    """
    if degree not in (0, 1, 2):
        raise ValueError("Only SH degrees 0, 1 and 2 are supported")
    x, y, z = directions[:, 0], directions[:, 1], directions[:, 2]
    basis = [np.full(len(directions), SH_C0)]
    if degree >= 1:
        basis += [-SH_C1 * y, SH_C1 * z, -SH_C1 * x]
    if degree >= 2:
        basis += [
            SH_C2[0] * x * y,
            SH_C2[1] * y * z,
            SH_C2[2] * (2 * z * z - x * x - y * y),
            SH_C2[3] * x * z,
            SH_C2[4] * (x * x - y * y),
        ]
    return np.stack(basis, axis=1)


def eval_sh_basis_grad(degree: int, directions: npt.NDArray) -> npt.NDArray:
    """Derivative of every basis function with respect to (x, y, z), shape (M, K, 3)"""
    m = len(directions)
    x, y, z = directions[:, 0], directions[:, 1], directions[:, 2]
    zero = np.zeros(m)
    grads = [np.stack([zero, zero, zero], axis=1)]
    if degree >= 1:
        c1 = np.full(m, SH_C1)
        grads += [
            np.stack([zero, -c1, zero], axis=1),
            np.stack([zero, zero, c1], axis=1),
            np.stack([-c1, zero, zero], axis=1),
        ]
    if degree >= 2:
        grads += [
            SH_C2[0] * np.stack([y, x, zero], axis=1),
            SH_C2[1] * np.stack([zero, z, y], axis=1),
            SH_C2[2] * np.stack([-2 * x, -2 * y, 4 * z], axis=1),
            SH_C2[3] * np.stack([z, zero, x], axis=1),
            SH_C2[4] * np.stack([2 * x, -2 * y, zero], axis=1),
        ]
    return np.stack(grads, axis=1)
