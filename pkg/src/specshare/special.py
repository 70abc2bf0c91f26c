"""Principal-branch Lambert W and the bandwidth map built on it."""

import numpy as np

from . import _kernels
from ._kernels import INV_E, LN2


def lambert_w0(z):
    """Principal branch of the Lambert W function.

    Solves w * exp(w) = z for w >= -1. Accepts a scalar or array;
    defined for z >= -1/e, raises ValueError below the branch point.
    The residual |w*exp(w) - z| stays within 1e-12 * max(1, |z|).
    """
    if np.ndim(z) == 0:
        return _kernels._lw0_scalar_py(float(z))
    z = np.asarray(z, dtype=np.float64)
    out = _kernels.lambert_w0_arr(z.ravel())
    return out.reshape(z.shape)


def bandwidth_at_waterlevel(nu, r, g, n0):
    """Bandwidth that a terminal takes at water level ``nu``.

    Evaluates ln2 * r / (W((1/e) * (nu*g/n0 - 1)) + 1), the unique
    positive stationary point of the per-terminal power cost when the
    marginal bandwidth value equals ``nu``. Strictly decreasing in
    ``nu``, diverging as nu -> 0+ and vanishing as nu -> inf.
    """
    if nu <= 0.0:
        raise ValueError("bandwidth_at_waterlevel: water level must be > 0")
    if r <= 0.0 or g <= 0.0 or n0 <= 0.0:
        raise ValueError("bandwidth_at_waterlevel: r, g, n0 must be > 0")
    x = (nu * g / n0 - 1.0) * INV_E
    assert x >= -INV_E  # guaranteed for nu >= 0
    w = lambert_w0(x)
    if w == -1.0:  # below fp resolution of the branch point
        return float("inf")
    return LN2 * r / (w + 1.0)
