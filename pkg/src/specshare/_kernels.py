"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The backend is picked once at import time from the ``SPECSHARE_NUMBA``
environment variable: ``1`` forces numba (raises if unavailable), ``0``
forces the numpy path, anything else (default ``auto``) tries numba and
falls back silently. Both implementations stay importable so
``benchmarks/bench_kernels.py`` can time them side by side.

Kernels here are the inner loops everything else sits on: the
principal-branch Lambert W, the water-level bisection of the per-BS
bandwidth allocation, and the per-terminal bandwidth minimizer used by
the dual ascent.
"""

import math
import os

import numpy as np

INV_E = math.exp(-1.0)
LN2 = math.log(2.0)

# z within this distance above -1/e collapses to the branch value -1,
# avoiding catastrophic cancellation in the series.
_BRANCH_WINDOW = 1e-12
_HALLEY_TOL = 1e-16
_HALLEY_MAX = 50


def _lw0_init(z):
    # First-order branch-point series below ~1.13, log-log asymptote above.
    if z < 1.13:
        return math.sqrt(2.0 * math.e * z + 2.0) - 1.0
    l1 = math.log(z)
    return l1 - math.log(l1)


def _lw0_scalar_py(z):
    if z < -INV_E:
        raise ValueError("lambert_w0: argument below -1/e")
    if z == 0.0:
        return 0.0
    if z + INV_E <= _BRANCH_WINDOW:
        return -1.0
    w = _lw0_init(z)
    pdw = math.inf
    for _ in range(_HALLEY_MAX):
        ew = math.exp(w)
        f = w * ew - z
        w1 = w + 1.0
        dw = f / (ew * w1 - (w + 2.0) * f / (2.0 * w1))
        w -= dw
        adw = abs(dw)
        if adw <= _HALLEY_TOL * (2.0 + abs(w)):
            break
        if adw >= pdw and adw < 1e-8 * (2.0 + abs(w)):
            break  # rounding plateau near the branch point
        pdw = adw
    return w


def _lw0_arr_np(z):
    z = np.asarray(z, dtype=np.float64)
    if np.any(z < -INV_E):
        raise ValueError("lambert_w0: argument below -1/e")
    w = np.where(z < 1.13, np.sqrt(np.maximum(2.0 * math.e * z + 2.0, 0.0)) - 1.0, 0.0)
    big = z >= 1.13
    if np.any(big):
        l1 = np.log(z[big])
        w[big] = l1 - np.log(l1)
    active = ~((z == 0.0) | (z + INV_E <= _BRANCH_WINDOW))
    for _ in range(_HALLEY_MAX):
        if not np.any(active):
            break
        wa = w[active]
        za = z[active]
        ew = np.exp(wa)
        f = wa * ew - za
        w1 = wa + 1.0
        dw = f / (ew * w1 - (wa + 2.0) * f / (2.0 * w1))
        wa -= dw
        w[active] = wa
        still = np.abs(dw) > _HALLEY_TOL * (2.0 + np.abs(wa))
        idx = np.flatnonzero(active)
        active[idx[~still]] = False
    w[z == 0.0] = 0.0
    w[(z + INV_E <= _BRANCH_WINDOW) & (z >= -INV_E)] = -1.0
    return w


def _bw_at_level_py(nu, r, g, n0):
    # b solving the per-terminal stationarity at water level nu.
    x = (nu * g / n0 - 1.0) * INV_E
    return LN2 * r / (_lw0_scalar_py(x) + 1.0)


def _nu_for_target_py(r, g, n0, b_target):
    # Exact inverse of the bandwidth map: the nu at which b(nu) = b_target.
    y = LN2 * r / b_target - 1.0
    x = y * math.exp(y)
    return (math.e * x + 1.0) * n0 / g


def _water_level_np(r, g, n0, w_eff, rtol=1e-14, max_iter=200):
    k = r.shape[0]

    def sum_b(nu):
        x = (nu * g / n0 - 1.0) * INV_E
        return float(np.sum(LN2 * r / (_lw0_arr_np(x) + 1.0)))

    lo = math.inf
    hi = 0.0
    for i in range(k):
        lo = min(lo, _nu_for_target_py(r[i], g[i], n0, w_eff))
        hi = max(hi, _nu_for_target_py(r[i], g[i], n0, w_eff / k))
    lo = max(lo, 1e-300)
    while sum_b(lo) < w_eff:
        lo *= 0.5
    while sum_b(hi) > w_eff:
        hi *= 2.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        s = sum_b(mid)
        if s >= w_eff:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi or abs(s - w_eff) <= 1e-13 * w_eff:
            break
    nu = 0.5 * (lo + hi)
    x = (nu * g / n0 - 1.0) * INV_E
    b = LN2 * r / (_lw0_arr_np(x) + 1.0)
    return nu, b


# Smallest Lambert argument used when bandwidth prices collapse toward
# zero: keeps W(x) + 1 >= ~4.5e-5, i.e. bandwidths large but finite.
_X_FLOOR = (1e-9 - 1.0) * INV_E


def _dual_bandwidths_np(lam, mu, r, g, n0):
    # Minimizer of lam*b + mu*p(b) per terminal; the argument is floored
    # to stay strictly above the branch point (lam -> 0 means b -> inf).
    x = np.maximum((lam * g / (mu * n0) - 1.0) * INV_E, _X_FLOOR)
    return LN2 * r / (_lw0_arr_np(x) + 1.0)


def _powers_np(b, r, g, n0):
    return b * n0 / g * (np.exp2(r / b) - 1.0)


# ---------------------------------------------------------------------------
# backend selection

def _build_numba():
    from numba import njit

    lw0_init = njit(cache=True)(_lw0_init)

    @njit(cache=True)
    def lw0_scalar(z):
        if z < -INV_E:
            raise ValueError("lambert_w0: argument below -1/e")
        if z == 0.0:
            return 0.0
        if z + INV_E <= _BRANCH_WINDOW:
            return -1.0
        w = lw0_init(z)
        pdw = math.inf
        for _ in range(_HALLEY_MAX):
            ew = math.exp(w)
            f = w * ew - z
            w1 = w + 1.0
            dw = f / (ew * w1 - (w + 2.0) * f / (2.0 * w1))
            w -= dw
            adw = abs(dw)
            if adw <= _HALLEY_TOL * (2.0 + abs(w)):
                break
            if adw >= pdw and adw < 1e-8 * (2.0 + abs(w)):
                break
            pdw = adw
        return w

    @njit(cache=True)
    def lw0_arr(z):
        out = np.empty(z.shape[0], dtype=np.float64)
        for i in range(z.shape[0]):
            out[i] = lw0_scalar(z[i])
        return out

    @njit(cache=True)
    def sum_b(nu, r, g, n0):
        total = 0.0
        for i in range(r.shape[0]):
            x = (nu * g[i] / n0 - 1.0) * INV_E
            total += LN2 * r[i] / (lw0_scalar(x) + 1.0)
        return total

    @njit(cache=True)
    def water_level(r, g, n0, w_eff, rtol, max_iter):
        k = r.shape[0]
        lo = math.inf
        hi = 0.0
        for i in range(k):
            y = LN2 * r[i] / w_eff - 1.0
            x = y * math.exp(y)
            lo = min(lo, (math.e * x + 1.0) * n0 / g[i])
            y = LN2 * r[i] * k / w_eff - 1.0
            x = y * math.exp(y)
            hi = max(hi, (math.e * x + 1.0) * n0 / g[i])
        lo = max(lo, 1e-300)
        while sum_b(lo, r, g, n0) < w_eff:
            lo *= 0.5
        while sum_b(hi, r, g, n0) > w_eff:
            hi *= 2.0
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            s = sum_b(mid, r, g, n0)
            if s >= w_eff:
                lo = mid
            else:
                hi = mid
            if hi - lo <= rtol * hi or abs(s - w_eff) <= 1e-13 * w_eff:
                break
        nu = 0.5 * (lo + hi)
        b = np.empty(k, dtype=np.float64)
        for i in range(k):
            x = (nu * g[i] / n0 - 1.0) * INV_E
            b[i] = LN2 * r[i] / (lw0_scalar(x) + 1.0)
        return nu, b

    @njit(cache=True)
    def dual_bandwidths(lam, mu, r, g, n0):
        out = np.empty(r.shape[0], dtype=np.float64)
        for i in range(r.shape[0]):
            x = max((lam * g[i] / (mu * n0) - 1.0) * INV_E, _X_FLOOR)
            out[i] = LN2 * r[i] / (lw0_scalar(x) + 1.0)
        return out

    return lw0_arr, water_level, dual_bandwidths


def _water_level_np_wrap(r, g, n0, w_eff, rtol=1e-14, max_iter=200):
    return _water_level_np(r, g, n0, w_eff, rtol, max_iter)


_env = os.environ.get("SPECSHARE_NUMBA", "auto").strip().lower()
if _env in ("0", "false", "no", "numpy"):
    BACKEND = "numpy"
elif _env in ("1", "true", "yes", "numba"):
    _nb = _build_numba()
    BACKEND = "numba"
else:
    try:
        _nb = _build_numba()
        BACKEND = "numba"
    except ImportError:
        BACKEND = "numpy"

if BACKEND == "numba":
    _lw0_arr_backend, _water_level_backend, dual_bandwidths = _nb
else:
    _lw0_arr_backend = _lw0_arr_np
    _water_level_backend = _water_level_np
    dual_bandwidths = _dual_bandwidths_np


def lambert_w0_arr(z):
    z = np.ascontiguousarray(z, dtype=np.float64)
    return _lw0_arr_backend(z)


def water_level(r, g, n0, w_eff, rtol=1e-14, max_iter=200):
    r = np.ascontiguousarray(r, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    return _water_level_backend(r, g, n0, w_eff, rtol, max_iter)
