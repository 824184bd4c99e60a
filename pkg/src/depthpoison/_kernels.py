"""Hot numeric kernels with numba and pure-numpy backends.

Each kernel has a loop implementation (JIT-compiled when numba is
available) and a vectorized numpy implementation. Arithmetic in the two
paths is ordered identically, so results are bit-equal; the test suite
asserts this. Backend selection: env var DEPTHPOISON_NUMBA=0 forces the
numpy path, anything else (or unset) uses numba when importable.

Kernels here are the per-pixel inner loops that dominate runtime:
red-black Gauss-Seidel harmonic fill, diamond-square plasma (fog), and
Worley cellular distances (frost).
"""
from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("DEPTHPOISON_NUMBA", "auto").strip().lower()
_want_numba = _env not in ("0", "false", "off", "no", "numpy")

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

NUMBA_AVAILABLE = njit is not None
USE_NUMBA = _want_numba and NUMBA_AVAILABLE


def active_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# red-black Gauss-Seidel harmonic fill
#
# u: working values, w: 0/1 stencil weights (unknown or valid boundary),
# cnt: per-pixel usable-neighbor count (>= 1 for every region pixel),
# region: 0/1 unknowns, parity: global checkerboard offset of the crop.
# The kernel runs a fixed number of sweeps and reports the last sweep's
# max relative update; convergence control lives in harmonic_sweeps so
# both backends make identical stopping decisions.
# ---------------------------------------------------------------------------

def _harmonic_loop(u, w, cnt, region, parity, sweeps):
    h, wd = u.shape
    rel = 0.0
    for _ in range(sweeps):
        rel = 0.0
        for color in range(2):
            for i in range(h):
                for j in range(wd):
                    if region[i, j] == 0 or ((i + j + parity) & 1) != color:
                        continue
                    su = u[i - 1, j] * w[i - 1, j] if i > 0 else 0.0
                    sd = u[i + 1, j] * w[i + 1, j] if i + 1 < h else 0.0
                    sl = u[i, j - 1] * w[i, j - 1] if j > 0 else 0.0
                    sr = u[i, j + 1] * w[i, j + 1] if j + 1 < wd else 0.0
                    new = ((su + sd) + (sl + sr)) / cnt[i, j]
                    d = abs(new - u[i, j]) / max(abs(new), 1e-12)
                    if d > rel:
                        rel = d
                    u[i, j] = new
    return rel


def _harmonic_numpy(u, w, cnt, region, parity, sweeps):
    h, wd = u.shape
    up = np.zeros((h + 2, wd + 2))
    wp = np.zeros((h + 2, wd + 2))
    up[1:-1, 1:-1] = u
    wp[1:-1, 1:-1] = w
    inner = up[1:-1, 1:-1]
    yy, xx = np.indices((h, wd))
    colors = [
        region.astype(bool) & (((yy + xx + parity) & 1) == c) for c in range(2)
    ]
    rel = 0.0
    for _ in range(sweeps):
        rel = 0.0
        for m in colors:
            if not m.any():
                continue
            s = (up[:-2, 1:-1] * wp[:-2, 1:-1] + up[2:, 1:-1] * wp[2:, 1:-1]) + (
                up[1:-1, :-2] * wp[1:-1, :-2] + up[1:-1, 2:] * wp[1:-1, 2:]
            )
            new = s[m] / cnt[m]
            d = np.abs(new - inner[m]) / np.maximum(np.abs(new), 1e-12)
            if d.size:
                rel = max(rel, float(d.max()))
            inner[m] = new
    u[:, :] = inner
    return rel


# ---------------------------------------------------------------------------
# diamond-square plasma
#
# noise: (levels, 2, n, n) pre-drawn uniform(-1, 1); index 0 feeds the
# diamond step, index 1 the square step. amps: per-level amplitudes.
# Randomness is drawn outside the kernel so both backends consume the
# same values at the same grid positions.
# ---------------------------------------------------------------------------

def _diamond_square_loop(n, noise, amps):
    g = np.zeros((n, n))
    g[0, 0] = noise[0, 0, 0, 0]
    g[0, n - 1] = noise[0, 0, 0, n - 1]
    g[n - 1, 0] = noise[0, 0, n - 1, 0]
    g[n - 1, n - 1] = noise[0, 0, n - 1, n - 1]
    step = n - 1
    lvl = 0
    while step > 1:
        half = step // 2
        amp = amps[lvl]
        nd = noise[lvl, 0]
        ns = noise[lvl, 1]
        for i in range(0, n - 1, step):
            for j in range(0, n - 1, step):
                c = ((g[i, j] + g[i, j + step]) + (g[i + step, j] + g[i + step, j + step])) * 0.25
                g[i + half, j + half] = c + amp * nd[i + half, j + half]
        for i in range(0, n, half):
            odd_row = (i // half) & 1
            for j in range(0, n, half):
                if ((j // half) & 1) == odd_row:
                    continue
                su = g[i - half, j] if i >= half else 0.0
                sd = g[i + half, j] if i + half < n else 0.0
                sl = g[i, j - half] if j >= half else 0.0
                sr = g[i, j + half] if j + half < n else 0.0
                c = 4.0
                if i < half:
                    c -= 1.0
                if i + half >= n:
                    c -= 1.0
                if j < half:
                    c -= 1.0
                if j + half >= n:
                    c -= 1.0
                g[i, j] = ((su + sd) + (sl + sr)) / c + amp * ns[i, j]
        step = half
        lvl += 1
    return g


def _diamond_square_numpy(n, noise, amps):
    g = np.zeros((n, n))
    g[0, 0] = noise[0, 0, 0, 0]
    g[0, n - 1] = noise[0, 0, 0, n - 1]
    g[n - 1, 0] = noise[0, 0, n - 1, 0]
    g[n - 1, n - 1] = noise[0, 0, n - 1, n - 1]
    step = n - 1
    lvl = 0
    while step > 1:
        half = step // 2
        amp = amps[lvl]
        nd = noise[lvl, 0]
        ns = noise[lvl, 1]
        tl = g[0 : n - 1 : step, 0 : n - 1 : step]
        tr = g[0 : n - 1 : step, step::step]
        bl = g[step::step, 0 : n - 1 : step]
        br = g[step::step, step::step]
        g[half::step, half::step] = ((tl + tr) + (bl + br)) * 0.25 + amp * nd[half::step, half::step]

        # square points come in two interleaved lattices; neighbors at
        # distance `half` are corners/diamond centers, never other square
        # points of the same level, so simultaneous update is exact GS.
        for rows, cols, edge_rows in (
            (slice(0, n, step), slice(half, n, step), True),
            (slice(half, n, step), slice(0, n, step), False),
        ):
            nr = len(range(*rows.indices(n)))
            nc = len(range(*cols.indices(n)))
            su = np.zeros((nr, nc))
            sd = np.zeros((nr, nc))
            sl = np.zeros((nr, nc))
            sr = np.zeros((nr, nc))
            c = np.full((nr, nc), 4.0)
            if edge_rows:
                mid = g[half : n - half : step, half::step]
                su[1:] = mid
                sd[:-1] = mid
                sl[:, :] = g[rows, 0 : n - 1 : step]
                sr[:, :] = g[rows, step::step]
                c[0] -= 1.0
                c[-1] -= 1.0
            else:
                mid = g[half::step, half : n - half : step]
                sl[:, 1:] = mid
                sr[:, :-1] = mid
                su[:, :] = g[0 : n - 1 : step, cols]
                sd[:, :] = g[step::step, cols]
                c[:, 0] -= 1.0
                c[:, -1] -= 1.0
            g[rows, cols] = ((su + sd) + (sl + sr)) / c + amp * ns[rows, cols]
        step = half
        lvl += 1
    return g


# ---------------------------------------------------------------------------
# Worley cellular noise: squared distances to the two nearest feature
# points, visited in array order in both backends.
# ---------------------------------------------------------------------------

def _worley_loop(h, w, points):
    f1 = np.empty((h, w))
    f2 = np.empty((h, w))
    k = points.shape[0]
    for i in range(h):
        for j in range(w):
            b1 = np.inf
            b2 = np.inf
            for p in range(k):
                dy = i - points[p, 0]
                dx = j - points[p, 1]
                d = dy * dy + dx * dx
                if d < b1:
                    b2 = b1
                    b1 = d
                elif d < b2:
                    b2 = d
            f1[i, j] = b1
            f2[i, j] = b2
    return f1, f2


def _worley_numpy(h, w, points):
    yy = np.arange(h, dtype=np.float64)[:, None]
    xx = np.arange(w, dtype=np.float64)[None, :]
    f1 = np.full((h, w), np.inf)
    f2 = np.full((h, w), np.inf)
    for p in range(points.shape[0]):
        dy = yy - points[p, 0]
        dx = xx - points[p, 1]
        d = dy * dy + dx * dx
        closer = d < f1
        f2 = np.where(closer, f1, np.minimum(f2, d))
        f1 = np.where(closer, d, f1)
    return f1, f2


if NUMBA_AVAILABLE:
    _harmonic_jit = njit(cache=True)(_harmonic_loop)
    _diamond_square_jit = njit(cache=True)(_diamond_square_loop)
    _worley_jit = njit(cache=True)(_worley_loop)
else:  # pragma: no cover
    _harmonic_jit = _harmonic_loop
    _diamond_square_jit = _diamond_square_loop
    _worley_jit = _worley_loop


_SWEEP_CHUNK = 4


def harmonic_sweeps(u, w, cnt, region, parity, tol, max_iters):
    """Iterate red-black GS in place on ``u``; returns (sweeps, final rel).

    Runs until the max relative per-pixel update is below tol AND the
    projected remaining change is below tol/2. The projection uses the
    observed per-sweep contraction rho: the geometric tail after an
    update of size d is at most d * rho / (1 - rho), so stopping there
    keeps any later refinement (e.g. re-running at tol/2) within
    tol * value of the returned solution.
    """
    kernel = _harmonic_jit if USE_NUMBA else _harmonic_numpy
    tol = float(tol)
    max_iters = int(max_iters)
    done = 0
    rel = 0.0
    prev = -1.0
    while done < max_iters:
        k = min(_SWEEP_CHUNK, max_iters - done)
        rel = float(kernel(u, w, cnt, region, parity, k))
        done += k
        if rel == 0.0:
            break
        if rel < tol and prev > 0.0 and rel < prev:
            rho = min((rel / prev) ** (1.0 / k), 0.99)
            if rel * rho / (1.0 - rho) < 0.5 * tol:
                break
        prev = rel
    return done, rel


def diamond_square(n, noise, amps):
    if USE_NUMBA:
        return _diamond_square_jit(n, noise, amps)
    return _diamond_square_numpy(n, noise, amps)


def worley(h, w, points):
    if USE_NUMBA:
        return _worley_jit(h, w, points)
    return _worley_numpy(h, w, points)
