"""
Marching squares / cubes case probabilities and level-set entropy.

Corner ordering inside a cell is x-fastest: corner ``v = (dz*2 + dy)*2 + dx``
and bit ``v`` of a case index is set when that corner is positive (>= k).
Vertices are assumed independent, so a case probability is the product of
the corners' sign probabilities. The 16/256-entry case distribution is built
by doubling: start from ``[1]`` and, per corner, split every entry into
``(1 - p, p)`` halves.
"""
from __future__ import annotations

import json
import logging
import math
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
from numba import njit, prange

from .ensemble import EnsembleError, EnsembleField, GridDims
from .models import ModelField, ModelKind, fit_model

log = logging.getLogger(__name__)

THREADS_ENV = "ISENTROPY_THREADS"

if "NUMBA_THREADING_LAYER" not in os.environ:
    # skip the TBB probe; older system TBB builds only produce a warning
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _expand(p, n, buf):
    buf[0] = 1.0
    size = 1
    for v in range(n):
        pv = p[v]
        qv = 1.0 - pv
        for i in range(size):
            x = buf[i]
            buf[i + size] = x * pv
            buf[i] = x * qv
        size *= 2


@njit(cache=True, inline="always")
def _entropy_of(buf, size):
    h = 0.0
    for c in range(size):
        x = buf[c]
        if x > 0.0:
            h -= x * math.log2(x)
    return h


@njit(cache=True)
def _case_distribution(p):
    n = p.shape[0]
    buf = np.empty(1 << n)
    _expand(p, n, buf)
    return buf


@njit(cache=True)
def _entropy_1d(probs):
    return _entropy_of(probs, probs.shape[0])


@njit(parallel=True, cache=True)
def _entropy_2d(dp, out):
    ny, nx = dp.shape
    for j in prange(ny - 1):
        p = np.empty(4)
        buf = np.empty(16)
        for i in range(nx - 1):
            p[0] = dp[j, i]
            p[1] = dp[j, i + 1]
            p[2] = dp[j + 1, i]
            p[3] = dp[j + 1, i + 1]
            _expand(p, 4, buf)
            out[j, i] = _entropy_of(buf, 16)


@njit(parallel=True, cache=True)
def _entropy_3d(dp, out):
    nz, ny, nx = dp.shape
    ncol = (nz - 1) * (ny - 1)
    for r in prange(ncol):
        k = r // (ny - 1)
        j = r - k * (ny - 1)
        p = np.empty(8)
        buf = np.empty(256)
        for i in range(nx - 1):
            p[0] = dp[k, j, i]
            p[1] = dp[k, j, i + 1]
            p[2] = dp[k, j + 1, i]
            p[3] = dp[k, j + 1, i + 1]
            p[4] = dp[k + 1, j, i]
            p[5] = dp[k + 1, j, i + 1]
            p[6] = dp[k + 1, j + 1, i]
            p[7] = dp[k + 1, j + 1, i + 1]
            _expand(p, 8, buf)
            out[k, j, i] = _entropy_of(buf, 256)


@njit(parallel=True, cache=True)
def _cases_3d(dp, out):
    nz, ny, nx = dp.shape
    ncell_x = nx - 1
    ncell_y = ny - 1
    for r in prange((nz - 1) * ncell_y):
        k = r // ncell_y
        j = r - k * ncell_y
        p = np.empty(8)
        for i in range(ncell_x):
            p[0] = dp[k, j, i]
            p[1] = dp[k, j, i + 1]
            p[2] = dp[k, j + 1, i]
            p[3] = dp[k, j + 1, i + 1]
            p[4] = dp[k + 1, j, i]
            p[5] = dp[k + 1, j, i + 1]
            p[6] = dp[k + 1, j + 1, i]
            p[7] = dp[k + 1, j + 1, i + 1]
            _expand(p, 8, out[r * ncell_x + i])


@njit(parallel=True, cache=True)
def _cases_2d(dp, out):
    ny, nx = dp.shape
    ncell_x = nx - 1
    for j in prange(ny - 1):
        p = np.empty(4)
        for i in range(ncell_x):
            p[0] = dp[j, i]
            p[1] = dp[j, i + 1]
            p[2] = dp[j + 1, i]
            p[3] = dp[j + 1, i + 1]
            _expand(p, 4, out[j * ncell_x + i])


# ---------------------------------------------------------------------------
# Thread control
# ---------------------------------------------------------------------------

def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit value, else ``$ISENTROPY_THREADS``, else all cores.

    0 means automatic. The result is capped at the size of numba's pool.
    """
    if threads is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        threads = int(env) if env else 0
    if threads < 0:
        raise ValueError("thread count must be >= 0")
    pool = numba.config.NUMBA_NUM_THREADS
    if threads == 0:
        return pool
    if threads > pool:
        log.info("requested %d threads, numba pool has %d", threads, pool)
    return min(threads, pool)


@contextmanager
def thread_limit(threads: int | None):
    n = resolve_threads(threads)
    prev = numba.get_num_threads()
    numba.set_num_threads(n)
    try:
        yield n
    finally:
        numba.set_num_threads(prev)


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def _check_probs(p):
    p = np.ascontiguousarray(p, dtype=np.float64)
    if not np.all((p >= 0.0) & (p <= 1.0)):
        raise ValueError("sign probabilities must lie in [0, 1]")
    return p


def cell_case_distribution(dplus) -> np.ndarray:
    """Case probabilities of one cell from its 4 or 8 corner ``Pr(D >= k)`` values."""
    p = _check_probs(dplus).ravel()
    if p.size not in (4, 8):
        raise ValueError(f"a cell has 4 (2D) or 8 (3D) corners, got {p.size}")
    return _case_distribution(p)


def cell_entropy(probs) -> float:
    """Shannon entropy in bits, with 0 log 0 taken as 0."""
    return float(_entropy_1d(np.ascontiguousarray(probs, dtype=np.float64)))


@dataclass(frozen=True, eq=False)
class EntropyField:
    """Per-cell level-set entropy for one isovalue.

    ``dims`` is the vertex grid; ``cell_entropy`` has shape ``dims.cell_shape``.
    """

    dims: GridDims
    cell_entropy: np.ndarray = field(repr=False)
    isovalue: float
    kind: ModelKind | None = None
    total_entropy: float = field(init=False)
    entropy_seconds: float = 0.0

    def __post_init__(self):
        e = np.asarray(self.cell_entropy, dtype=np.float64).reshape(self.dims.cell_shape)
        e.flags.writeable = False
        object.__setattr__(self, "cell_entropy", e)
        object.__setattr__(self, "total_entropy", math.fsum(e.ravel().tolist()))

    @property
    def max_bits(self) -> float:
        return 4.0 if self.dims.is_2d else 8.0


def vertex_dplus(models: ModelField, k: float) -> np.ndarray:
    """Sign probabilities for every vertex, shaped ``(nz, ny, nx)``."""
    dp = models.prob_above(k).reshape(models.dims.shape)
    return _check_probs(dp)


def entropy_from_dplus(dplus: np.ndarray, threads: int | None = None) -> np.ndarray:
    """Per-cell entropy for a ``(nz, ny, nx)`` field of vertex sign probabilities."""
    dp = _check_probs(dplus)
    if dp.ndim == 2:
        dp = dp[None]
    with thread_limit(threads):
        if dp.shape[0] == 1:
            out = np.empty((dp.shape[1] - 1, dp.shape[2] - 1))
            _entropy_2d(dp[0], out)
        else:
            out = np.empty(tuple(n - 1 for n in dp.shape))
            _entropy_3d(dp, out)
    return out


def case_distributions(models: ModelField, k: float, threads: int | None = None) -> np.ndarray:
    """All cells' case distributions, shape ``(n_cells, 16 or 256)``, cells x-fastest."""
    dp = vertex_dplus(models, k)
    dims = models.dims
    with thread_limit(threads):
        if dims.is_2d:
            out = np.empty((dims.n_cells, 16))
            _cases_2d(dp[0], out)
        else:
            out = np.empty((dims.n_cells, 256))
            _cases_3d(dp, out)
    return out


def entropy_field(models: ModelField, k: float, threads: int | None = None) -> EntropyField:
    if models.dims.n_cells < 1:
        raise EnsembleError("grid has no cells")
    t0 = time.perf_counter()
    cells = entropy_from_dplus(vertex_dplus(models, k), threads)
    ef = EntropyField(models.dims, cells, float(k), models.kind)
    object.__setattr__(ef, "entropy_seconds", time.perf_counter() - t0)
    return ef


def entropy_field_sweep(ensemble: EnsembleField, kind: ModelKind, isovalues,
                        threads: int | None = None) -> list[EntropyField]:
    """Fit ``kind`` once and evaluate the entropy field at each isovalue in order."""
    isovalues = [float(k) for k in isovalues]
    if not isovalues:
        raise ValueError("need at least one isovalue")
    models = fit_model(ensemble, kind)
    return [entropy_field(models, k, threads) for k in isovalues]


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_entropy_field(ef: EntropyField, path) -> Path:
    """Raw little-endian float32 cells (x-fastest) plus ``<path>.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    ef.cell_entropy.astype("<f4").tofile(tmp)
    os.replace(tmp, path)
    cell_dims = list(reversed(ef.cell_entropy.shape))
    meta = {
        "dims": ef.dims.as_list(),
        "cell_dims": cell_dims,
        "isovalue": repr(ef.isovalue),
        "model": ef.kind.label if ef.kind is not None else None,
        "total_entropy_bits": repr(ef.total_entropy),
        "dtype": "f32",
        "order": "x-fastest",
        "data": path.name,
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return path


def load_entropy_field(path) -> EntropyField:
    """Read a field written by :func:`write_entropy_field` (values at float32 precision)."""
    path = Path(path)
    if path.suffix == ".json":
        side = path
        meta = json.loads(side.read_text(encoding="utf-8"))
        path = side.parent / meta["data"]
    else:
        side = sidecar_path(path)
        if not side.is_file():
            raise EnsembleError(f"entropy sidecar not found: {side}")
        meta = json.loads(side.read_text(encoding="utf-8"))
    dims = GridDims(*meta["dims"])
    raw = np.fromfile(path, dtype="<f4").astype(np.float64)
    if raw.size != dims.n_cells:
        raise EnsembleError(f"{path} holds {raw.size} cells, expected {dims.n_cells}")
    kind = ModelKind.parse(meta["model"]) if meta.get("model") else None
    return EntropyField(dims, raw, float(meta["isovalue"]), kind)
