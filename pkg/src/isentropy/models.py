"""
Per-vertex distribution models fitted to ensemble samples.

Every model is stored as a flat parameter vector whose length equals its
storage cost, so a fitted field is a single ``(n_vertices, cost)`` array:

==========  ==================================  ============
kind        payload                              cost
==========  ==================================  ============
full        sorted samples x_(1) .. x_(M)        M
uniform     min, max                             2
gaussian    mean, standard deviation             2
histogram   lo, hi, mass_0 .. mass_{B-1}          B + 2
quantile    q_0 .. q_B (q_0 = min, q_B = max)    B + 1
==========  ==================================  ============

All sign-probability queries return ``Pr(D >= k)``; the negative-sign
probability is always ``1 - Pr(D >= k)``.
"""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ensemble import EnsembleError, EnsembleField, GridDims
from .normal import norm_sf

KINDS = ("full", "uniform", "gaussian", "histogram", "quantile")
_ALIASES = {"full": "full", "fullempirical": "full", "empirical": "full",
            "uniform": "uniform", "gaussian": "gaussian", "normal": "gaussian",
            "histogram": "histogram", "hist": "histogram", "quantile": "quantile"}

# vertices per chunk times payload width stays below this in prob_above
_CHUNK_ELEMS = 1 << 22


class ModelError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class ModelKind:
    name: str
    bins: int | None = None

    def __post_init__(self):
        if self.name not in KINDS:
            raise ModelError(f"unknown model kind {self.name!r}")
        if self.name in ("histogram", "quantile"):
            if self.bins is None or int(self.bins) < 1:
                raise ModelError(f"{self.name} needs a bin count >= 1")
            object.__setattr__(self, "bins", int(self.bins))
        elif self.bins is not None:
            raise ModelError(f"{self.name} takes no bin count")

    @classmethod
    def parse(cls, text: str) -> "ModelKind":
        """Parse ``uniform``, ``gaussian``, ``full``, ``histogram:B`` or ``quantile:B``."""
        name, _, b = text.strip().partition(":")
        key = _ALIASES.get(name.strip().lower())
        if key is None:
            raise ModelError(f"unknown model kind {text!r}")
        if b:
            try:
                bins = int(b)
            except ValueError:
                raise ModelError(f"bad bin count in {text!r}") from None
            return cls(key, bins)
        return cls(key)

    @property
    def label(self) -> str:
        return f"{self.name}:{self.bins}" if self.bins is not None else self.name

    def __str__(self):
        return self.label


FULL = ModelKind("full")
UNIFORM = ModelKind("uniform")
GAUSSIAN = ModelKind("gaussian")


def histogram(bins: int) -> ModelKind:
    return ModelKind("histogram", bins)


def quantile(bins: int) -> ModelKind:
    return ModelKind("quantile", bins)


def storage_cost(kind: ModelKind, n_members: int) -> int:
    """Stored values per vertex for ``kind`` fitted to ``n_members`` samples."""
    if n_members < 2:
        raise ModelError("storage cost is defined for M >= 2")
    if kind.name == "full":
        return n_members
    if kind.name in ("uniform", "gaussian"):
        return 2
    if kind.name == "histogram":
        return kind.bins + 2
    return kind.bins + 1


@dataclass(frozen=True, eq=False)
class VertexModel:
    """One vertex's fitted distribution; ``params`` layout as in the module table."""

    kind: ModelKind
    params: np.ndarray

    def __post_init__(self):
        p = np.array(self.params, dtype=np.float64).ravel()
        p.flags.writeable = False
        object.__setattr__(self, "params", p)

    def prob_above(self, k: float) -> float:
        return float(prob_above(self.kind, self.params[None, :], k)[0])

    def prob_below(self, k: float) -> float:
        return 1.0 - self.prob_above(k)


def sign_prob_above(model: VertexModel, k: float) -> float:
    return model.prob_above(k)


@dataclass(frozen=True, eq=False)
class ModelField:
    dims: GridDims
    kind: ModelKind
    params: np.ndarray = field(repr=False)
    n_members: int
    fit_seconds: float = 0.0

    def __post_init__(self):
        p = np.ascontiguousarray(self.params, dtype=np.float64)
        if p.shape != (self.dims.n_vertices, storage_cost(self.kind, self.n_members)):
            raise ModelError(f"parameter array shape {p.shape} does not match {self.kind} "
                             f"on {self.dims.n_vertices} vertices")
        p.flags.writeable = False
        object.__setattr__(self, "params", p)

    @property
    def storage_cost(self) -> int:
        return self.params.shape[1]

    def vertex(self, index: int) -> VertexModel:
        return VertexModel(self.kind, self.params[index])

    def prob_above(self, k: float) -> np.ndarray:
        """``Pr(D >= k)`` for every vertex, in x-fastest order."""
        return prob_above(self.kind, self.params, k)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def _quantile_breakpoints(s: np.ndarray, bins: int) -> np.ndarray:
    """Inverse empirical CDF at levels i/B, averaging at its jumps.

    Level p maps to x_(ceil(pM)) (1-based order statistics), or to the mean of
    x_(pM) and x_(pM+1) when pM is an integer; level 0 is the sample minimum
    and level 1 the maximum. Integer arithmetic keeps the jump test exact.
    """
    m = s.shape[1]
    num = np.arange(bins + 1) * m
    exact = num % bins == 0
    rank = np.where(exact, num // bins, -(-num // bins))
    lo = np.clip(rank - 1, 0, m - 1)
    hi = np.clip(rank, 0, m - 1)
    q = np.where(exact, 0.5 * (s[:, lo] + s[:, hi]), s[:, lo])
    q[:, 0] = s[:, 0]
    q[:, -1] = s[:, -1]
    return np.maximum.accumulate(q, axis=1)


def _histogram_payload(s: np.ndarray, bins: int) -> np.ndarray:
    n, m = s.shape
    lo, hi = s[:, 0], s[:, -1]
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    idx = np.floor((s - lo[:, None]) / safe[:, None] * bins).astype(np.intp)
    np.clip(idx, 0, bins - 1, out=idx)
    flat = idx + (np.arange(n) * bins)[:, None]
    counts = np.bincount(flat.ravel(), minlength=n * bins).reshape(n, bins)
    out = np.empty((n, bins + 2))
    out[:, 0] = lo
    out[:, 1] = hi
    out[:, 2:] = counts / m
    return out


def fit_samples(samples: np.ndarray, kind: ModelKind, ddof: int = 1) -> np.ndarray:
    """Fit ``kind`` to each row of an ``(n_vertices, M)`` sample array.

    ``ddof`` sets the Gaussian standard-deviation divisor ``M - ddof``.
    """
    s = np.sort(np.asarray(samples, dtype=np.float64), axis=1)
    if kind.name == "full":
        return s
    if kind.name == "uniform":
        return np.stack([s[:, 0], s[:, -1]], axis=1)
    if kind.name == "gaussian":
        flat = s[:, 0] == s[:, -1]
        mu = np.where(flat, s[:, 0], s.mean(axis=1))
        sigma = np.where(flat, 0.0, s.std(axis=1, ddof=ddof))
        return np.stack([mu, sigma], axis=1)
    if kind.name == "histogram":
        return _histogram_payload(s, kind.bins)
    return _quantile_breakpoints(s, kind.bins)


def fit_model(ensemble: EnsembleField, kind: ModelKind, ddof: int = 1) -> ModelField:
    t0 = time.perf_counter()
    params = fit_samples(ensemble.samples(), kind, ddof=ddof)
    elapsed = time.perf_counter() - t0
    return ModelField(ensemble.dims, kind, params, ensemble.n_members, elapsed)


# ---------------------------------------------------------------------------
# Sign probabilities
# ---------------------------------------------------------------------------

def _above_full(p, k):
    return np.count_nonzero(p >= k, axis=1) / p.shape[1]


def _above_uniform(p, k):
    lo, hi = p[:, 0], p[:, 1]
    span = hi - lo
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inner = (hi - k) / span
    return np.where(k <= lo, 1.0, np.where(k >= hi, 0.0, inner))


def _above_gaussian(p, k):
    mu, sigma = p[:, 0], p[:, 1]
    flat = sigma <= 0
    z = (k - mu) / np.where(flat, 1.0, sigma)
    return np.where(flat, (k <= mu).astype(np.float64), norm_sf(z))


def _above_histogram(p, k):
    lo, hi, mass = p[:, 0], p[:, 1], p[:, 2:]
    n, bins = mass.shape
    tail = np.zeros((n, bins + 1))
    tail[:, :bins] = np.cumsum(mass[:, ::-1], axis=1)[:, ::-1]
    span = hi - lo
    inside = (k > lo) & (k < hi)
    safe = np.where(span > 0, span, 1.0)
    j = np.clip(np.floor((k - lo) / safe * bins), 0, bins - 1).astype(np.intp)
    lower = lo + span * j / bins
    upper = np.where(j + 1 == bins, hi, lo + span * (j + 1) / bins)
    width = upper - lower
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        frac = np.clip((upper - k) / width, 0.0, 1.0)
    rows = np.arange(n)
    val = tail[rows, j + 1] + mass[rows, j] * np.where(width > 0, frac, 0.0)
    return np.where(k <= lo, 1.0, np.where(inside, val, 0.0))


def _above_quantile(p, k):
    a, b = p[:, :-1], p[:, 1:]
    bins = a.shape[1]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        frac = np.clip((b - k) / (b - a), 0.0, 1.0)
    # tied breakpoints are atoms of mass 1/B at the shared value
    frac = np.where(b > a, frac, (k <= a).astype(np.float64))
    return frac.sum(axis=1) / bins


_ABOVE = {"full": _above_full, "uniform": _above_uniform, "gaussian": _above_gaussian,
          "histogram": _above_histogram, "quantile": _above_quantile}


def prob_above(kind: ModelKind, params: np.ndarray, k: float) -> np.ndarray:
    """Vectorised ``Pr(D >= k)`` over rows of a parameter array."""
    params = np.asarray(params, dtype=np.float64)
    k = float(k)
    fn = _ABOVE[kind.name]
    n, width = params.shape
    step = max(1, _CHUNK_ELEMS // max(width, 1))
    if n <= step:
        return fn(params, k)
    out = np.empty(n)
    for start in range(0, n, step):
        out[start:start + step] = fn(params[start:start + step], k)
    return out


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def write_model_field(field_: ModelField, manifest_path, dtype: str = "f32") -> Path:
    """Write a fitted field as a JSON manifest plus one raw payload file.

    The payload is vertex-major: ``storage_cost`` values per vertex, vertices
    in x-fastest order, little-endian ``f32`` (default) or ``f64``.
    """
    if dtype not in ("f32", "f64"):
        raise ModelError(f"unsupported dtype {dtype!r}")
    path = Path(manifest_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = path.with_suffix("." + dtype)
    np_dtype = "<f4" if dtype == "f32" else "<f8"
    tmp = payload.with_name(payload.name + ".tmp")
    field_.params.astype(np_dtype).tofile(tmp)
    os.replace(tmp, payload)
    meta = {
        "dims": field_.dims.as_list(),
        "kind": field_.kind.name,
        "B": field_.kind.bins,
        "members": field_.n_members,
        "values_per_vertex": field_.storage_cost,
        "dtype": dtype,
        "order": "x-fastest",
        "payload": payload.name,
    }
    path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return path


def load_model_field(manifest_path) -> ModelField:
    path = Path(manifest_path)
    try:
        meta = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise EnsembleError(f"model manifest not found: {path}") from None
    kind = ModelKind(meta["kind"], meta.get("B"))
    dims = GridDims(*meta["dims"])
    np_dtype = {"f32": "<f4", "f64": "<f8"}.get(meta.get("dtype"))
    if np_dtype is None:
        raise ModelError(f"unsupported dtype {meta.get('dtype')!r}")
    raw = np.fromfile(path.parent / meta["payload"], dtype=np_dtype)
    width = int(meta["values_per_vertex"])
    if raw.size != dims.n_vertices * width:
        raise ModelError(f"payload holds {raw.size} values, expected {dims.n_vertices * width}")
    return ModelField(dims, kind, raw.reshape(dims.n_vertices, width).astype(np.float64),
                      int(meta["members"]))
