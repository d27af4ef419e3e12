"""
Uniform-grid ensemble scalar fields.

Members are stored as a single ``(M, nz, ny, nx)`` float64 array so that the
x index varies fastest in memory, matching the on-disk raw layout.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class EnsembleError(ValueError):
    """Raised for malformed manifests, member files, or grid operations."""


@dataclass(frozen=True)
class GridDims:
    nx: int
    ny: int
    nz: int = 1

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise EnsembleError(f"{name} must be an integer, got {v!r}")
        if self.nx < 2 or self.ny < 2 or self.nz < 1:
            raise EnsembleError(f"invalid grid dims {self.nx}x{self.ny}x{self.nz}")

    @property
    def is_2d(self) -> bool:
        return self.nz == 1

    @property
    def shape(self) -> tuple[int, int, int]:
        """Array shape in (z, y, x) order."""
        return (self.nz, self.ny, self.nx)

    @property
    def n_vertices(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def cell_shape(self) -> tuple[int, ...]:
        """Cell-grid shape in (z, y, x) order; 2D fields drop the z axis."""
        if self.is_2d:
            return (self.ny - 1, self.nx - 1)
        return (self.nz - 1, self.ny - 1, self.nx - 1)

    @property
    def n_cells(self) -> int:
        return math.prod(self.cell_shape)

    def as_list(self) -> list[int]:
        return [int(self.nx), int(self.ny), int(self.nz)]


@dataclass(frozen=True, eq=False)
class EnsembleField:
    """M co-registered scalar members on a uniform grid.

    Parameters
    ----------
    dims : GridDims
    data : ndarray
        Member values, shape ``(M, nz, ny, nx)``. Anything reshapeable to that
        is accepted and promoted to float64.
    name : str
    """

    dims: GridDims
    data: np.ndarray = field(repr=False)
    name: str = "ensemble"

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim < 1 or arr.size % self.dims.n_vertices:
            raise EnsembleError(
                f"member data of size {arr.size} does not fit dims {self.dims.as_list()}"
            )
        arr = arr.reshape((-1,) + self.dims.shape)
        if arr.shape[0] < 2:
            raise EnsembleError(f"an ensemble needs at least 2 members, got {arr.shape[0]}")
        bad = ~np.isfinite(arr)
        if bad.any():
            m, flat = divmod(int(np.flatnonzero(bad)[0]), self.dims.n_vertices)
            raise EnsembleError(f"non-finite value in member {m} at vertex {flat}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def n_members(self) -> int:
        return self.data.shape[0]

    def samples(self) -> np.ndarray:
        """Per-vertex samples as an ``(n_vertices, M)`` array."""
        return self.data.reshape(self.n_members, -1).T

    def member(self, m: int) -> np.ndarray:
        return self.data[m]


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    magnitude: float
    members: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform"):
            raise EnsembleError(f"unknown noise kind {self.kind!r}")
        if not (self.magnitude > 0 and math.isfinite(self.magnitude)):
            raise EnsembleError("noise magnitude must be positive and finite")
        if self.members < 2:
            raise EnsembleError("noise ensembles need at least 2 members")
        if not 0 <= self.seed < 2**64:
            raise EnsembleError("seed must be an unsigned 64-bit integer")


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------

def _read_manifest(path: Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        raise EnsembleError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise EnsembleError(f"manifest {path} is not valid JSON: {exc}") from None
    for key in ("dims", "members"):
        if key not in meta:
            raise EnsembleError(f"manifest {path} lacks required field {key!r}")
    if meta.get("dtype", "f32") != "f32":
        raise EnsembleError(f"unsupported dtype {meta['dtype']!r}; only 'f32' is supported")
    if meta.get("order", "x-fastest") != "x-fastest":
        raise EnsembleError(f"unsupported order {meta['order']!r}")
    return meta


def load_ensemble(manifest_path) -> EnsembleField:
    """Read a manifest and its raw little-endian float32 member files."""
    path = Path(manifest_path)
    meta = _read_manifest(path)
    dims_list = meta["dims"]
    if len(dims_list) == 2:
        dims_list = list(dims_list) + [1]
    if len(dims_list) != 3:
        raise EnsembleError(f"dims must have 2 or 3 entries, got {meta['dims']!r}")
    dims = GridDims(*(int(d) for d in dims_list))
    files = meta["members"]
    if len(files) < 2:
        raise EnsembleError(f"an ensemble needs at least 2 members, got {len(files)}")

    n = dims.n_vertices
    data = np.empty((len(files), n), dtype=np.float64)
    for m, rel in enumerate(files):
        fpath = path.parent / rel
        if not fpath.is_file():
            raise EnsembleError(f"member file not found: {fpath}")
        nbytes = fpath.stat().st_size
        if nbytes != 4 * n:
            raise EnsembleError(
                f"member file {fpath} holds {nbytes} bytes; dims {dims.as_list()} "
                f"require {4 * n}"
            )
        data[m] = np.fromfile(fpath, dtype="<f4")
    return EnsembleField(dims, data, name=str(meta.get("name", path.stem)))


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def write_ensemble(ensemble: EnsembleField, manifest_path) -> Path:
    """Write ``ensemble`` as a manifest plus one raw float32 file per member.

    Member files are placed next to the manifest and named
    ``<stem>_m<index>.f32``.
    """
    path = Path(manifest_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stem = path.stem
    width = max(3, len(str(ensemble.n_members - 1)))
    names = []
    for m in range(ensemble.n_members):
        fname = f"{stem}_m{m:0{width}d}.f32"
        _atomic_write_bytes(path.parent / fname, ensemble.member(m).astype("<f4").tobytes())
        names.append(fname)
    meta = {
        "name": ensemble.name,
        "dims": ensemble.dims.as_list(),
        "dtype": "f32",
        "order": "x-fastest",
        "members": names,
    }
    _atomic_write_bytes(path, (json.dumps(meta, indent=2) + "\n").encode("utf-8"))
    return path


# ---------------------------------------------------------------------------
# Grid operations
# ---------------------------------------------------------------------------

def slice_z(ensemble: EnsembleField, z_index: int) -> EnsembleField:
    """Extract plane ``z_index`` of a 3D ensemble as a 2D ensemble."""
    dims = ensemble.dims
    if dims.is_2d:
        raise EnsembleError("cannot slice a 2D field")
    if not 0 <= z_index < dims.nz:
        raise EnsembleError(f"z index {z_index} out of range [0, {dims.nz})")
    plane = ensemble.data[:, z_index : z_index + 1]
    return EnsembleField(GridDims(dims.nx, dims.ny, 1), plane, name=f"{ensemble.name}_z{z_index}")


def subsample(ensemble: EnsembleField, stride: int) -> EnsembleField:
    """Decimate every non-degenerate axis by ``stride`` (no averaging)."""
    if stride < 1:
        raise EnsembleError("stride must be >= 1")
    dims = ensemble.dims
    new = []
    for n in (dims.nx, dims.ny, dims.nz):
        if n == 1:
            new.append(1)
            continue
        kept = -(-n // stride)
        if kept < 2:
            raise EnsembleError(f"stride {stride} leaves fewer than 2 vertices on an axis of {n}")
        new.append(kept)
    data = ensemble.data[:, ::stride, ::stride, ::stride]
    return EnsembleField(GridDims(*new), data, name=f"{ensemble.name}_s{stride}")


# ---------------------------------------------------------------------------
# Synthetic ensembles
# ---------------------------------------------------------------------------

def member_rng(seed: int, member: int) -> np.random.Generator:
    """Counter-based (Philox) generator for one member's sub-stream.

    The stream depends only on ``(seed, member)``, so members can be generated
    in any order or in parallel with identical results.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(member)])))


def inject_noise(base, dims: GridDims, spec: NoiseSpec) -> EnsembleField:
    """Build an ensemble of ``spec.members`` noisy copies of ``base``.

    Gaussian noise uses ``spec.magnitude`` as the standard deviation; uniform
    noise draws from ``[-magnitude, magnitude]``.
    """
    base = np.asarray(base, dtype=np.float64).reshape(dims.shape)
    if not np.isfinite(base).all():
        raise EnsembleError("base member contains non-finite values")
    out = np.empty((spec.members,) + dims.shape)
    a = spec.magnitude
    for m in range(spec.members):
        rng = member_rng(spec.seed, m)
        if spec.kind == "gaussian":
            noise = rng.normal(0.0, a, size=dims.shape)
        else:
            noise = rng.uniform(-a, a, size=dims.shape)
        out[m] = base + noise
    if spec.kind == "uniform":
        # rounding in base + noise may step one ulp past the interval
        np.clip(out, base - a, base + a, out=out)
    return EnsembleField(dims, out, name=f"{spec.kind}_noise_{spec.members}")


def relative_magnitude(base, r: float) -> float:
    """Noise magnitude as a fraction ``r`` of the base member's value range."""
    base = np.asarray(base, dtype=np.float64)
    return float(r * (base.max() - base.min()))


def synthetic_base(dims: GridDims) -> np.ndarray:
    """A smooth deterministic scalar field in roughly [-1, 1], shape (nz, ny, nx)."""
    z, y, x = np.meshgrid(
        np.linspace(0.0, 1.0, dims.nz),
        np.linspace(0.0, 1.0, dims.ny),
        np.linspace(0.0, 1.0, dims.nx),
        indexing="ij",
    )
    return (
        0.6 * np.sin(2.0 * np.pi * x) * np.cos(1.5 * np.pi * y)
        + 0.3 * np.cos(3.0 * np.pi * (x + y))
        + 0.1 * np.sin(2.0 * np.pi * z)
    )


def synthetic_ensemble(dims: GridDims, members: int, seed: int,
                       kind: str = "gaussian", magnitude: float = 0.15) -> EnsembleField:
    """Noise ensemble around :func:`synthetic_base`."""
    spec = NoiseSpec(kind, magnitude, members, seed)
    return inject_noise(synthetic_base(dims), dims, spec)
