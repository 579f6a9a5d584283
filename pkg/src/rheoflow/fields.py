"""Periodic-torus grids, spectral operators, norms, interpolation and field I/O.

Everything downstream computes on uniform grids over the torus [0, L)^dim with
Fourier spectral differentiation.  Quadrature is the rectangle rule, which is
exact for trigonometric polynomials resolved by the grid.  Fields are immutable
value objects; all operators here are pure functions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi

# Upper-triangle component order for symmetric tensors, per dimension.
SYM_INDEX = {
    2: ((0, 0), (0, 1), (1, 1)),
    3: ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)),
}


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the torus [0, length)^dim.

    All axes share the same resolution; n_points must be even so the Nyquist
    mode is unambiguous for real fields.
    """

    dim: int
    n_points: int
    length: float = TWO_PI

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.n_points < 8 or self.n_points % 2 != 0:
            raise ValueError(f"n_points must be even and >= 8, got {self.n_points}")
        if not self.length > 0:
            raise ValueError("length must be positive")

    @property
    def shape(self):
        return (self.n_points,) * self.dim

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def volume(self) -> float:
        return self.length**self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return np.arange(self.n_points) * self.spacing

    @cached_property
    def mesh(self):
        """Tuple of dim coordinate arrays, each of shape grid.shape."""
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def wavenumbers(self):
        """Tuple of dim spectral wavenumber arrays (broadcast to grid.shape)."""
        k1 = TWO_PI * np.fft.fftfreq(self.n_points, d=self.spacing)
        return tuple(np.meshgrid(*([k1] * self.dim), indexing="ij"))

    @cached_property
    def k_squared(self) -> np.ndarray:
        return sum(k**2 for k in self.wavenumbers)

    @cached_property
    def k_squared_safe(self) -> np.ndarray:
        k2 = self.k_squared.copy()
        k2[(0,) * self.dim] = 1.0
        return k2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with integer index |k| <= n/3 on every axis."""
        idx = np.abs(np.fft.fftfreq(self.n_points) * self.n_points)
        keep1 = idx <= self.n_points / 3
        mask = np.ones(self.shape, dtype=bool)
        for ax in range(self.dim):
            shape = [1] * self.dim
            shape[ax] = self.n_points
            mask &= keep1.reshape(shape)
        return mask


def _freeze(values: np.ndarray, shape) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"field values have shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field values must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values, self.grid.shape))

    @classmethod
    def full(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        return cls(grid, fn(*grid.mesh))

    def mean(self) -> float:
        return float(np.mean(self.values))


@dataclass(frozen=True)
class VectorField:
    grid: Grid
    components: np.ndarray  # shape (dim, n, n[, n])

    def __post_init__(self):
        object.__setattr__(
            self, "components", _freeze(self.components, (self.grid.dim,) + self.grid.shape)
        )

    @classmethod
    def zero(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((grid.dim,) + grid.shape))

    @classmethod
    def from_functions(cls, grid: Grid, fns) -> "VectorField":
        return cls(grid, np.stack([fn(*grid.mesh) for fn in fns]))

    def component(self, i: int) -> np.ndarray:
        return self.components[i]

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.components**2, axis=0))


@dataclass(frozen=True)
class SymTensorField:
    """Symmetric dim x dim tensor field, upper-triangle storage."""

    grid: Grid
    components: np.ndarray  # shape (dim*(dim+1)/2, n, n[, n])

    def __post_init__(self):
        n_comp = self.grid.dim * (self.grid.dim + 1) // 2
        object.__setattr__(
            self, "components", _freeze(self.components, (n_comp,) + self.grid.shape)
        )

    def entry(self, i: int, j: int) -> np.ndarray:
        pairs = SYM_INDEX[self.grid.dim]
        key = (min(i, j), max(i, j))
        return self.components[pairs.index(key)]

    def frobenius_sq(self) -> np.ndarray:
        """Pointwise squared Frobenius norm (off-diagonal entries count twice)."""
        out = np.zeros(self.grid.shape)
        for comp, (i, j) in zip(self.components, SYM_INDEX[self.grid.dim]):
            out += comp**2 if i == j else 2.0 * comp**2
        return out

    def trace(self) -> np.ndarray:
        out = np.zeros(self.grid.shape)
        for comp, (i, j) in zip(self.components, SYM_INDEX[self.grid.dim]):
            if i == j:
                out += comp
        return out


# ---------------------------------------------------------------------------
# Spectral transforms and differential operators
# ---------------------------------------------------------------------------


def to_spectral(f: ScalarField) -> np.ndarray:
    """Forward DFT of a scalar field (unnormalized numpy convention)."""
    return np.fft.fftn(f.values)

def to_physical(coeffs: np.ndarray, grid: Grid) -> ScalarField:
    """Inverse of to_spectral; imaginary residue is discarded."""
    if coeffs.shape != grid.shape:
        raise ValueError(f"coefficient array shape {coeffs.shape} does not match {grid.shape}")
    return ScalarField(grid, np.fft.ifftn(coeffs).real)


def _grad_arr(values: np.ndarray, grid: Grid) -> np.ndarray:
    fk = np.fft.fftn(values)
    return np.stack([np.fft.ifftn(1j * k * fk).real for k in grid.wavenumbers])

def _div_arr(comps: np.ndarray, grid: Grid) -> np.ndarray:
    out = np.zeros(grid.shape)
    for ax in range(grid.dim):
        out += np.fft.ifftn(1j * grid.wavenumbers[ax] * np.fft.fftn(comps[ax])).real
    return out

def _lap_arr(values: np.ndarray, grid: Grid) -> np.ndarray:
    return np.fft.ifftn(-grid.k_squared * np.fft.fftn(values)).real


def gradient(f: ScalarField) -> VectorField:
    return VectorField(f.grid, _grad_arr(f.values, f.grid))

def divergence(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, _div_arr(v.components, v.grid))

def laplacian(f):
    """Spectral Laplacian of a ScalarField or (componentwise) VectorField."""
    if isinstance(f, VectorField):
        return VectorField(f.grid, np.stack([_lap_arr(c, f.grid) for c in f.components]))
    return ScalarField(f.grid, _lap_arr(f.values, f.grid))

def bilaplacian(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, np.fft.ifftn(f.grid.k_squared**2 * np.fft.fftn(f.values)).real)


def _leray_arr(comps: np.ndarray, grid: Grid) -> np.ndarray:
    """Divergence-free projection on raw component arrays; mean is preserved."""
    hats = [np.fft.fftn(c) for c in comps]
    kdotv = sum(k * h for k, h in zip(grid.wavenumbers, hats))
    scale = kdotv / grid.k_squared_safe
    out = np.empty_like(comps)
    for ax in range(grid.dim):
        proj = hats[ax] - grid.wavenumbers[ax] * scale
        out[ax] = np.fft.ifftn(proj).real
    return out

def leray_project(v: VectorField) -> VectorField:
    """Orthogonal projection onto divergence-free fields (gradients are killed)."""
    return VectorField(v.grid, _leray_arr(v.components, v.grid))


def pressure_recover(rhs: VectorField) -> ScalarField:
    """Solve the periodic pressure problem lap(pi) = div(rhs), zero mean.

    Together with leray_project this realizes the Helmholtz decomposition
    rhs = P(rhs) + grad(pi).
    """
    grid = rhs.grid
    div_hat = np.zeros(grid.shape, dtype=complex)
    for ax in range(grid.dim):
        div_hat += 1j * grid.wavenumbers[ax] * np.fft.fftn(rhs.components[ax])
    pi_hat = -div_hat / grid.k_squared_safe
    pi_hat[(0,) * grid.dim] = 0.0
    return ScalarField(grid, np.fft.ifftn(pi_hat).real)


def dealias(f):
    """Apply the 2/3-rule low-pass to a field (drop the aliased upper third)."""
    grid = f.grid
    mask = grid.dealias_mask
    if isinstance(f, ScalarField):
        return ScalarField(grid, np.fft.ifftn(mask * np.fft.fftn(f.values)).real)
    comps = np.stack([np.fft.ifftn(mask * np.fft.fftn(c)).real for c in f.components])
    return type(f)(grid, comps)

def _dealias_arr(values: np.ndarray, grid: Grid) -> np.ndarray:
    return np.fft.ifftn(grid.dealias_mask * np.fft.fftn(values)).real


# ---------------------------------------------------------------------------
# Norms and inner products (rectangle rule)
# ---------------------------------------------------------------------------


def _values_of(f) -> np.ndarray:
    if isinstance(f, ScalarField):
        return f.values[None]
    return f.components

def lp_norm(f, p: float) -> float:
    """L_p norm over the torus; works for scalar and vector fields."""
    if p < 1:
        raise ValueError("p must be >= 1")
    vals = _values_of(f)
    if np.isinf(p):
        return sup_norm(f)
    mag_p = np.sum(np.abs(vals) ** 2, axis=0) ** (p / 2.0)
    return float((np.sum(mag_p) * f.grid.cell_volume) ** (1.0 / p))

def l2_inner(a, b) -> float:
    va, vb = _values_of(a), _values_of(b)
    if va.shape != vb.shape:
        raise ValueError("fields must live on the same grid and have the same rank")
    return float(np.sum(va * vb) * a.grid.cell_volume)

def sup_norm(f) -> float:
    vals = _values_of(f)
    return float(np.max(np.sqrt(np.sum(vals**2, axis=0))))


# ---------------------------------------------------------------------------
# Interpolation
# ---------------------------------------------------------------------------


def _lagrange_weights(frac: np.ndarray, order: int):
    """Barycentric-free Lagrange weights on the centered stencil of `order` nodes."""
    half = order // 2
    offsets = np.arange(-half + 1, half + 1)
    w = np.ones(frac.shape + (order,))
    for a in range(order):
        for b in range(order):
            if a != b:
                w[..., a] *= (frac - offsets[b]) / (offsets[a] - offsets[b])
    return w, offsets


class InterpPlan:
    """Precomputed gather indices and tensor-product Lagrange weights.

    Reusable whenever the same query points are evaluated against many fields
    (semi-Lagrangian stepping with a steady velocity, for instance).
    """

    def __init__(self, grid: Grid, points: np.ndarray, order: int = 4):
        if order % 2 != 0 or order < 2:
            raise ValueError("interpolation order must be even and >= 2")
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.shape[-1] != grid.dim:
            raise ValueError(f"points must have {grid.dim} coordinates")
        self.grid = grid
        self.n_points = pts.shape[0]
        n = grid.n_points
        x = np.mod(pts, grid.length) / grid.spacing
        # snap queries that are a rounding error away from a node, so nodal
        # lookups (and zero-velocity transport) are exact
        nearest = np.round(x)
        snap = np.abs(x - nearest) < 1e-9
        x = np.where(snap, nearest, x)
        base = np.floor(x).astype(np.int64)
        frac = x - base
        weights = []
        indices = []
        for ax in range(grid.dim):
            w, offs = _lagrange_weights(frac[:, ax], order)
            weights.append(w)
            indices.append((base[:, ax][:, None] + offs[None, :]) % n)
        if grid.dim == 2:
            flat = indices[0][:, :, None] * n + indices[1][:, None, :]
            w = weights[0][:, :, None] * weights[1][:, None, :]
        else:
            flat = (
                indices[0][:, :, None, None] * n * n
                + indices[1][:, None, :, None] * n
                + indices[2][:, None, None, :]
            )
            w = (
                weights[0][:, :, None, None]
                * weights[1][:, None, :, None]
                * weights[2][:, None, None, :]
            )
        self._flat = flat.reshape(self.n_points, -1)
        self._w = w.reshape(self.n_points, -1)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return np.einsum("ij,ij->i", self._w, values.ravel()[self._flat])


def _spectral_interp(f: ScalarField, pts: np.ndarray) -> np.ndarray:
    grid = f.grid
    fk = np.fft.fftn(f.values) / f.values.size
    ks = [k.ravel() for k in grid.wavenumbers]
    out = np.empty(pts.shape[0])
    for i, x in enumerate(pts):
        phase = np.zeros(ks[0].shape, dtype=complex)
        for ax in range(grid.dim):
            phase += 1j * ks[ax] * x[ax]
        out[i] = np.sum(fk.ravel() * np.exp(phase)).real
    return out


def interpolate(f: ScalarField, points, method: str = "cubic", order: int | None = None):
    """Evaluate a scalar field at off-grid positions (wrapped into the torus).

    method "cubic" is 4-point Lagrange on each axis; pass order=6 or 8 for
    higher-order stencils.  method "spectral" evaluates the trigonometric
    interpolant exactly (cost O(n^dim) per point).
    """
    pts = np.asarray(points, dtype=np.float64)
    squeeze = pts.ndim == 1
    if squeeze:
        pts = pts[None, :]
    if method == "spectral":
        out = _spectral_interp(f, pts)
    elif method == "cubic":
        plan = InterpPlan(f.grid, pts, order=order or 4)
        out = plan.apply(f.values)
    else:
        raise ValueError(f"unknown interpolation method {method!r}")
    return out[0] if squeeze else out


# ---------------------------------------------------------------------------
# Deterministic random fields (counter-based, reproducible across platforms)
# ---------------------------------------------------------------------------

_SM64_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM64_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM64_M2 = np.uint64(0x94D049BB133111EB)


def counter_uniform(seed: int, start: int, count: int) -> np.ndarray:
    """Uniforms in [0, 1) from the splitmix64 finalizer over a counter stream.

    value(i) = finalize((seed + (i+1) * 0x9E3779B97F4A7C15) mod 2^64), top 53
    bits scaled by 2^-53.  Pure integer arithmetic, identical on any platform.
    """
    with np.errstate(over="ignore"):
        i = np.arange(start + 1, start + count + 1, dtype=np.uint64)
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + i * _SM64_GAMMA
        z = (z ^ (z >> np.uint64(30))) * _SM64_M1
        z = (z ^ (z >> np.uint64(27))) * _SM64_M2
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def random_scalar_field(
    grid: Grid, seed: int, kmax: int = 4, amplitude: float = 1.0, mean: float = 0.0
) -> ScalarField:
    """Band-limited random field with the given mean and sup-amplitude."""
    raw = 2.0 * counter_uniform(seed, 0, int(np.prod(grid.shape))) - 1.0
    raw = raw.reshape(grid.shape)
    idx = np.abs(np.fft.fftfreq(grid.n_points) * grid.n_points)
    keep1 = idx <= kmax
    mask = np.ones(grid.shape, dtype=bool)
    for ax in range(grid.dim):
        shape = [1] * grid.dim
        shape[ax] = grid.n_points
        mask &= keep1.reshape(shape)
    hat = np.fft.fftn(raw) * mask
    hat[(0,) * grid.dim] = 0.0
    smooth = np.fft.ifftn(hat).real
    peak = np.max(np.abs(smooth))
    if peak > 0:
        smooth *= amplitude / peak
    return ScalarField(grid, smooth + mean)


def random_vector_field(
    grid: Grid, seed: int, kmax: int = 4, amplitude: float = 1.0, solenoidal: bool = False
) -> VectorField:
    comps = np.stack(
        [
            random_scalar_field(grid, seed + 101 * (ax + 1), kmax=kmax, amplitude=1.0).values
            for ax in range(grid.dim)
        ]
    )
    if solenoidal:
        comps = _leray_arr(comps, grid)
    peak = np.max(np.sqrt(np.sum(comps**2, axis=0)))
    if peak > 0:
        comps *= amplitude / peak
    return VectorField(grid, comps)


# ---------------------------------------------------------------------------
# Checkpoint I/O
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"NNF1"


def _flatten_fields(fields) -> list[tuple[str, np.ndarray]]:
    out = []
    for name, f in fields.items():
        if isinstance(f, ScalarField):
            out.append((name, f.values))
        elif isinstance(f, VectorField):
            for ax, suffix in zip(range(f.grid.dim), "xyz"):
                out.append((f"{name}_{suffix}", f.components[ax]))
        elif isinstance(f, np.ndarray):
            out.append((name, f))
        else:
            raise TypeError(f"cannot checkpoint object of type {type(f)!r}")
    return out


def save_checkpoint(path, grid: Grid, fields) -> None:
    """Write the shared checkpoint format.

    Layout: magic "NNF1", little-endian u32 dim, u32 n_points, u32 field count,
    then per field a 16-byte NUL-padded name and the row-major float64 array.
    The torus length is not part of the format; the default 2*pi is assumed.
    """
    entries = _flatten_fields(fields)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<III", grid.dim, grid.n_points, len(entries)))
        for name, arr in entries:
            raw = name.encode("ascii")
            if len(raw) > 16:
                raise ValueError(f"field name {name!r} exceeds 16 bytes")
            fh.write(raw.ljust(16, b"\0"))
            if arr.shape != grid.shape:
                raise ValueError(f"field {name!r} does not match the grid")
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns (grid, dict name -> array)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}")
        dim, n_points, count = struct.unpack("<III", fh.read(12))
        grid = Grid(dim=dim, n_points=n_points)
        fields = {}
        n_vals = n_points**dim
        for _ in range(count):
            name = fh.read(16).rstrip(b"\0").decode("ascii")
            data = np.frombuffer(fh.read(8 * n_vals), dtype="<f8").reshape(grid.shape)
            fields[name] = data.copy()
    return grid, fields
