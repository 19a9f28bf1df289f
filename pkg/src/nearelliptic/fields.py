"""Periodic-grid vector and hessian fields with spectral differentiation.

Fields live on the torus [0, L)^n sampled at M points per axis.  The spectral
representation stores Fourier-series coefficients

    u(x) = sum_k c(k) exp(2 pi i k . x / L),      c(k) = fftn(u) / M^n,

with integer frequencies k in {-M/2, ..., M/2 - 1}^n (numpy fft layout) and
physical frequency z = k / L.  With this normalization the quadrature and the
coefficient sums agree exactly:

    ||u||_{L2}^2 = (L/M)^n sum_x |u(x)|^2 = L^n sum_k |c(k)|^2,

and the hessian acts diagonally, c(k) -> c(k) (2 pi i k_i / L)(2 pi i k_j / L).
The k = 0 coefficient is the spatial mean; second derivatives annihilate it,
which is the gauge mode the solvers pin to zero.  M is even; the Nyquist row
k_i = -M/2 needs no special casing because the hessian multiplier has even
order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import InputError

PHYSICAL = "physical"
SPECTRAL = "spectral"

_DEFAULT_BUDGET = 2 * 1024**3  # bytes


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid: n axes, M points each, period L, N field components."""

    n: int
    N: int
    M: int
    L: float = 1.0
    memory_budget: int = _DEFAULT_BUDGET

    def __post_init__(self):
        if self.n < 2:
            raise InputError(f"spatial dimension must be >= 2, got {self.n}")
        if self.N < 2:
            raise InputError(f"target dimension must be >= 2, got {self.N}")
        if self.M < 4 or self.M % 2 != 0:
            raise InputError(f"points per axis must be even and >= 4, got {self.M}")
        if not self.L > 0:
            raise InputError(f"period must be positive, got {self.L}")
        bytes_needed = 16 * self.N * self.M**self.n
        if bytes_needed > self.memory_budget:
            raise InputError(
                f"field of {bytes_needed} bytes exceeds the memory budget {self.memory_budget}"
            )

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * self.n

    @property
    def points(self) -> int:
        return self.M**self.n

    @property
    def spacing(self) -> float:
        return self.L / self.M

    @property
    def cell_volume(self) -> float:
        return (self.L / self.M) ** self.n

    @property
    def volume(self) -> float:
        return self.L**self.n

    def axes(self) -> list[np.ndarray]:
        """Physical coordinates along each axis."""
        x = np.arange(self.M) * self.spacing
        return [x] * self.n

    def integer_freqs(self) -> np.ndarray:
        """Integer frequencies along one axis in fft layout."""
        return np.fft.fftfreq(self.M, d=1.0 / self.M)

    def freq_axes(self) -> list[np.ndarray]:
        """Integer frequency arrays shaped for broadcasting over the grid axes."""
        k = self.integer_freqs()
        out = []
        for axis in range(self.n):
            shape = [1] * self.n
            shape[axis] = self.M
            out.append(k.reshape(shape))
        return out

    def zsq(self) -> np.ndarray:
        """|z|^2 = |k/L|^2 over the full grid."""
        total = np.zeros(self.shape)
        for ka in self.freq_axes():
            total = total + (ka / self.L) ** 2
        return total


def _spatial_axes(offset: int, n: int) -> tuple[int, ...]:
    return tuple(range(offset, offset + n))


@dataclass(frozen=True, eq=False)
class VectorField:
    """N-component field on the grid, physical (real) or spectral (complex coefficients)."""

    grid: GridSpec
    data: np.ndarray
    representation: str = PHYSICAL

    def __post_init__(self):
        expected = (self.grid.N,) + self.grid.shape
        data = np.asarray(self.data)
        if data.shape != expected:
            raise InputError(f"vector field data must have shape {expected}, got {data.shape}")
        if self.representation == PHYSICAL:
            data = np.ascontiguousarray(data, dtype=float)
        elif self.representation == SPECTRAL:
            data = np.ascontiguousarray(data, dtype=complex)
        else:
            raise InputError(f"unknown representation {self.representation!r}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def is_physical(self) -> bool:
        return self.representation == PHYSICAL

    def to_physical(self) -> "VectorField":
        if self.is_physical():
            return self
        axes = _spatial_axes(1, self.grid.n)
        values = np.fft.ifftn(self.data, axes=axes) * self.grid.points
        return VectorField(self.grid, values.real, PHYSICAL)

    def to_spectral(self) -> "VectorField":
        if not self.is_physical():
            return self
        axes = _spatial_axes(1, self.grid.n)
        coef = np.fft.fftn(self.data, axes=axes) / self.grid.points
        return VectorField(self.grid, coef, SPECTRAL)

    def mean(self) -> np.ndarray:
        """Component means; equals the k = 0 coefficient."""
        if self.is_physical():
            return self.data.mean(axis=_spatial_axes(1, self.grid.n))
        zero = (slice(None),) + (0,) * self.grid.n
        return self.data[zero].real.copy()

    def _binary_op(self, other, op):
        if not isinstance(other, VectorField):
            return NotImplemented
        if other.grid != self.grid or other.representation != self.representation:
            raise InputError("field operands must share grid and representation")
        return VectorField(self.grid, op(self.data, other.data), self.representation)

    def __add__(self, other):
        return self._binary_op(other, np.add)

    def __sub__(self, other):
        return self._binary_op(other, np.subtract)

    def __mul__(self, scalar):
        return VectorField(self.grid, self.data * float(scalar), self.representation)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class HessianField:
    """Second-derivative field with components (alpha, i, j), symmetric in (i, j)."""

    grid: GridSpec
    data: np.ndarray
    representation: str = PHYSICAL

    def __post_init__(self):
        g = self.grid
        expected = (g.N, g.n, g.n) + g.shape
        data = np.asarray(self.data)
        if data.shape != expected:
            raise InputError(f"hessian field data must have shape {expected}, got {data.shape}")
        if self.representation == PHYSICAL:
            data = np.ascontiguousarray(data, dtype=float)
        elif self.representation == SPECTRAL:
            data = np.ascontiguousarray(data, dtype=complex)
        else:
            raise InputError(f"unknown representation {self.representation!r}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def is_physical(self) -> bool:
        return self.representation == PHYSICAL

    def to_physical(self) -> "HessianField":
        if self.is_physical():
            return self
        axes = _spatial_axes(3, self.grid.n)
        values = np.fft.ifftn(self.data, axes=axes) * self.grid.points
        return HessianField(self.grid, values.real, PHYSICAL)

    def to_spectral(self) -> "HessianField":
        if not self.is_physical():
            return self
        axes = _spatial_axes(3, self.grid.n)
        coef = np.fft.fftn(self.data, axes=axes) / self.grid.points
        return HessianField(self.grid, coef, SPECTRAL)

    def __sub__(self, other):
        if not isinstance(other, HessianField):
            return NotImplemented
        if other.grid != self.grid or other.representation != self.representation:
            raise InputError("field operands must share grid and representation")
        return HessianField(self.grid, self.data - other.data, self.representation)


def forward_transform(u: VectorField) -> VectorField:
    """Physical to spectral; errors if already spectral."""
    if not u.is_physical():
        raise InputError("forward transform expects a physical-representation field")
    return u.to_spectral()


def inverse_transform(u: VectorField) -> VectorField:
    """Spectral to physical; errors if already physical."""
    if u.is_physical():
        raise InputError("inverse transform expects a spectral-representation field")
    return u.to_physical()


def conjugate_symmetry_error(u: VectorField) -> float:
    """Relative deviation from c(-k) = conj(c(k)); zero for transforms of real fields."""
    coef = u.to_spectral().data
    axes = _spatial_axes(1, u.grid.n)
    reflected = coef
    for ax in axes:
        reflected = np.roll(np.flip(reflected, axis=ax), 1, axis=ax)
    scale = np.abs(coef).max()
    if scale == 0.0:
        return 0.0
    return float(np.abs(coef - np.conj(reflected)).max() / scale)


def spectral_hessian(u: VectorField, representation: str = PHYSICAL) -> HessianField:
    """All second derivatives of ``u`` via the diagonal frequency multiplier.

    Component (alpha, i, j) has coefficients c_alpha(k) (2 pi i k_i / L)
    (2 pi i k_j / L); the multiplier is real and even in k, so the physical
    output is real and the Nyquist rows are unambiguous.
    """
    g = u.grid
    coef = u.to_spectral().data
    freq = g.freq_axes()
    hess = np.empty((g.N, g.n, g.n) + g.shape, dtype=complex)
    factor = -((2 * np.pi / g.L) ** 2)
    for i in range(g.n):
        for j in range(i, g.n):
            mult = factor * freq[i] * freq[j]
            block = coef * mult
            hess[:, i, j] = block
            if i != j:
                hess[:, j, i] = block
    out = HessianField(g, hess, SPECTRAL)
    if representation == SPECTRAL:
        return out
    return out.to_physical()


def apply_gradient(u: VectorField) -> np.ndarray:
    """Physical gradient array of shape (N, n, M, ..., M); diagnostic use only."""
    g = u.grid
    coef = u.to_spectral().data
    freq = g.freq_axes()
    out = np.empty((g.N, g.n) + g.shape)
    axes = _spatial_axes(1, g.n)
    for i in range(g.n):
        mult = 2j * np.pi * freq[i] / g.L
        out[:, i] = (np.fft.ifftn(coef * mult, axes=axes) * g.points).real
    return out


def l2_norm(field) -> float:
    """Discrete L2 norm; identical value in either representation (Plancherel)."""
    g = field.grid
    if field.is_physical():
        return float(np.sqrt(g.cell_volume * (field.data**2).sum()))
    return float(np.sqrt(g.volume * (np.abs(field.data) ** 2).sum()))


def lp_norm(values: np.ndarray, grid: GridSpec, p: float, component_axes: int) -> float:
    """Power-sum quadrature norm of the pointwise euclidean magnitude.

    ``values`` has ``component_axes`` leading component axes followed by the
    grid axes; the magnitude is taken over the components first.
    """
    comp = tuple(range(component_axes))
    magnitude_sq = (values**2).sum(axis=comp)
    return float((grid.cell_volume * magnitude_sq ** (p / 2.0)).sum() ** (1.0 / p))


@dataclass(frozen=True)
class NormReport:
    """Discrete norms entering the solution-space estimates.

    The mixed-exponent pieces only make sense for n >= 5 (exponents
    2n/(n-2) and 2n/(n-4)); below that they are None and ``w22star`` reduces
    to the hessian seminorm, which on the torus controls everything anyway.
    """

    l2: float
    grad_l2star_surrogate: float | None
    u_l2starstar_surrogate: float | None
    w22star: float


def sobolev_exponents(n: int) -> tuple[float, float]:
    """(2*, 2**) = (2n/(n-2), 2n/(n-4)); only meaningful for n >= 5."""
    if n < 5:
        raise InputError(f"mixed-exponent norms need n >= 5, got n={n}")
    return 2.0 * n / (n - 2.0), 2.0 * n / (n - 4.0)


def w22star_norms(u: VectorField) -> NormReport:
    """Norm report for a vector field: L2, and for n >= 5 the mixed-exponent surrogates."""
    g = u.grid
    phys = u.to_physical()
    hess = spectral_hessian(u, PHYSICAL)
    hess_l2 = l2_norm(hess)
    if g.n < 5:
        return NormReport(
            l2=l2_norm(phys),
            grad_l2star_surrogate=None,
            u_l2starstar_surrogate=None,
            w22star=hess_l2,
        )
    two_star, two_star_star = sobolev_exponents(g.n)
    grad = apply_gradient(u)
    grad_norm = lp_norm(grad, g, two_star, component_axes=2)
    u_norm = lp_norm(phys.data, g, two_star_star, component_axes=1)
    return NormReport(
        l2=l2_norm(phys),
        grad_l2star_surrogate=grad_norm,
        u_l2starstar_surrogate=u_norm,
        w22star=u_norm + grad_norm + hess_l2,
    )


def _conjugate_reflect(coef: np.ndarray, n_axes_offset: int, n: int) -> np.ndarray:
    out = np.conj(coef)
    for ax in range(n_axes_offset, n_axes_offset + n):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


def random_band_limited(grid: GridSpec, band: int, seed: int) -> VectorField:
    """Seeded real zero-mean field with spectral support in max_i |k_i| <= band."""
    if band < 0 or band >= grid.M // 2:
        raise InputError(f"band must satisfy 0 <= band < M/2 = {grid.M // 2}, got {band}")
    rng = np.random.default_rng(seed)
    shape = (grid.N,) + grid.shape
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    mask = np.ones(grid.shape, dtype=bool)
    for ka in grid.freq_axes():
        mask &= np.abs(ka) <= band
    coef = np.where(mask, raw, 0.0)
    coef = 0.5 * (coef + _conjugate_reflect(coef, 1, grid.n))
    zero = (slice(None),) + (0,) * grid.n
    coef[zero] = 0.0
    return VectorField(grid, coef, SPECTRAL).to_physical()


_MAGIC = b"NEFIELD1"
_KINDS = {"vector": 0, "hessian": 1}
_REPS = {PHYSICAL: 0, SPECTRAL: 1}
_HEADER = struct.Struct("<8siiidBB")


def save_field(path, field) -> None:
    """Write a field as flat binary: fixed header, then the raw C-order payload."""
    kind = "hessian" if isinstance(field, HessianField) else "vector"
    g = field.grid
    header = _HEADER.pack(
        _MAGIC, g.n, g.N, g.M, g.L, _REPS[field.representation], _KINDS[kind]
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(field.data).tobytes())


def load_field(path):
    """Read a field written by :func:`save_field`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, n, N, M, L, rep_code, kind_code = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise InputError(f"not a field file: bad magic {magic!r}")
    rep = {v: k for k, v in _REPS.items()}[rep_code]
    kind = {v: k for k, v in _KINDS.items()}[kind_code]
    grid = GridSpec(n=n, N=N, M=M, L=L)
    dtype = np.float64 if rep == PHYSICAL else np.complex128
    payload = np.frombuffer(raw, dtype=dtype, offset=_HEADER.size)
    if kind == "vector":
        return VectorField(grid, payload.reshape((N,) + grid.shape).copy(), rep)
    return HessianField(grid, payload.reshape((N, n, n) + grid.shape).copy(), rep)


def csv_slice(field: VectorField, path, component: int = 0) -> None:
    """Write a plotting slice as CSV: the (x1, x2) plane of one component at zero in the other axes."""
    phys = field.to_physical()
    g = field.grid
    block = phys.data[(component,) + (slice(None), slice(None)) + (0,) * (g.n - 2)]
    x = np.arange(g.M) * g.spacing
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x1,x2,value\n")
        for i in range(g.M):
            for j in range(g.M):
                fh.write(f"{float(x[i])!r},{float(x[j])!r},{float(block[i, j])!r}\n")
