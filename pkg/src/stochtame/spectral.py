"""Fourier representation of periodic fields and the Sobolev space ladder.

Fields live on the torus ``[0, 2*pi)^dim`` and are stored as full complex
Fourier coefficient arrays in numpy fft ordering.  The normalisation is

    fhat_k = (2*pi)^(-dim) * integral f(x) exp(-i k.x) dx,

so Parseval reads ``mean(|f|^2) = sum_k |fhat_k|^2`` and the Sobolev norms are

    ||f||_{H^s}^2 = sum_k (1 + |k|^2)^s |fhat_k|^2,

summed over vector components.  With this convention the ladder interpolation
inequality ``||f||_{F0} <= ||f||_{F1}^m ||f||_{G}^(1-m)`` holds with constant
exactly 1 whenever the exponent relation ``s_F0 = m*s_F1 + (1-m)*s_G`` does
(Hoelder on the coefficient sum), which is what the structural test suite
checks.

Real-valued fields are kept Hermitian-symmetric (``fhat_{-k} = conj(fhat_k)``);
nonlinear evaluations in :mod:`stochtame.models` re-enforce the symmetry.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np


class GridMismatchError(ValueError):
    """Two fields on incompatible grids / component counts."""


class NonFiniteFieldError(FloatingPointError):
    """A field contains NaN or Inf coefficients.

    Distinct from the blow-up flag of a trajectory: this signals a numerical
    failure of an operation, not a detected norm explosion.
    """


class _GridCache:
    """Shared per-(dim, n) wavenumber arrays, built once."""

    _store: dict[tuple[int, int], dict] = {}

    @classmethod
    def get(cls, dim: int, n: int) -> dict:
        key = (dim, n)
        if key not in cls._store:
            k1 = np.fft.fftfreq(n, d=1.0 / n)  # integer wavenumbers, fft order
            axes = []
            for a in range(dim):
                shape = [1] * dim
                shape[a] = n
                axes.append(k1.reshape(shape))
            ksq = sum(ka**2 for ka in axes)
            kinf = np.maximum.reduce([np.broadcast_to(np.abs(ka), ksq.shape) for ka in axes])
            rev = np.ix_(*[(-np.arange(n)) % n for _ in range(dim)])
            cls._store[key] = {
                "axes": tuple(axes),
                "ksq": ksq,
                "kinf": kinf,
                "weight": 1.0 + ksq,
                "reverse": rev,
                "dealias_mask": kinf <= n // 3,
                "weight_powers": {},
            }
        return cls._store[key]


class TorusGrid:
    """Uniform collocation grid on ``[0, 2*pi)^dim`` with n modes per axis.

    ``n`` must be even and at least 4 (Hermitian symmetry and the 2/3
    dealiasing rule both need it).
    """

    __slots__ = ("dim", "n", "_arrays")

    def __init__(self, dim: int, n: int):
        if dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
        if n < 4 or n % 2 != 0:
            raise ValueError(f"n_per_axis must be even and >= 4, got {n}")
        self.dim = dim
        self.n = n
        self._arrays = _GridCache.get(dim, n)

    # wavenumber helpers -------------------------------------------------
    @property
    def k_axes(self) -> tuple[np.ndarray, ...]:
        return self._arrays["axes"]

    @property
    def ksq(self) -> np.ndarray:
        return self._arrays["ksq"]

    @property
    def kinf(self) -> np.ndarray:
        return self._arrays["kinf"]

    @property
    def dealias_mask(self) -> np.ndarray:
        return self._arrays["dealias_mask"]

    @property
    def dealias_cutoff(self) -> int:
        return self.n // 3

    @property
    def nyquist(self) -> int:
        return self.n // 2

    @property
    def mode_count(self) -> int:
        return self.n**self.dim

    def sobolev_weight(self, s: float) -> np.ndarray:
        """(1+|k|^2)^s, cached per exponent."""
        powers = self._arrays["weight_powers"]
        key = float(s)
        if key not in powers:
            powers[key] = self._arrays["weight"] ** key
        return powers[key]

    def reverse_index(self):
        return self._arrays["reverse"]

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Collocation point coordinate arrays (sparse meshgrid)."""
        x = np.arange(self.n) * (2.0 * np.pi / self.n)
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij", sparse=True))

    def __eq__(self, other):
        return isinstance(other, TorusGrid) and (self.dim, self.n) == (other.dim, other.n)

    def __hash__(self):
        return hash((self.dim, self.n))

    def __repr__(self):
        return f"TorusGrid(dim={self.dim}, n={self.n})"


class SpectralField:
    """A real field on the torus stored as complex Fourier coefficients.

    ``coeffs`` has shape ``(components, n, ..., n)`` with ``dim`` spatial axes
    in numpy fft ordering.
    """

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: TorusGrid, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        expected_tail = (grid.n,) * grid.dim
        if coeffs.ndim == grid.dim:
            coeffs = coeffs[np.newaxis]
        if coeffs.ndim != grid.dim + 1 or coeffs.shape[1:] != expected_tail:
            raise GridMismatchError(
                f"coefficient shape {coeffs.shape} incompatible with {grid!r}"
            )
        self.grid = grid
        self.coeffs = coeffs

    # constructors -------------------------------------------------------
    @classmethod
    def zeros(cls, grid: TorusGrid, components: int = 1) -> "SpectralField":
        return cls(grid, np.zeros((components,) + (grid.n,) * grid.dim, dtype=np.complex128))

    @classmethod
    def from_physical(cls, grid: TorusGrid, values: np.ndarray) -> "SpectralField":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == grid.dim:
            values = values[np.newaxis]
        spatial = tuple(range(1, grid.dim + 1))
        coeffs = np.fft.fftn(values, axes=spatial) / grid.mode_count
        return cls(grid, coeffs)

    @classmethod
    def from_modes(
        cls, grid: TorusGrid, modes: Iterable[tuple[tuple[int, ...], int, complex]]
    ) -> "SpectralField":
        """Build a field from (wavevector, component, coefficient) triples.

        The conjugate partner at ``-k`` is filled in automatically.
        """
        entries = list(modes)
        ncomp = max(c for _, c, _ in entries) + 1 if entries else 1
        f = cls.zeros(grid, ncomp)
        for k, comp, val in entries:
            k = tuple(int(ki) for ki in (k if isinstance(k, tuple) else (k,)))
            idx = tuple(ki % grid.n for ki in k)
            ridx = tuple((-ki) % grid.n for ki in k)
            f.coeffs[(comp,) + idx] = val
            f.coeffs[(comp,) + ridx] = np.conj(val)
        return f

    # basic queries --------------------------------------------------------
    @property
    def components(self) -> int:
        return self.coeffs.shape[0]

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.coeffs).all())

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def to_physical(self) -> np.ndarray:
        spatial = tuple(range(1, self.grid.dim + 1))
        return np.real(np.fft.ifftn(self.coeffs, axes=spatial)) * self.grid.mode_count

    def hermitian_defect(self) -> float:
        rev = self.grid.reverse_index()
        mirrored = np.conj(self.coeffs[(slice(None),) + rev])
        return float(np.max(np.abs(self.coeffs - mirrored))) if self.coeffs.size else 0.0

    def symmetrized(self) -> "SpectralField":
        """Project onto the Hermitian-symmetric (real-field) subspace."""
        rev = self.grid.reverse_index()
        mirrored = np.conj(self.coeffs[(slice(None),) + rev])
        return SpectralField(self.grid, 0.5 * (self.coeffs + mirrored))

    # arithmetic (value semantics) ----------------------------------------
    def _check_compatible(self, other: "SpectralField"):
        if self.grid != other.grid or self.components != other.components:
            raise GridMismatchError(
                f"incompatible fields: {self.grid!r}/{self.components} vs "
                f"{other.grid!r}/{other.components}"
            )

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def __repr__(self):
        return f"SpectralField({self.grid!r}, components={self.components})"


@dataclass(frozen=True)
class SpaceLadder:
    """The four Sobolev exponents of the compactly embedded ladder G, F0, F1, D.

    The interpolation exponent ``m`` is tied to the ladder by
    ``s_F0 = m*s_F1 + (1-m)*s_G``; if omitted it is derived from the
    exponents, if given it is checked.
    """

    s_G: float
    s_F0: float
    s_F1: float
    s_D: float
    m: float | None = None
    C_interp: float = 1.0

    def __post_init__(self):
        if not (self.s_G < self.s_F0 < self.s_F1 < self.s_D):
            raise ValueError(
                f"ladder exponents must increase strictly: "
                f"{self.s_G}, {self.s_F0}, {self.s_F1}, {self.s_D}"
            )
        m = (self.s_F0 - self.s_G) / (self.s_F1 - self.s_G)
        if self.m is None:
            object.__setattr__(self, "m", m)
        elif abs(self.m - m) > 1e-12:
            raise ValueError(
                f"interpolation exponent {self.m} violates the relation "
                f"s_F0 = m*s_F1 + (1-m)*s_G (expected m={m})"
            )

    def exponent(self, space: str) -> float:
        try:
            return {"G": self.s_G, "F0": self.s_F0, "F1": self.s_F1, "D": self.s_D}[space]
        except KeyError:
            raise ValueError(f"unknown ladder space {space!r}") from None

    def norm(self, f: "SpectralField", space: str) -> float:
        return sobolev_norm(f, self.exponent(space))


@dataclass(frozen=True)
class GalerkinProjector:
    """Truncation to the modes with ``|k|_inf <= cutoff``."""

    cutoff: int

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValueError(f"cutoff must be positive, got {self.cutoff}")


def sobolev_norm(f: SpectralField, s: float) -> float:
    """H^s norm, ``sqrt(sum_k (1+|k|^2)^s |fhat_k|^2)`` over all components.

    Raises :class:`NonFiniteFieldError` on NaN/Inf coefficients.
    """
    if not f.is_finite():
        raise NonFiniteFieldError("field has non-finite coefficients")
    w = f.grid.sobolev_weight(s)
    return float(np.sqrt(np.sum(w * (f.coeffs.real**2 + f.coeffs.imag**2))))


def inner_product(a: SpectralField, b: SpectralField, s: float) -> float:
    """Real H^s inner product; ``inner_product(a, a, s) == sobolev_norm(a, s)**2``."""
    a._check_compatible(b)
    w = a.grid.sobolev_weight(s)
    return float(np.sum(w * (a.coeffs.real * b.coeffs.real + a.coeffs.imag * b.coeffs.imag)))


def duality_pairing(a: SpectralField, b: SpectralField, ladder: SpaceLadder, i: int = 0) -> float:
    """The (D, G) duality pairing, defined as the F_i inner product.

    This is deliberately the same code path as :func:`inner_product` so the
    two agree bitwise.
    """
    if i not in (0, 1):
        raise ValueError("i selects F0 (0) or F1 (1)")
    return inner_product(a, b, ladder.s_F0 if i == 0 else ladder.s_F1)


def galerkin_project(f: SpectralField, p: GalerkinProjector) -> SpectralField:
    """Zero every coefficient with ``|k|_inf > cutoff``. Idempotent, norm contracting."""
    if p.cutoff > f.grid.nyquist:
        raise ValueError(
            f"cutoff {p.cutoff} exceeds the Nyquist limit {f.grid.nyquist} of {f.grid!r}"
        )
    mask = f.grid.kinf <= p.cutoff
    return SpectralField(f.grid, f.coeffs * mask)


def dealias(f: SpectralField) -> SpectralField:
    """2/3-rule truncation: zero modes with ``|k|_inf > floor(n/3)``."""
    return SpectralField(f.grid, f.coeffs * f.grid.dealias_mask)


def interpolation_check(f: SpectralField, ladder: SpaceLadder) -> tuple[float, float]:
    """Both sides of ``||f||_F0 <= C * ||f||_F1^m * ||f||_G^(1-m)``.

    Returns ``(lhs, rhs)`` for audit logging; with ``C_interp = 1`` and the
    exponent relation in force, ``lhs <= rhs`` up to rounding.
    """
    lhs = sobolev_norm(f, ladder.s_F0)
    n1 = sobolev_norm(f, ladder.s_F1)
    ng = sobolev_norm(f, ladder.s_G)
    rhs = ladder.C_interp * n1**ladder.m * ng ** (1.0 - ladder.m)
    return lhs, rhs


def random_field(
    grid: TorusGrid,
    components: int,
    decay_exponent: float,
    amplitude: float,
    seed,
    zero_mean: bool = False,
    ladder: SpaceLadder | None = None,
) -> SpectralField:
    """Hermitian random field with ``|fhat_k| ~ amplitude * (1+|k|^2)^(-decay/2)``.

    Phases are seeded and uniform; the same seed always produces the same
    field.  When a ladder is supplied the tail condition
    ``decay_exponent > dim/2 + s_D`` (coefficient-sum membership in D) is
    enforced.
    """
    if ladder is not None and decay_exponent <= grid.dim / 2.0 + ladder.s_D:
        raise ValueError(
            f"decay_exponent {decay_exponent} too small for membership in D: "
            f"need > dim/2 + s_D = {grid.dim / 2.0 + ladder.s_D}"
        )
    rng = np.random.default_rng(seed)
    shape = (components,) + (grid.n,) * grid.dim
    phases = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    envelope = amplitude * (1.0 + grid.ksq) ** (-decay_exponent / 2.0)
    f = SpectralField(grid, envelope * np.exp(1j * phases)).symmetrized()
    if zero_mean:
        f.coeffs[(slice(None),) + (0,) * grid.dim] = 0.0
    return f


# --- snapshot persistence -------------------------------------------------
#
# Layout (numpy .npz): "dim", "n_per_axis", "components" as scalar int arrays
# and "coeffs" as the complex coefficient array with shape
# (components, n, ..., n), spatial axes in numpy fft ordering (row-major).
# Round trips are bit-exact.


def save_field(path, f: SpectralField) -> None:
    np.savez(
        path,
        dim=np.int64(f.grid.dim),
        n_per_axis=np.int64(f.grid.n),
        components=np.int64(f.components),
        coeffs=f.coeffs,
    )


def load_field(path) -> SpectralField:
    with np.load(path) as data:
        grid = TorusGrid(int(data["dim"]), int(data["n_per_axis"]))
        coeffs = data["coeffs"]
        if coeffs.shape[0] != int(data["components"]):
            raise ValueError(f"snapshot corrupt: component mismatch in {path}")
        return SpectralField(grid, coeffs.copy())
