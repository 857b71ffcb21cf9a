"""Drift operators for the fluid models and their ladder defaults.

Six tagged kinds are provided:

==============  ====  ============  =====================================
kind            dim   components    drift
==============  ====  ============  =====================================
Burgers1D       1     1             -u u_x            (+ nu u_xx)
Burgers2D       2     2             -(u.grad)u        (+ nu Lap u)
RSW_Viscous     2     3 (v1,v2,h)   rotating shallow water with viscosity
RSW_Inviscid    2     3             same without viscosity
Vorticity2D     2     1             -(u.grad)w        (+ nu Lap w)
Vorticity3D     3     3             -[(u.grad)w - (w.grad)u] (+ nu Lap w)
==============  ====  ============  =====================================

The velocity in the vorticity models comes from the Biot-Savart inversion
``u = -curl Lap^-1 w`` (zero-mean, divergence free).  All quadratic terms are
evaluated pseudo-spectrally with 2/3 dealiasing, which keeps the quadratic
convolution exact on the retained modes; that exactness is what the
enstrophy / energy conservation tests rely on.

Shallow water note: the momentum state is used directly as the advected
velocity.  A rotation vector potential with ``curl R = f zhat`` and zero
gradient does not exist periodically, so the Coriolis force is applied in its
standard form ``-f zhat x u`` and the change of variables is regarded as a
diagnostic relabelling only.  The Rossby and Froude numbers enter through the
pressure ``p = (h - b) / (rossby * froude)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .spectral import (
    GridMismatchError,
    SpaceLadder,
    SpectralField,
    TorusGrid,
    dealias,
    inner_product,
    sobolev_norm,
)

MODEL_KINDS = (
    "Burgers1D",
    "Burgers2D",
    "RSW_Viscous",
    "RSW_Inviscid",
    "Vorticity2D",
    "Vorticity3D",
    "Heat1D",
)

_KIND_DIM = {
    "Burgers1D": 1,
    "Burgers2D": 2,
    "RSW_Viscous": 2,
    "RSW_Inviscid": 2,
    "Vorticity2D": 2,
    "Vorticity3D": 3,
    "Heat1D": 1,
}

_KIND_COMPONENTS = {
    "Burgers1D": 1,
    "Burgers2D": 2,
    "RSW_Viscous": 3,
    "RSW_Inviscid": 3,
    "Vorticity2D": 1,
    "Vorticity3D": 3,
    "Heat1D": 1,
}


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters; unused entries are ignored by the other kinds.

    ``nu`` is the (momentum) viscosity, ``eta`` the height diffusivity of the
    shallow water model, ``f_coriolis`` the rotation rate, ``rossby`` and
    ``froude`` the dimensionless numbers entering the pressure, ``topography``
    an optional band-limited bottom profile and ``epsilon_sobolev`` the free
    exponent offset of the inviscid-vorticity ladder (F0 = H^(3/2+eps)).
    """

    nu: float = 0.0
    eta: float = 0.0
    f_coriolis: float = 1.0
    rossby: float = 1.0
    froude: float = 1.0
    topography: SpectralField | None = None
    epsilon_sobolev: float = 0.1

    def __post_init__(self):
        if self.rossby <= 0 or self.froude <= 0:
            raise ValueError("rossby and froude numbers must be positive")
        if self.nu < 0 or self.eta < 0:
            raise ValueError("viscosities must be nonnegative")


def default_ladder(kind: str, params: ModelParams | None = None) -> SpaceLadder:
    """Per-kind Sobolev exponents of the four-space ladder."""
    params = params or ModelParams()
    if kind in ("Burgers1D", "Burgers2D", "RSW_Inviscid"):
        return SpaceLadder(0.0, 1.0, 3.0, 4.0)
    if kind == "RSW_Viscous":
        return SpaceLadder(0.0, 1.0, 2.0, 3.0)
    if kind in ("Vorticity2D", "Vorticity3D"):
        if params.nu > 0:
            return SpaceLadder(0.0, 2.0, 3.0, 4.0)
        return SpaceLadder(0.0, 1.5 + params.epsilon_sobolev, 3.0, 4.0)
    if kind == "Heat1D":
        return SpaceLadder(0.0, 1.0, 2.0, 3.0)
    raise ValueError(f"unknown model kind {kind!r}")


# --- spectral calculus helpers ---------------------------------------------


def _derivative_coeffs(f: SpectralField, axis: int) -> np.ndarray:
    return 1j * f.grid.k_axes[axis] * f.coeffs


def _to_phys(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    spatial = tuple(range(1, grid.dim + 1))
    return np.real(np.fft.ifftn(coeffs, axes=spatial)) * grid.mode_count


def _to_spec(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    spatial = tuple(range(1, grid.dim + 1))
    return np.fft.fftn(values, axes=spatial) / grid.mode_count


def advective_term(vel: SpectralField, f: SpectralField) -> SpectralField:
    """Dealiased (vel . grad) f, computed pseudo-spectrally.

    Inputs are truncated by the 2/3 rule before the physical-space product, so
    the retained output modes carry the exact convolution.
    """
    grid = f.grid
    vel_d = dealias(vel)
    f_d = dealias(f)
    vel_phys = _to_phys(grid, vel_d.coeffs)
    out_phys = np.zeros((f.components,) + (grid.n,) * grid.dim)
    for a in range(grid.dim):
        df = _to_phys(grid, _derivative_coeffs(f_d, a))
        out_phys += vel_phys[a][np.newaxis] * df
    return dealias(SpectralField(grid, _to_spec(grid, out_phys))).symmetrized()


def product_field(a: SpectralField, b: SpectralField) -> SpectralField:
    """Dealiased pointwise product of two scalar-per-component fields."""
    a._check_compatible(b)
    grid = a.grid
    pa = _to_phys(grid, dealias(a).coeffs)
    pb = _to_phys(grid, dealias(b).coeffs)
    return dealias(SpectralField(grid, _to_spec(grid, pa * pb))).symmetrized()


def laplacian(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, -f.grid.ksq * f.coeffs)


def divergence(f: SpectralField) -> SpectralField:
    grid = f.grid
    if f.components != grid.dim:
        raise GridMismatchError("divergence needs one component per spatial axis")
    out = np.zeros((1,) + (grid.n,) * grid.dim, dtype=np.complex128)
    for a in range(grid.dim):
        out[0] += 1j * grid.k_axes[a] * f.coeffs[a]
    return SpectralField(grid, out)


def gradient(f: SpectralField) -> SpectralField:
    """Gradient of a scalar field, one output component per axis."""
    grid = f.grid
    if f.components != 1:
        raise GridMismatchError("gradient expects a scalar field")
    out = np.concatenate([1j * grid.k_axes[a] * f.coeffs for a in range(grid.dim)], axis=0)
    return SpectralField(grid, out)


def curl(f: SpectralField) -> SpectralField:
    """Curl: scalar in 2D (dx u2 - dy u1), vector in 3D."""
    grid = f.grid
    k = grid.k_axes
    if grid.dim == 2 and f.components == 2:
        out = 1j * k[0] * f.coeffs[1:2] - 1j * k[1] * f.coeffs[0:1]
        return SpectralField(grid, out)
    if grid.dim == 3 and f.components == 3:
        cx = 1j * k[1] * f.coeffs[2] - 1j * k[2] * f.coeffs[1]
        cy = 1j * k[2] * f.coeffs[0] - 1j * k[0] * f.coeffs[2]
        cz = 1j * k[0] * f.coeffs[1] - 1j * k[1] * f.coeffs[0]
        return SpectralField(grid, np.stack([cx, cy, cz]))
    raise GridMismatchError("curl defined for 2D 2-component or 3D 3-component fields")


def biot_savart(omega: SpectralField, div_tol: float = 1e-8) -> SpectralField:
    """Velocity with ``curl u = omega``, ``div u = 0`` and zero mean.

    2D: scalar vorticity -> streamfunction ``psi`` with ``Lap psi = omega``,
    ``u = (-dy psi, dx psi)``.  3D: ``uhat = i k x what / |k|^2``.  The mean
    mode of omega is dropped (the inversion is defined on zero-mean fields)
    and the mean of u is zero.  A 3D input whose divergence is not negligible
    relative to its size is rejected.
    """
    grid = omega.grid
    ksq = grid.ksq.copy()
    zero = (0,) * grid.dim
    ksq[zero] = 1.0  # avoid 0/0; the k=0 mode is zeroed below
    if grid.dim == 2:
        if omega.components != 1:
            raise GridMismatchError("2D vorticity must be scalar")
        psi = -omega.coeffs[0] / ksq  # Lap psi = omega
        k = grid.k_axes
        u = np.stack([-1j * k[1] * psi, 1j * k[0] * psi])
        u[:, 0, 0] = 0.0
        return SpectralField(grid, u)
    if grid.dim == 3:
        if omega.components != 3:
            raise GridMismatchError("3D vorticity must have three components")
        scale = float(np.max(np.abs(omega.coeffs))) or 1.0
        div = divergence(omega)
        if float(np.max(np.abs(div.coeffs))) > div_tol * scale:
            raise ValueError("3D vorticity input is not divergence free")
        k = grid.k_axes
        w = omega.coeffs
        ux = 1j * (k[1] * w[2] - k[2] * w[1]) / ksq
        uy = 1j * (k[2] * w[0] - k[0] * w[2]) / ksq
        uz = 1j * (k[0] * w[1] - k[1] * w[0]) / ksq
        u = np.stack([ux, uy, uz])
        u[:, 0, 0, 0] = 0.0
        return SpectralField(grid, u)
    raise GridMismatchError("Biot-Savart inversion is 2D or 3D")


def _leray_project(f: SpectralField) -> SpectralField:
    """Remove the compressible part: fhat -> fhat - k (k.fhat)/|k|^2."""
    grid = f.grid
    ksq = grid.ksq.copy()
    ksq[(0,) * grid.dim] = 1.0
    k = grid.k_axes
    kdot = sum(k[a] * f.coeffs[a] for a in range(grid.dim)) / ksq
    out = np.stack([f.coeffs[a] - k[a] * kdot for a in range(grid.dim)])
    return SpectralField(grid, out)


# --- the drifts -------------------------------------------------------------


def burgers_drift(u: SpectralField, nu: float = 0.0) -> SpectralField:
    """-(u.grad)u + nu*Lap u with exact spectral derivatives."""
    out = -1.0 * advective_term(u, u)
    if nu > 0.0:
        out = out + nu * laplacian(u)
    return out


def vorticity_drift(omega: SpectralField, nu: float = 0.0) -> SpectralField:
    """-[(u.grad)w - (w.grad)u] + nu*Lap w, velocity via Biot-Savart.

    The stretching term drops in 2D.  In 3D the output is re-projected onto
    divergence-free fields to stop rounding drift of ``div w``.
    """
    u = biot_savart(omega)
    out = -1.0 * advective_term(u, omega)
    if omega.grid.dim == 3:
        out = out + advective_term(omega, u)
        out = _leray_project(out)
    if nu > 0.0:
        out = out + nu * laplacian(omega)
    return out


def rsw_drift(state: SpectralField, params: ModelParams, viscous: bool) -> SpectralField:
    """Rotating shallow water tendency for the state (v1, v2, h).

    Momentum: ``-(u.grad)u - f zhat x u - grad p (+ gamma Lap u)`` with
    ``p = (h - b)/(rossby*froude)``; height: ``-div(h u) (+ eta Lap h)``.
    The height tendency has zero mean exactly (divergence on the torus).
    """
    if state.components != 3:
        raise GridMismatchError("shallow water state must be (v1, v2, h)")
    grid = state.grid
    u = SpectralField(grid, state.coeffs[0:2])
    h = SpectralField(grid, state.coeffs[2:3])

    mom = -1.0 * advective_term(u, u)
    f = params.f_coriolis
    zcross = np.stack([-f * u.coeffs[1], f * u.coeffs[0]])
    mom = mom + SpectralField(grid, -zcross)
    p_coeffs = h.coeffs.copy()
    if params.topography is not None:
        p_coeffs = p_coeffs - params.topography.coeffs
    p = SpectralField(grid, p_coeffs / (params.rossby * params.froude))
    mom = mom + -1.0 * gradient(p)

    flux = product_field(SpectralField(grid, np.broadcast_to(h.coeffs, u.coeffs.shape)), u)
    hgt = -1.0 * divergence(flux)

    if viscous:
        mom = mom + params.nu * laplacian(u)
        hgt = hgt + params.eta * laplacian(h)
    return SpectralField(grid, np.concatenate([mom.coeffs, hgt.coeffs]))


class FourierMultiplierDrift:
    """Linear drift ``A(X) = symbol(|k|^2) * X`` (heat equation, scalar tests).

    ``symbol`` maps the |k|^2 array to a multiplier array, e.g.
    ``lambda ksq: -ksq`` for the Laplacian or ``lambda ksq: a`` for the scalar
    exponential-growth equation.
    """

    def __init__(self, ladder: SpaceLadder, symbol: Callable[[np.ndarray], np.ndarray]):
        self.ladder = ladder
        self.symbol = symbol
        self.kind = "FourierMultiplier"

    def __call__(self, X: SpectralField) -> SpectralField:
        return SpectralField(X.grid, self.symbol(X.grid.ksq) * X.coeffs)

    def check_state(self, X: SpectralField) -> list[str]:
        return []


@dataclass(frozen=True)
class DriftOperator:
    """Tagged drift descriptor; immutable, shareable across ensemble workers."""

    kind: str
    params: ModelParams = field(default_factory=ModelParams)
    ladder: SpaceLadder | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.kind in ("RSW_Inviscid",) and (self.params.nu != 0.0 or self.params.eta != 0.0):
            raise ValueError("inviscid shallow water requires nu = eta = 0")
        if self.ladder is None:
            object.__setattr__(self, "ladder", default_ladder(self.kind, self.params))

    @property
    def dim(self) -> int:
        return _KIND_DIM[self.kind]

    @property
    def components(self) -> int:
        return _KIND_COMPONENTS[self.kind]

    def with_viscosity(self, nu: float) -> "DriftOperator":
        return replace(self, params=replace(self.params, nu=nu))

    def _check_input(self, X: SpectralField):
        if X.grid.dim != self.dim or X.components != self.components:
            raise GridMismatchError(
                f"{self.kind} expects dim={self.dim}, components={self.components}; "
                f"got dim={X.grid.dim}, components={X.components}"
            )

    def __call__(self, X: SpectralField) -> SpectralField:
        self._check_input(X)
        if self.kind in ("Burgers1D", "Burgers2D"):
            return burgers_drift(X, self.params.nu)
        if self.kind in ("Vorticity2D", "Vorticity3D"):
            return vorticity_drift(X, self.params.nu)
        if self.kind == "RSW_Viscous":
            return rsw_drift(X, self.params, viscous=True)
        if self.kind == "RSW_Inviscid":
            return rsw_drift(X, self.params, viscous=False)
        if self.kind == "Heat1D":
            return SpectralField(X.grid, -max(self.params.nu, 1.0) * X.grid.ksq * X.coeffs)
        raise AssertionError(self.kind)

    def check_state(self, X: SpectralField) -> list[str]:
        """Model-specific state warnings, recorded on the trajectory."""
        if self.kind in ("RSW_Viscous", "RSW_Inviscid"):
            h_phys = _to_phys(X.grid, X.coeffs[2:3])
            if float(h_phys.min()) <= 0.0:
                return ["height_nonpositive"]
        return []


def dissipation_term(a: SpectralField, s: float) -> float:
    """The exact H^s pairing deficit of the Laplacian: -<a, Lap a>_{H^s} >= 0.

    Equals ``sum_k (1+|k|^2)^s |k|^2 |ahat_k|^2``; adding viscosity ``nu``
    to any drift changes the H^s self-pairing by exactly ``-nu`` times this.
    """
    w = a.grid.sobolev_weight(s) * a.grid.ksq
    return float(np.sum(w * (a.coeffs.real**2 + a.coeffs.imag**2)))


# --- assumption audits -------------------------------------------------------


@dataclass
class AssumptionConstants:
    """Fitted/audited constants of the drift growth assumptions.

    ``C1, gamma1, C2`` describe the F0 self-pairing split
    ``<a, A(a)>_F0 <= C1 ||a||_F0^gamma1 - C2 ||a||_F1^2``;
    ``gamma2`` the D-pairing exponent pair (with gamma1 on F1);
    ``C3, gamma_sup1, gamma_sup2`` the growth bound on ``||A(a)||_G``;
    ``gamma13`` the F1 self-pairing exponent on the F0 norm;
    ``alpha_emb, beta_emb`` the interpolation exponents of the ladder.
    Signs are recorded as fitted (C2 may be negative for inviscid kinds).
    """

    C1: float = 0.0
    C2: float = 0.0
    C3: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    gamma_sup1: float = 0.0
    gamma_sup2: float = 0.0
    gamma13: float = 0.0
    alpha_emb: float = 0.0
    beta_emb: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in self.__dict__.items()}


@dataclass
class AssumptionReport:
    """All pairings, norms and candidate ratios for one sample field."""

    norm_G: float
    norm_F0: float
    norm_F1: float
    norm_D: float
    pair_G: float
    pair_F0: float
    pair_F1: float
    pair_D: float
    norm_A_G: float
    ratio_F1_incompressible: float
    ratio_D_inviscid: float
    dissipation_F0: float

    def as_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in self.__dict__.items()}


def drift_pairing_report(a: SpectralField, A: DriftOperator) -> AssumptionReport:
    """Evaluate every pairing and growth functional entering the audits.

    ``ratio_F1_incompressible`` is ``<a,A(a)>_F1 / (||a||_F0 ||a||_F1^2)``
    (the incompressible-form candidate with unit exponent) and
    ``ratio_D_inviscid`` is ``<a,A(a)>_D / (||a||_F1 ||a||_D^2)``.
    ``dissipation_F0`` is the exact viscous deficit ``nu * D_s(a)``.
    """
    lad = A.ladder
    Aa = A(a)
    nG = sobolev_norm(a, lad.s_G)
    n0 = sobolev_norm(a, lad.s_F0)
    n1 = sobolev_norm(a, lad.s_F1)
    nD = sobolev_norm(a, lad.s_D)
    pG = inner_product(a, Aa, lad.s_G)
    p0 = inner_product(a, Aa, lad.s_F0)
    p1 = inner_product(a, Aa, lad.s_F1)
    pD = inner_product(a, Aa, lad.s_D)
    nAG = sobolev_norm(Aa, lad.s_G)
    tiny = np.finfo(float).tiny
    return AssumptionReport(
        norm_G=nG,
        norm_F0=n0,
        norm_F1=n1,
        norm_D=nD,
        pair_G=pG,
        pair_F0=p0,
        pair_F1=p1,
        pair_D=pD,
        norm_A_G=nAG,
        ratio_F1_incompressible=p1 / max(n0 * n1**2, tiny),
        ratio_D_inviscid=pD / max(n1 * nD**2, tiny),
        dissipation_F0=A.params.nu * dissipation_term(a, lad.s_F0),
    )


def lipschitz_quotient(A: DriftOperator, a: SpectralField, b: SpectralField) -> float:
    """||A(a)-A(b)||_G / ((1 + ||a||_F1 + ||b||_F1) ||a-b||_F0)."""
    lad = A.ladder
    num = sobolev_norm(A(a) - A(b), lad.s_G)
    den = (1.0 + sobolev_norm(a, lad.s_F1) + sobolev_norm(b, lad.s_F1)) * sobolev_norm(
        a - b, lad.s_F0
    )
    return num / max(den, np.finfo(float).tiny)
