"""Taming noise, scalar Wiener machinery and the 1D SDE laboratory.

The stochastic term is the rank-one superlinear multiplier

    B(X) = theta * ||X||_{F_i}^alpha * X,

driven by a single scalar Brownian motion.  Because B(X) points along X, the
Hilbert-Schmidt norm of the noise collapses to ``||B(X)||_{F_i}`` and every
norm identity used by the envelope computations holds verbatim, e.g.
``||B(X)||_{F_i}^2 = theta^2 ||X||_{F_i}^(2*alpha+2)``.

Three regimes pair the space of the initial state with the norm entering the
noise:

* case I   - X0 in F0, noise norm F0 (viscous compressible models),
* case II  - X0 in D,  noise norm F1 (inviscid compressible models),
* case III - X0 in F1, noise norm F0 (incompressible models).

The 1D laboratory holds the geometric Brownian motion with its explicit
solution ``f_t = f0 exp((a - b^2/2) t + b W_t)`` (decay to zero exactly when
``b^2 > 2a``, strict), the classical scale function

    s(x) = int_c^x exp(-int_c^y 2 mu(z)/sigma(z)^2 dz) dy,

and the martingale diagnostics M_t, <M>_t with the pathwise record

    E(eps) = sup_t (M_t - eps/2 <M>_t),

which for a driftless Brownian integrand is Exp(eps)-distributed.

The tail estimate for a continuous local martingale Y vanishing at zero is
implemented in its decaying form ``P(sup Y >= x, <Y> <= y) <= exp(-x^2/(2y))``
from the classical source; the inequality is used with Brownian oracles in the
Monte Carlo suites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .spectral import SpaceLadder, SpectralField, sobolev_norm

CASE_NOISE_SPACE = {"I": "F0", "II": "F1", "III": "F0"}
CASE_INITIAL_SPACE = {"I": "F0", "II": "D", "III": "F1"}
_SPACE_RANK = {"G": 0, "F0": 1, "F1": 2, "D": 3}


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


@dataclass(frozen=True)
class NoiseSpec:
    """Strength theta, superlinearity alpha and the ladder norm in B(X).

    ``theta = 0`` reduces the stochastic equation to the deterministic one
    exactly.  The case label is tied to the norm space: F1 forces case II,
    F0 leaves I or III (distinguished by where the initial state lives).
    """

    theta: float
    alpha: float
    norm_space: str = "F0"
    case_label: str = "I"

    def __post_init__(self):
        if self.theta < 0 or self.alpha < 0:
            raise ValueError("theta and alpha must be nonnegative")
        if self.case_label not in CASE_NOISE_SPACE:
            raise ValueError(f"case_label must be I, II or III, got {self.case_label!r}")
        expected = CASE_NOISE_SPACE[self.case_label]
        if self.norm_space != expected:
            raise ValueError(
                f"case {self.case_label} takes the noise norm in {expected}, "
                f"not {self.norm_space}"
            )

    @property
    def required_initial_space(self) -> str:
        return CASE_INITIAL_SPACE[self.case_label]

    def admits_initial_space(self, declared: str) -> bool:
        """True when a state declared in ``declared`` qualifies for this case."""
        if declared not in _SPACE_RANK:
            raise ValueError(f"unknown ladder space {declared!r}")
        return _SPACE_RANK[declared] >= _SPACE_RANK[self.required_initial_space]


def noise_coefficient(X: SpectralField, spec: NoiseSpec, ladder: SpaceLadder) -> SpectralField:
    """B(X) = theta * ||X||_{F_i}^alpha * X."""
    if spec.theta == 0.0:
        return SpectralField.zeros(X.grid, X.components)
    norm = sobolev_norm(X, ladder.exponent(spec.norm_space))
    return (spec.theta * norm**spec.alpha) * X


def noise_pairing(X: SpectralField, spec: NoiseSpec, ladder: SpaceLadder, s: float) -> float:
    """<X, B(X)>_{H^s} = theta ||X||_{F_i}^alpha ||X||_{H^s}^2 without forming B."""
    if spec.theta == 0.0:
        return 0.0
    norm_i = sobolev_norm(X, ladder.exponent(spec.norm_space))
    return spec.theta * norm_i**spec.alpha * sobolev_norm(X, s) ** 2


# --- scalar Wiener path with dyadic bridge refinement -----------------------


class WienerPath:
    """Scalar Brownian increments on the dyadic refinements of a base grid.

    ``increment(i, level)`` returns W((i+1)h) - W(ih) with
    ``h = dt_base * 2^-level``.  Base increments and every bridge midpoint
    draw are keyed by ``(seed, interval, level, offset)``, so values do not
    depend on the order in which they are requested, refinement never changes
    an already-delivered increment, and identical seeds give identical paths.
    Children reconstruct their parent to within one float rounding per split
    (the split itself is deterministic, so repeated queries are bit-equal).
    """

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int, dt_base: float):
        if dt_base <= 0:
            raise ValueError("dt_base must be positive")
        self.seed = int(seed)
        self.dt_base = float(dt_base)
        self._cache: dict[tuple[int, int, int], float] = {}

    @classmethod
    def _mix(cls, x: int) -> int:
        # splitmix64 finaliser: cheap, well-distributed counter hash
        x = (x + 0x9E3779B97F4A7C15) & cls._MASK
        x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & cls._MASK
        x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & cls._MASK
        return x ^ (x >> 31)

    def _noise(self, base: int, level: int, offset: int) -> float:
        """Standard normal keyed by (seed, base, level, offset).

        Counter-based: two chained splitmix64 words feed a Box-Muller pair,
        so the value never depends on evaluation order.
        """
        h = self._mix(self.seed & self._MASK)
        for word in (base, level, offset):
            h = self._mix(h ^ (word & self._MASK))
        u1 = (self._mix(h) >> 11) * 2.0**-53
        u2 = (self._mix(h ^ 0xD1B54A32D192ED03) >> 11) * 2.0**-53
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        return r * math.cos(2.0 * math.pi * u2)

    def increment(self, index: int, level: int = 0) -> float:
        if level < 0 or index < 0:
            raise ValueError("index and level must be nonnegative")
        base = index >> level
        offset = index - (base << level)
        return self._value(base, level, offset)

    def _value(self, base: int, level: int, offset: int) -> float:
        key = (base, level, offset)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        if level == 0:
            val = math.sqrt(self.dt_base) * self._noise(base, 0, 0)
        else:
            parent = self._value(base, level - 1, offset >> 1)
            h = self.dt_base * 2.0**-level
            xi = self._noise(base, level, offset | 1)  # one draw per split
            half = 0.5 * parent + 0.5 * math.sqrt(h) * xi
            if offset & 1:
                val = parent - half
            else:
                val = half
        self._cache[key] = val
        return val

    def value_at(self, index: int, level: int = 0) -> float:
        """W(index * dt_base * 2^-level), summing increments from zero."""
        return sum(self.increment(i, level) for i in range(index))


# --- geometric Brownian motion lab ------------------------------------------


@dataclass(frozen=True)
class GbmSpec:
    """dX = a X dt + b X dW with X_0 = f0 > 0."""

    a: float
    b: float
    f0: float = 1.0

    def __post_init__(self):
        if self.f0 <= 0:
            raise ValueError("f0 must be positive")

    @property
    def decays(self) -> bool:
        return gbm_decay_criterion(self)


def gbm_exact(spec: GbmSpec, W_t: float, t: float):
    """f0 * exp((a - b^2/2) t + b W_t); vectorises over W_t."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be nonnegative")
    return spec.f0 * np.exp((spec.a - spec.b**2 / 2.0) * t + spec.b * np.asarray(W_t))


def gbm_decay_criterion(spec: GbmSpec) -> bool:
    """Almost-sure decay flag b^2 > 2a, strict (equality counts as no decay)."""
    return spec.b**2 > 2.0 * spec.a


# --- scale function -----------------------------------------------------------


@dataclass(frozen=True)
class ScaleFunctionSpec:
    """Drift mu(x), diffusion sigma(x) > 0 and the anchor point c."""

    mu: callable
    sigma: callable
    c: float = 1.0


def scale_function(spec: ScaleFunctionSpec, x: float, rel_tol: float = 1e-10) -> float:
    """s(x) = int_c^x exp(-int_c^y 2 mu/sigma^2) dy by adaptive quadrature.

    Strictly increasing with s(c) = 0.  Raises :class:`DomainError` when the
    diffusion coefficient vanishes anywhere on the integration interval.
    """
    lo, hi = sorted((spec.c, float(x)))
    if hi > lo:
        probe = np.linspace(lo, hi, 257)
        sig = np.asarray([spec.sigma(p) for p in probe], dtype=float)
        if np.any(sig <= 0.0) or not np.all(np.isfinite(sig)):
            raise DomainError("sigma must stay positive on the integration interval")

    def log_density(y: float) -> float:
        val, _ = integrate.quad(
            lambda z: 2.0 * spec.mu(z) / spec.sigma(z) ** 2,
            spec.c,
            y,
            epsrel=rel_tol,
            epsabs=0.0,
            limit=200,
        )
        return val

    result, _ = integrate.quad(
        lambda y: math.exp(-log_density(y)),
        spec.c,
        x,
        epsrel=rel_tol,
        epsabs=0.0,
        limit=200,
    )
    return result


def gbm_scale_closed_form(a: float, b: float, c: float, x: float) -> float:
    """Exact s(x) for mu = a z, sigma = b z: the integrand is (y/c)^(-2a/b^2)."""
    q = 2.0 * a / b**2
    if abs(q - 1.0) < 1e-14:
        return c * math.log(x / c)
    return c**q * (x ** (1.0 - q) - c ** (1.0 - q)) / (1.0 - q)


# --- martingale diagnostics ---------------------------------------------------


@dataclass
class MartingaleDiagnostics:
    """Running M_t, <M>_t and the record sup_t (M_t - eps/2 <M>_t).

    Owned by a single path simulation.  ``update`` consumes one increment of
    the stochastic term and of its quadratic variation; an optional
    ``intra_max`` supplies the exact within-step supremum of the compensated
    process (e.g. from Brownian-bridge sampling) when the caller has it.

    Any ``epsilon > 0`` is accepted here: the record E(eps) is
    Exp(eps)-distributed for a Brownian integrand at every positive epsilon,
    and the exponential-law study runs at eps = 1.  The envelope strategy
    itself needs eps < 1/2, which :func:`theta_advisor` enforces.
    """

    epsilon: float
    m: float = 0.0
    qv: float = 0.0
    record: float = 0.0

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")

    @property
    def compensated(self) -> float:
        return self.m - 0.5 * self.epsilon * self.qv

    def update(self, dM: float, d_qv: float, intra_max: float | None = None):
        if d_qv < 0:
            raise ValueError("quadratic variation increments are nonnegative")
        self.m += dM
        self.qv += d_qv
        candidate = self.compensated if intra_max is None else max(intra_max, self.compensated)
        if candidate > self.record:
            self.record = candidate
        return self

    def snapshot(self) -> tuple[float, float, float]:
        return (self.m, self.qv, self.record)


def track_martingale(
    diag: MartingaleDiagnostics, dM: float, d_qv: float, intra_max: float | None = None
) -> MartingaleDiagnostics:
    """Accumulate one (dM, d<M>) increment into the diagnostics."""
    return diag.update(dM, d_qv, intra_max)


def revuz_yor_bound(x: float, y: float) -> float:
    """exp(-x^2 / (2y)): tail bound for sup of a local martingale with <Y> <= y."""
    if x <= 0 or y <= 0:
        raise ValueError("x and y must be positive")
    return math.exp(-(x**2) / (2.0 * y))


# --- sufficient noise strength per case --------------------------------------


@dataclass(frozen=True)
class AdvisedNoise:
    """Advisor output: the noise spec plus the inequality it enforces."""

    theta: float
    alpha: float
    case_label: str
    inequality: str

    def spec(self) -> NoiseSpec:
        return NoiseSpec(
            theta=self.theta,
            alpha=self.alpha,
            norm_space=CASE_NOISE_SPACE[self.case_label],
            case_label=self.case_label,
        )


def theta_advisor(
    case: str,
    constants,
    epsilon: float,
    level: float = 2.0,
    offset: float = 1.0,
    alpha_margin: float = 0.25,
    theta_margin: float = 0.05,
) -> AdvisedNoise:
    """Smallest noise strength satisfying the case's sufficient condition.

    * case I: needs ``2*alpha > gamma1``; theta is the smallest value making
      the log-envelope drift numerator nonpositive for every norm value
      ``m >= level`` (with envelope offset C), i.e.

          theta^2 * ((1-2 eps) L^4 - C L^2) >= 2 C1 (C + L^2).

    * case II: the explicit choice ``theta = 2 C1 / (1/2 - eps)`` with
      ``2*alpha > gamma1 - 2``.

    * case III: ``2 C1 - 2 (1-eps) theta^2 < 0`` gives
      ``theta > sqrt(C1/(1-eps))`` (a strict inequality, hence the margin),
      and ``alpha = gamma13 / 2`` exactly.

    ``constants`` carries the audited C1/gamma values; C1 = 0 returns
    theta = 0 in every case.
    """
    if not 0.0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 1/2)")
    C1 = float(constants.C1)
    if C1 < 0:
        raise ValueError("C1 must be nonnegative")

    if case == "I":
        gamma1 = float(constants.gamma1)
        alpha = gamma1 / 2.0 + alpha_margin
        denom = (1.0 - 2.0 * epsilon) * level**4 - offset * level**2
        if denom <= 0:
            raise ValueError(
                f"reference level {level} too small for offset {offset}: "
                f"need level^2 > C/(1-2*eps)"
            )
        theta = math.sqrt(2.0 * C1 * (offset + level**2) / denom)
        ineq = (
            f"theta^2*((1-2*{epsilon})*{level}^4 - {offset}*{level}^2) >= "
            f"2*{C1}*({offset} + {level}^2) and 2*alpha > gamma1 = {gamma1}"
        )
    elif case == "II":
        gamma1 = float(constants.gamma1)
        alpha = max(0.0, (gamma1 - 2.0) / 2.0 + alpha_margin)
        theta = 2.0 * C1 / (0.5 - epsilon)
        ineq = f"theta = 2*C1/(1/2-eps) = 2*{C1}/{0.5 - epsilon} and 2*alpha > gamma1-2"
    elif case == "III":
        gamma13 = float(constants.gamma13)
        alpha = gamma13 / 2.0
        theta = 0.0 if C1 == 0.0 else math.sqrt(C1 / (1.0 - epsilon)) * (1.0 + theta_margin)
        ineq = f"2*{C1} - 2*(1-{epsilon})*theta^2 < 0 and alpha = gamma13/2 = {alpha}"
    else:
        raise ValueError(f"case must be I, II or III, got {case!r}")
    return AdvisedNoise(theta=theta, alpha=alpha, case_label=case, inequality=ineq)


# --- 1D SDE steppers (laboratory only) ----------------------------------------


def milstein_step_1d(x, mu, sigma, sigma_prime, dt: float, dW: float):
    """Scalar Milstein step; needs the diffusion derivative in closed form."""
    s = sigma(x)
    return x + mu(x) * dt + s * dW + 0.5 * s * sigma_prime(x) * (dW**2 - dt)


def tamed_em_step_1d(x, mu, sigma, dt: float, dW: float):
    """Scalar twin of the tamed field step: both increments are normalised."""
    m = mu(x)
    s = sigma(x)
    return x + dt * m / (1.0 + dt * abs(m)) + dW * s / (1.0 + dt * s * s)
