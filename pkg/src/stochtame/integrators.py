"""Time stepping for the projected stochastic equation and blow-up detection.

The projected dynamics is

    dX = A_d(X) dt + theta ||X||_{F_i}^alpha X dW,   A_d = T_d o A o T_d,

advanced with Euler-Maruyama, a tamed Euler-Maruyama variant (the default:
the superlinear noise breaks the global Lipschitz setting of plain EM, so
both increments are normalised),

    X' = X + dt*A_d(X)/(1 + dt ||A_d(X)||_G) + dW*B(X)/(1 + dt ||B(X)||_G^2),

or classical RK4 for the deterministic phases.  Step sizes halve whenever the
relative F0-norm growth in one step exceeds the trigger; the driving noise is
refined consistently through Brownian-bridge splitting, so halving never
changes the coarse increments of the path.

A path terminates with a blow-up record when the F0 norm crosses the
threshold or when adaptive halving hits ``dt_min`` (the discrete counterpart
of a finite maximal existence time with exploding F0 norm).  Non-finite
results that survive refinement terminate with a separate numeric-error
status.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .models import DriftOperator
from .noise import MartingaleDiagnostics, NoiseSpec, WienerPath
from .spectral import (
    GalerkinProjector,
    SpaceLadder,
    SpectralField,
    galerkin_project,
    sobolev_norm,
)

SCHEMES = ("EulerMaruyama", "TamedEulerMaruyama", "Milstein1D", "RK4Deterministic")

#: envelope space of the norm-squared Ito computation per case: cases I and II
#: control the F0 norm, case III controls the F1 norm.
ENVELOPE_SPACE = {"I": "F0", "II": "F0", "III": "F1"}


@dataclass(frozen=True)
class StepperConfig:
    """Scheme selection, base step, horizon and blow-up thresholds.

    ``dt_min`` defaults to ``dt * 2**-20``; ``blowup_threshold`` (on the F0
    norm) defaults to ``1e8 * (1 + ||X0||_F0)`` at run start.  The horizon is
    rounded to a whole number of base steps.
    """

    scheme: str = "TamedEulerMaruyama"
    dt: float = 1e-3
    t_end: float = 1.0
    dt_min: float | None = None
    adapt: bool = True
    growth_trigger: float = 0.10
    stiff_cap: float = 0.5
    blowup_threshold: float | None = None
    save_stride: int = 1
    field_stride: int | None = None
    mart_epsilon: float = 0.25

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.dt <= 0 or self.t_end < 0:
            raise ValueError("dt must be positive and t_end nonnegative")
        if self.dt_min is not None and not 0 < self.dt_min < self.dt:
            raise ValueError("dt_min must satisfy 0 < dt_min < dt")
        if self.save_stride < 1:
            raise ValueError("save_stride must be >= 1")

    @property
    def resolved_dt_min(self) -> float:
        return self.dt_min if self.dt_min is not None else self.dt * 2.0**-20

    @property
    def max_level(self) -> int:
        """Number of dyadic halvings available before dt_min is hit."""
        return max(0, int(math.floor(math.log2(self.dt / self.resolved_dt_min) + 1e-12)))


@dataclass
class TrajectoryRecord:
    """Time series of norms, regime labels and martingale diagnostics.

    ``status`` is "completed", "blowup" or "numeric_error"; ``blowup`` holds
    (time, reason) for the blow-up statuses.  Rows are immutable once the
    record is finalised.
    """

    times: np.ndarray
    norm_G: np.ndarray
    norm_F0: np.ndarray
    norm_F1: np.ndarray
    norm_D: np.ndarray
    int_F1sq: np.ndarray
    regime: np.ndarray  # 'D' / 'S' per row
    M: np.ndarray
    QV: np.ndarray
    flags: list[str]
    status: str = "completed"
    blowup: tuple[float, str] | None = None
    seed: int | None = None
    config_hash: str = ""
    events: list = dataclass_field(default_factory=list)
    envelope_residuals: list = dataclass_field(default_factory=list)
    diagnostics: MartingaleDiagnostics | None = None
    snapshots: list[tuple[float, SpectralField]] | None = None
    final_state: SpectralField | None = None

    def __post_init__(self):
        for arr in (self.times, self.int_F1sq):
            arr.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return len(self.times)

    @property
    def sup_norm_sq(self) -> dict[str, float]:
        return {
            "G": float(np.max(self.norm_G) ** 2),
            "F0": float(np.max(self.norm_F0) ** 2),
            "F1": float(np.max(self.norm_F1) ** 2),
            "D": float(np.max(self.norm_D) ** 2),
        }

    def rows(self):
        for i in range(self.n_rows):
            yield (
                float(self.times[i]),
                float(self.norm_G[i]),
                float(self.norm_F0[i]),
                float(self.norm_F1[i]),
                float(self.norm_D[i]),
                float(self.int_F1sq[i]),
                str(self.regime[i]),
                float(self.M[i]),
                float(self.QV[i]),
                self.flags[i],
            )


class _RecordBuilder:
    def __init__(self, seed, config_hash, keep_fields: bool):
        self.rows = []
        self.flags = []
        self.snapshots = [] if keep_fields else None
        self.seed = seed
        self.config_hash = config_hash

    def add(self, t, norms, int_f1sq, regime, m, qv, flags=""):
        self.rows.append((t, *norms, int_f1sq, regime, m, qv))
        self.flags.append(flags)

    def snap(self, t, X: SpectralField):
        if self.snapshots is not None:
            self.snapshots.append((t, X.copy()))

    def build(self, status, blowup, diagnostics, final_state) -> TrajectoryRecord:
        data = np.asarray([r[:6] + r[7:] for r in self.rows], dtype=np.float64)
        regimes = np.asarray([r[6] for r in self.rows])
        return TrajectoryRecord(
            times=data[:, 0],
            norm_G=data[:, 1],
            norm_F0=data[:, 2],
            norm_F1=data[:, 3],
            norm_D=data[:, 4],
            int_F1sq=data[:, 5],
            regime=regimes,
            M=data[:, 6],
            QV=data[:, 7],
            flags=self.flags,
            status=status,
            blowup=blowup,
            seed=self.seed,
            config_hash=self.config_hash,
            diagnostics=diagnostics,
            snapshots=self.snapshots,
            final_state=final_state,
        )


def _norms(X: SpectralField, ladder: SpaceLadder) -> tuple[float, float, float, float]:
    return (
        sobolev_norm(X, ladder.s_G),
        sobolev_norm(X, ladder.s_F0),
        sobolev_norm(X, ladder.s_F1),
        sobolev_norm(X, ladder.s_D),
    )


def em_step(
    X: SpectralField,
    A,
    B: NoiseSpec | None,
    dW: float,
    dt: float,
    projector: GalerkinProjector,
    ladder: SpaceLadder,
) -> SpectralField:
    """One Euler-Maruyama step of the projected equation."""
    out, _ = _em_step_with_stiffness(X, A, B, dW, dt, projector, ladder)
    return out


def _em_step_with_stiffness(X, A, B, dW, dt, projector, ladder, cache=None):
    # scale-free stiffness: relative drift displacement and relative noise
    # quadratic variation per step, so spikes refine at bounded cost
    cache = cache if cache is not None else _StateCache(X, A, projector, ladder)
    Ad = cache.drift()
    scale = max(cache.norm(ladder.s_G), 1e-300)
    stiffness = dt * cache.drift_norm_G() / scale
    out = X + dt * Ad
    if B is not None and B.theta > 0.0:
        coeff = B.theta * cache.norm(ladder.exponent(B.norm_space)) ** B.alpha
        stiffness = max(stiffness, dt * coeff * coeff)
        out = out + (dW * coeff) * X
    return out, stiffness


def tamed_em_step(
    X: SpectralField,
    A,
    B: NoiseSpec | None,
    dW: float,
    dt: float,
    projector: GalerkinProjector,
    ladder: SpaceLadder,
) -> SpectralField:
    """Tamed Euler-Maruyama step: drift and noise increments normalised."""
    out, _ = _tamed_step_with_stiffness(X, A, B, dW, dt, projector, ladder)
    return out


def _tamed_step_with_stiffness(X, A, B, dW, dt, projector, ladder, cache=None):
    cache = cache if cache is not None else _StateCache(X, A, projector, ladder)
    Ad = cache.drift()
    drift_size = dt * cache.drift_norm_G()
    out = X + (dt / (1.0 + drift_size)) * Ad
    stiffness = drift_size
    if B is not None and B.theta > 0.0:
        coeff = B.theta * cache.norm(ladder.exponent(B.norm_space)) ** B.alpha
        noise_size = dt * (coeff * cache.norm(ladder.s_G)) ** 2
        stiffness = max(stiffness, noise_size)
        out = out + (dW * coeff / (1.0 + noise_size)) * X
    return out, stiffness


class _StateCache:
    """Per-state memo of the projected drift and Sobolev norms.

    A trial step that gets halved retries from the same state; caching makes
    the retry cost O(vector ops) instead of a fresh drift evaluation.
    """

    __slots__ = ("X", "A", "projector", "ladder", "_drift", "_drift_nG", "_norms")

    def __init__(self, X, A, projector, ladder):
        self.X = X
        self.A = A
        self.projector = projector
        self.ladder = ladder
        self._drift = None
        self._drift_nG = None
        self._norms = {}

    def drift(self):
        if self._drift is None:
            self._drift = galerkin_project(self.A(self.X), self.projector)
        return self._drift

    def drift_norm_G(self):
        if self._drift_nG is None:
            self._drift_nG = sobolev_norm(self.drift(), self.ladder.s_G)
        return self._drift_nG

    def norm(self, s: float) -> float:
        key = float(s)
        if key not in self._norms:
            self._norms[key] = sobolev_norm(self.X, key)
        return self._norms[key]


def rk4_deterministic_step(
    X: SpectralField, A, dt: float, projector: GalerkinProjector, k1=None
) -> SpectralField:
    """Classical 4-stage step for the deterministic phase dX = A_d(X) dt."""
    if k1 is None:
        k1 = galerkin_project(A(X), projector)
    k2 = galerkin_project(A(X + (0.5 * dt) * k1), projector)
    k3 = galerkin_project(A(X + (0.5 * dt) * k2), projector)
    k4 = galerkin_project(A(X + dt * k3), projector)
    return X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _single_step(scheme, X, A, B, dW, h, projector, ladder, cache=None):
    """One trial step; returns (X_new, stiffness).

    The stiffness indicator bounds the per-step size of the scheme: for the
    tamed scheme it is ``max(h*||A_d||_G, h*||B(X)||_G^2)`` (the taming
    denominators stay near 1 only while it is small), for plain EM the
    scale-free ``max(h*||A_d||_G/||X||_G, h*(theta ||X||^alpha)^2)``.  The
    adaptive loop halves the step whenever it exceeds the configured cap;
    otherwise strong noise would be silently suppressed instead of taming
    the norm.
    """
    if scheme == "RK4Deterministic":
        if B is not None and B.theta > 0.0:
            raise ValueError("RK4Deterministic cannot carry a stochastic term")
        out = rk4_deterministic_step(X, A, h, projector, k1=cache.drift() if cache else None)
        return out, 0.0
    if scheme == "EulerMaruyama":
        return _em_step_with_stiffness(X, A, B, dW, h, projector, ladder, cache)
    if scheme == "TamedEulerMaruyama":
        return _tamed_step_with_stiffness(X, A, B, dW, h, projector, ladder, cache)
    raise ValueError(f"scheme {scheme} is restricted to the 1D SDE laboratory")


def integrate_path(
    X0: SpectralField,
    A,
    B: NoiseSpec | None,
    stepper: StepperConfig,
    wiener: WienerPath | None = None,
    *,
    cutoff: int | None = None,
    seed: int | None = None,
    config_hash: str = "",
    regime_label: str | None = None,
) -> TrajectoryRecord:
    """Integrate one path up to the horizon or blow-up.

    The initial state is projected to the Galerkin cutoff (default: the 2/3
    dealiasing cutoff of the grid, the largest closure-exact choice).  The
    record stores per-row norms in all four ladder spaces, the running
    integral of ||X||_F1^2, the regime label, and the raw martingale pair
    (M_t, <M>_t) accumulated from 2<X, B(X)> dW in the case's envelope space.
    """
    ladder: SpaceLadder = A.ladder
    noise_on = B is not None and B.theta > 0.0
    if noise_on and wiener is None:
        raise ValueError("a WienerPath is required when the noise is active")
    if noise_on and stepper.scheme == "RK4Deterministic":
        raise ValueError("RK4Deterministic is the deterministic-phase scheme")

    projector = GalerkinProjector(cutoff if cutoff is not None else X0.grid.dealias_cutoff)
    X = galerkin_project(X0, projector)
    n0 = sobolev_norm(X, ladder.s_F0)
    threshold = (
        stepper.blowup_threshold
        if stepper.blowup_threshold is not None
        else 1e8 * (1.0 + n0)
    )
    if threshold <= n0:
        raise ValueError(f"blowup_threshold {threshold} must exceed the initial norm {n0}")

    env_space = ENVELOPE_SPACE[B.case_label] if noise_on else "F0"
    env_exp = ladder.exponent(env_space)
    diag = MartingaleDiagnostics(stepper.mart_epsilon)

    rec = _RecordBuilder(
        seed if seed is not None else (wiener.seed if wiener is not None else None),
        config_hash,
        keep_fields=stepper.field_stride is not None,
    )
    label = regime_label or ("S" if noise_on else "D")
    int_f1 = 0.0
    t = 0.0
    rec.add(t, _norms(X, ladder), int_f1, label, diag.m, diag.qv, "")
    rec.snap(t, X)

    n_base = int(round(stepper.t_end / stepper.dt))
    if abs(n_base * stepper.dt - stepper.t_end) > 1e-9 * max(1.0, stepper.t_end):
        n_base = math.ceil(stepper.t_end / stepper.dt - 1e-12)
    status, blowup = "completed", None
    level = 0
    pos = 0
    accepted_since_refine = 0
    steps_done = 0

    cache = _StateCache(X, A, projector, ladder)
    while pos < (n_base << level):
        h = stepper.dt * 2.0**-level
        dW = wiener.increment(pos, level) if noise_on else 0.0
        X_new, stiffness = _single_step(
            stepper.scheme, X, A, B, dW, h, projector, ladder, cache
        )

        finite = X_new.is_finite()
        norm_new = sobolev_norm(X_new, ladder.s_F0) if finite else math.inf
        can_halve = stepper.adapt and level < stepper.max_level
        if not finite:
            if can_halve:
                level += 1
                pos <<= 1
                accepted_since_refine = 0
                continue
            status, blowup = "numeric_error", None
            break
        if stepper.adapt and stiffness > stepper.stiff_cap:
            # deterministic unresolvable stiffness at the floor is the
            # discrete signature of a blow-up
            if can_halve:
                level += 1
                pos <<= 1
                accepted_since_refine = 0
                continue
            status, blowup = "blowup", (t, "dt_underflow")
            break
        grew = norm_new > (1.0 + stepper.growth_trigger) * max(
            sobolev_norm(X, ladder.s_F0), 1e-300
        )
        if grew and can_halve:
            # sampled growth: refine while possible, accept at the floor
            level += 1
            pos <<= 1
            accepted_since_refine = 0
            continue

        # accept
        int_f1 += cache.norm(ladder.s_F1) ** 2 * h
        if noise_on:
            b_pair = (
                2.0
                * B.theta
                * cache.norm(ladder.exponent(B.norm_space)) ** B.alpha
                * cache.norm(env_exp) ** 2
            )
            diag.update(b_pair * dW, b_pair**2 * h)
        X = X_new
        cache = _StateCache(X, A, projector, ladder)
        pos += 1
        t = pos * h
        steps_done += 1
        accepted_since_refine += 1

        flags = ";".join(A.check_state(X)) if hasattr(A, "check_state") else ""
        if steps_done % stepper.save_stride == 0 or pos == (n_base << level):
            rec.add(t, _norms(X, ladder), int_f1, label, diag.m, diag.qv, flags)
        if stepper.field_stride is not None and steps_done % stepper.field_stride == 0:
            rec.snap(t, X)

        if norm_new >= threshold:
            status, blowup = "blowup", (t, "norm_threshold")
            break

        # coarsen after a calm stretch, staying on the dyadic grid
        if level > 0 and accepted_since_refine >= 4 and pos % 2 == 0:
            level -= 1
            pos >>= 1
            accepted_since_refine = 0

    if rec.rows[-1][0] != t:
        flags = ";".join(A.check_state(X)) if hasattr(A, "check_state") else ""
        rec.add(t, _norms(X, ladder), int_f1, label, diag.m, diag.qv, flags)
    return rec.build(status, blowup, diag, X)
