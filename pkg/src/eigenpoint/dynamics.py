"""Gaussian dynamics of a damped mode driving an amplified one.

Mode 1 is damped at rate ``2 gamma`` and feeds mode 2, which is amplified
at the same rate, through a one-way link carrying the coupling block.
The Heisenberg-Langevin solution ``a(t) = P(t) a(0) + F(t)`` is built from
``P(t) = exp(-i M t)`` and the accumulated noise

    G(t) = <F F^dagger> = int_0^t P(s) C P(s)^dagger ds,

where ``C`` holds the white-noise strengths of the reservoirs. Closed forms
for this model sit next to a generic numerical route so that each can be
checked against the other.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import expm

from .errors import ConfigError, QuadratureError
from .model import DynamicalMatrix, MatrixLike, SystemSpec, build_system

__all__ = [
    "DampedAmplifiedPair",
    "TimeFunctions",
    "CommutatorCheck",
    "ReservoirCheck",
    "GaussianTrajectory",
    "propagator",
    "split_uv",
    "closed_form_uv",
    "noise_diffusion",
    "accumulated_noise",
    "force_correlations",
    "commutator_matrix",
    "commutator_check",
    "reservoir_consistency",
    "second_moments",
    "symplectic_negativity",
    "short_time_negativity",
    "gaussian_evolution",
    "TRAJECTORY_COLUMNS",
]


@dataclass(frozen=True)
class DampedAmplifiedPair:
    """Mode 1 damped at ``2 gamma``, mode 2 amplified at ``2 gamma``, one-way link 1 -> 2."""

    gamma: float
    epsilon: float
    kappa: float

    def __post_init__(self) -> None:
        for name in ("gamma", "epsilon", "kappa"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ConfigError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")
        if self.epsilon < 0 or self.kappa < 0:
            raise ConfigError("coupling strengths must be non-negative")

    def spec(self) -> SystemSpec:
        return SystemSpec.uniconcat(1, 1, self.epsilon, self.kappa, (2 * self.gamma, -2 * self.gamma))

    def matrix(self) -> DynamicalMatrix:
        return build_system(self.spec())

    def validity_limit(self, margin: float = 0.01) -> float:
        """Largest time for which the short-time model is trusted."""
        scales = [1.0 / self.gamma]
        if self.epsilon > 0:
            scales.append(1.0 / self.epsilon)
        return margin * min(scales)


@dataclass(frozen=True)
class TimeFunctions:
    """Elementary functions of ``gamma * t`` shared by the closed forms.

    The differences are evaluated with ``expm1`` so that they keep full
    relative accuracy at short times.
    """

    gamma: float
    t: float

    @property
    def mu(self) -> float:
        return math.exp(-self.gamma * self.t)

    @property
    def s(self) -> float:
        return math.sinh(2 * self.gamma * self.t)

    @property
    def sigma(self) -> float:
        x = 2 * self.gamma * self.t
        return math.expm1(-x) + x

    @property
    def psi(self) -> float:
        x = 2 * self.gamma * self.t
        return math.expm1(-x) - x

    @property
    def phi(self) -> float:
        x = 2 * self.gamma * self.t
        return math.expm1(x) - x

    @property
    def l1(self) -> float:
        return math.exp(-2 * self.gamma * self.t) + 1

    @property
    def l2(self) -> float:
        return math.expm1(-2 * self.gamma * self.t)


def _check_time(t: float) -> float:
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise ConfigError("time must be finite and non-negative")
    return t


# ---------------------------------------------------------------------------
# Propagator and noise


def propagator(m: MatrixLike, t: float) -> np.ndarray:
    """``exp(-i M t)`` by scaling and squaring, safe at defective points."""
    t = _check_time(t)
    return expm(-1j * t * np.array(m, dtype=complex))


def split_uv(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Annihilation-to-annihilation (U) and creation-to-annihilation (V) parts of ``p``."""
    return np.array(p[0::2, 0::2]), np.array(p[0::2, 1::2])


def closed_form_uv(pair: DampedAmplifiedPair, t: float) -> tuple[np.ndarray, np.ndarray]:
    t = _check_time(t)
    g = pair.gamma
    mu = math.exp(-g * t)
    drive = -1j * math.sinh(g * t) / g
    u = np.array([[mu, 0.0], [pair.epsilon * drive, 1.0 / mu]], dtype=complex)
    v = np.array([[0.0, 0.0], [pair.kappa * drive, 0.0]], dtype=complex)
    return u, v


def noise_diffusion(gamma: Sequence[float]) -> np.ndarray:
    """White-noise strengths ``<L L^dagger>`` in the interleaved basis.

    A damped mode (rate > 0) needs noise ``<L L^dagger> = rate``; an
    amplified one needs ``<L^dagger L> = |rate|``, which sits in the
    creation-operator slot.
    """
    out = np.zeros((2 * len(gamma), 2 * len(gamma)), dtype=complex)
    for j, g in enumerate(gamma):
        if g > 0:
            out[2 * j, 2 * j] = g
        elif g < 0:
            out[2 * j + 1, 2 * j + 1] = -g
    return out


def accumulated_noise(
    m: MatrixLike, diffusion: np.ndarray, t: float, epsabs: float = 1e-14, epsrel: float = 1e-12
) -> np.ndarray:
    """``int_0^t P(s) C P(s)^dagger ds`` by adaptive quadrature."""
    t = _check_time(t)
    arr = np.array(m, dtype=complex)
    if t == 0.0:
        return np.zeros_like(arr)

    def integrand(s: float) -> np.ndarray:
        p = expm(-1j * s * arr)
        return p @ diffusion @ p.conj().T

    value, err = quad_vec(integrand, 0.0, t, epsabs=epsabs, epsrel=epsrel, limit=400)
    scale = max(float(np.max(np.abs(value))), 1.0)
    if not np.isfinite(err) or err > 1e3 * max(epsabs, epsrel * scale):
        raise QuadratureError(f"noise quadrature did not converge (error estimate {err:.3g})")
    return value


def force_correlations(pair: DampedAmplifiedPair, t: float, method: str = "closed") -> np.ndarray:
    """4x4 correlation matrix ``<F F^dagger>`` of the accumulated forces.

    ``method="quadrature"`` integrates the propagated noise numerically
    instead of using the closed forms.
    """
    t = _check_time(t)
    if method == "quadrature":
        return accumulated_noise(pair.matrix(), noise_diffusion((2 * pair.gamma, -2 * pair.gamma)), t)
    if method != "closed":
        raise ConfigError(f"unknown method {method!r}")
    tf = TimeFunctions(pair.gamma, t)
    g, eps, kap = pair.gamma, pair.epsilon, pair.kappa
    f1 = np.array([[1 - tf.mu**2, 0.0], [0.0, 0.0]], dtype=complex)
    f12 = 1j * tf.sigma / (2 * g) * np.array([[eps, -kap], [0.0, 0.0]], dtype=complex)
    growth = (math.sinh(2 * g * t) - 2 * g * t) / (2 * g * g)
    f2 = growth * np.array([[eps * eps, -eps * kap], [-eps * kap, kap * kap]], dtype=complex)
    f2[1, 1] += math.expm1(2 * g * t)
    return np.block([[f1, f12], [f12.conj().T, f2]])


def _partner_swap(dim: int) -> np.ndarray:
    swap = np.zeros((dim, dim))
    for j in range(0, dim, 2):
        swap[j, j + 1] = swap[j + 1, j] = 1.0
    return swap


def commutator_matrix(m: MatrixLike, diffusion: np.ndarray, t: float) -> np.ndarray:
    """Matrix of ``<[a_i(t), a_j(t)^dagger]>`` over the interleaved operators.

    Built from ``P(t)`` and the accumulated noise alone, so it tests whether
    the noise restores the canonical commutators.
    """
    p = propagator(m, t)
    dim = p.shape[0]
    canonical = np.diag([1.0 if j % 2 == 0 else -1.0 for j in range(dim)])
    noise = accumulated_noise(m, diffusion, t)
    swap = _partner_swap(dim)
    return p @ canonical @ p.conj().T + noise - swap @ noise.T @ swap


@dataclass(frozen=True)
class CommutatorCheck:
    t: float
    comm22: float
    comm12: complex
    valid: bool


def commutator_check(pair: DampedAmplifiedPair, t: float, margin: float = 0.01) -> CommutatorCheck:
    """Closed-form ``<[a2, a2^dagger]>`` and ``<[a1, a2^dagger]>`` plus the validity flag.

    The cross term equals ``i eps t`` exactly: the noise contributions of
    both reservoirs cancel the exponential parts of the propagator.
    """
    t = _check_time(t)
    tf = TimeFunctions(pair.gamma, t)
    comm22 = 1 + (pair.epsilon**2 - pair.kappa**2) * tf.phi / (2 * pair.gamma**2)
    comm12 = 1j * pair.epsilon * t
    return CommutatorCheck(t, comm22, comm12, t <= pair.validity_limit(margin))


# ---------------------------------------------------------------------------
# Reservoir physicality


@dataclass(frozen=True, eq=False)
class ReservoirCheck:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    physical: bool

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])


def reservoir_consistency(pair: DampedAmplifiedPair, t: float, tol: float = 1e-12) -> ReservoirCheck:
    """Noise strengths a reservoir would need to keep the commutators canonical.

    A physical reservoir needs a positive semidefinite matrix; any
    eigenvalue below ``-tol`` flags the model as unphysical.
    """
    t = _check_time(t)
    tf = TimeFunctions(pair.gamma, t)
    g, eps, kap = pair.gamma, pair.epsilon, pair.kappa
    l1, l2, mu = tf.l1, tf.l2, tf.mu
    cross = eps * kap * l1 * l2 / (2 * g)
    mat = np.array(
        [
            [2 * g, 0, -1j * eps * l1, 0],
            [0, 0, 0, 0],
            [1j * eps * l1, 0, -(eps**2) * mu**2 * l2 / g, cross],
            [0, 0, cross, 2 * g - kap**2 * l2 / g],
        ],
        dtype=complex,
    )
    values = np.linalg.eigvalsh(mat)
    return ReservoirCheck(mat, values, bool(values[0] >= -tol))


# ---------------------------------------------------------------------------
# Gaussian statistics


@dataclass(frozen=True)
class SecondMoments:
    """Fluctuation moments of an initially coherent pair.

    ``b[j] = <da_j^dagger da_j>``, ``c[j] = <da_j^2>`` and ``d = <da_1 da_2>``.
    """

    b: tuple[float, float]
    c: tuple[complex, complex]
    d: complex


def second_moments(u: np.ndarray, v: np.ndarray, noise: np.ndarray) -> SecondMoments:
    """Moments from the propagator blocks and the accumulated noise (generic route)."""
    b = tuple(float((np.sum(np.abs(v[j]) ** 2) + noise[2 * j + 1, 2 * j + 1]).real) for j in range(2))
    c = tuple(complex(np.sum(u[j] * v[j]) + noise[2 * j, 2 * j + 1]) for j in range(2))
    d = complex(np.sum(u[0] * v[1]) + noise[0, 3])
    return SecondMoments(b, c, d)  # type: ignore[arg-type]


def _closed_moments(pair: DampedAmplifiedPair, t: float) -> SecondMoments:
    tf = TimeFunctions(pair.gamma, t)
    g, eps, kap = pair.gamma, pair.epsilon, pair.kappa
    b2 = kap**2 * tf.phi / (2 * g * g) + math.expm1(2 * g * t)
    c2 = -eps * kap * tf.phi / (2 * g * g)
    return SecondMoments((0.0, b2), (0j, complex(c2)), -1j * kap * t)


def nonclassicality_depth(b: float, c: complex) -> float:
    return max(0.0, abs(c) - b)


def symplectic_negativity(b2: float, c2: complex, d: complex) -> tuple[float, float]:
    """Smaller symplectic eigenvalue of the partial transpose and the log-negativity.

    Mode 1 is assumed to stay coherent, so its covariance block is the identity.
    """
    cov2 = np.diag([1 + 2 * b2 + 2 * c2.real, 1 + 2 * b2 - 2 * c2.real])
    cov12 = 2 * np.array([[0.0, -d.imag], [d.imag, 0.0]])
    full = np.block([[np.eye(2), cov12], [cov12.T, cov2]])
    delta = 1 + np.linalg.det(cov2) + 2 * np.linalg.det(cov12)
    big_delta = np.linalg.det(full)
    disc = max(delta * delta - 4 * big_delta, 0.0)
    # the smaller root via the product form avoids cancellation
    larger = (delta + math.sqrt(disc)) / 2
    nu_minus = math.sqrt(max(big_delta / larger, 0.0)) if larger > 0 else 0.0
    en = max(0.0, -math.log(nu_minus)) if nu_minus > 0 else math.inf
    return nu_minus, en


def short_time_negativity(pair: DampedAmplifiedPair, t: float) -> float:
    """First-order expansion of the log-negativity in ``t``."""
    g = pair.gamma
    return -math.log1p(2 * g * t * (1 - math.sqrt(1 + (pair.kappa / g) ** 2)))


TRAJECTORY_COLUMNS = (
    "t",
    "re_alpha1",
    "im_alpha1",
    "re_alpha2",
    "im_alpha2",
    "B2",
    "re_C2",
    "im_C2",
    "re_D",
    "im_D",
    "tau1",
    "tau2",
    "nu_minus",
    "EN",
    "EN_short_time",
    "comm22_minus_1",
    "im_comm12",
    "valid",
)


@dataclass(frozen=True, eq=False)
class GaussianTrajectory:
    times: np.ndarray
    alpha: np.ndarray
    B2: np.ndarray
    C2: np.ndarray
    D: np.ndarray
    tau: np.ndarray
    nu_minus: np.ndarray
    EN: np.ndarray
    EN_short_time: np.ndarray
    commutators: np.ndarray
    valid: np.ndarray
    pair: DampedAmplifiedPair = field(repr=False, default=None)  # type: ignore[assignment]

    def rows(self) -> Iterable[tuple]:
        for i, t in enumerate(self.times):
            yield (
                float(t),
                self.alpha[i, 0].real,
                self.alpha[i, 0].imag,
                self.alpha[i, 1].real,
                self.alpha[i, 1].imag,
                float(self.B2[i]),
                self.C2[i].real,
                self.C2[i].imag,
                self.D[i].real,
                self.D[i].imag,
                float(self.tau[i, 0]),
                float(self.tau[i, 1]),
                float(self.nu_minus[i]),
                float(self.EN[i]),
                float(self.EN_short_time[i]),
                float(self.commutators[i, 0].real - 1.0),
                float(self.commutators[i, 1].imag),
                int(bool(self.valid[i])),
            )

    def to_csv(self, handle: IO[str] | None = None, header_comment: str | None = None) -> str:
        """Write the trajectory as CSV; returns the text when no handle is given."""
        buffer = handle if handle is not None else io.StringIO()
        if header_comment:
            buffer.write(f"# {header_comment}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(TRAJECTORY_COLUMNS)
        for row in self.rows():
            writer.writerow([repr(x) if isinstance(x, float) else x for x in row])
        return buffer.getvalue() if handle is None else ""


def gaussian_evolution(
    pair: DampedAmplifiedPair,
    alpha0: Sequence[complex],
    times: Sequence[float],
    method: str = "closed",
    margin: float = 0.01,
) -> GaussianTrajectory:
    """Evolve an initially coherent pair and collect its Gaussian statistics.

    ``method="numeric"`` derives every moment from the matrix exponential
    and the noise quadrature instead of the closed forms.
    """
    if method not in ("closed", "numeric"):
        raise ConfigError(f"unknown method {method!r}")
    grid = np.asarray([_check_time(t) for t in times], dtype=float)
    a0 = np.asarray(alpha0, dtype=complex)
    if a0.shape != (2,):
        raise ConfigError("alpha0 needs one amplitude per mode")
    limit = pair.validity_limit(margin)
    if np.any(grid > limit):
        warnings.warn(
            f"times beyond {limit:.3g} lie outside the short-time validity window",
            RuntimeWarning,
            stacklevel=2,
        )
    n = grid.size
    alpha = np.empty((n, 2), dtype=complex)
    b2 = np.empty(n)
    c2 = np.empty(n, dtype=complex)
    d = np.empty(n, dtype=complex)
    tau = np.empty((n, 2))
    nu = np.empty(n)
    en = np.empty(n)
    en_short = np.empty(n)
    comms = np.empty((n, 2), dtype=complex)
    m = pair.matrix()
    diffusion = noise_diffusion((2 * pair.gamma, -2 * pair.gamma))
    for i, t in enumerate(grid):
        if method == "closed":
            u, v = closed_form_uv(pair, t)
            moments = _closed_moments(pair, t)
            # mode-1 moments from the generic formula: no noise reaches a_1 a_1
            noise = force_correlations(pair, t)
            mode1 = second_moments(u, v, noise)
            moments = SecondMoments((mode1.b[0], moments.b[1]), (mode1.c[0], moments.c[1]), moments.d)
            check = commutator_check(pair, t, margin)
            comms[i] = (check.comm22, check.comm12)
        else:
            u, v = split_uv(propagator(m, t))
            noise = accumulated_noise(m, diffusion, t)
            moments = second_moments(u, v, noise)
            k = commutator_matrix(m, diffusion, t)
            comms[i] = (k[2, 2], k[0, 2])
        alpha[i] = u @ a0 + v @ a0.conj()
        b2[i], c2[i], d[i] = moments.b[1], moments.c[1], moments.d
        tau[i] = (nonclassicality_depth(moments.b[0], moments.c[0]), nonclassicality_depth(moments.b[1], moments.c[1]))
        nu[i], en[i] = symplectic_negativity(moments.b[1], moments.c[1], moments.d)
        en_short[i] = short_time_negativity(pair, t)
    return GaussianTrajectory(
        grid, alpha, b2, c2, d, tau, nu, en, en_short, comms, grid <= limit, pair
    )
