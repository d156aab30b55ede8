"""Closed-form spectra through the shared coupling block.

Every catalogued matrix can be written as ``R (x) I2 + C (x) xi`` with ``R``
diagonal (rates) and ``C`` the link pattern. If ``xi y = lam y`` then
``M (y_red (x) y) = (y_red' (x) y)`` whenever ``(R + lam C) y_red = y_red'``,
so each eigenvalue of ``xi`` turns the 2n x 2n problem into an n x n one.
The n x n problems below are solved by hand for each constrained topology.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, NoClosedFormError
from .model import (
    CouplingKind,
    CouplingParams,
    SystemSpec,
    Topology,
    build_reduced,
    rate_aggregates,
)

__all__ = [
    "BlockEigenSystem",
    "LocusResidual",
    "xi_eigensystem",
    "analytic_eigensystem",
    "lift_full_spectrum",
    "locus_residual",
    "locus_names",
    "principal_sqrt",
]


def principal_sqrt(z: complex) -> complex:
    """Square root with non-negative real part (non-negative imaginary part on the cut)."""
    root = complex(np.sqrt(complex(z)))
    if root.real == 0.0 and root.imag < 0.0:
        root = -root
    return complex(root.real + 0.0, root.imag + 0.0)


def xi_eigensystem(c: CouplingParams) -> tuple[tuple[complex, complex], tuple[np.ndarray, np.ndarray]]:
    """Eigenvalues ``(-zeta, +zeta)`` of the coupling block and their eigenvectors.

    Vectors are unnormalised with unit second component where that is
    possible. At ``epsilon == kappa`` both branches coalesce onto ``[-1, 1]``.
    """
    eps, kap = c.epsilon, c.kappa
    zeta = principal_sqrt(eps * eps - kap * kap)
    if kap == 0.0:
        # xi is diag(eps, -eps); the -eps eigenvector is the a+ direction.
        v1 = np.array([0.0, 1.0], dtype=complex)
        v2 = np.array([1.0, 0.0], dtype=complex)
    else:
        # -(eps - zeta)/kappa rewritten without cancellation
        v1 = np.array([-kap / (eps + zeta), 1.0], dtype=complex)
        v2 = np.array([-(eps + zeta) / kap, 1.0], dtype=complex)
    return (-zeta, zeta), (v1, v2)


@dataclass(frozen=True, eq=False)
class BlockEigenSystem:
    """Reduced eigenpairs for both coupling-block branches.

    ``reduced_eigenvectors[b]`` holds one eigenvector per column, matching
    ``reduced_eigenvalues[b]``. ``beta[b]`` and ``beta_bar[b]`` are the
    square-root offsets of the primary and secondary subsystems on branch
    ``b`` (``None`` when the topology has no such subsystem).
    """

    n_modes: int
    xi_eigenvalues: tuple[complex, complex]
    xi_eigenvectors: tuple[np.ndarray, np.ndarray]
    reduced_eigenvalues: tuple[np.ndarray, np.ndarray]
    reduced_eigenvectors: tuple[np.ndarray, np.ndarray]
    beta: tuple[complex | None, complex | None] = (None, None)
    beta_bar: tuple[complex | None, complex | None] = (None, None)
    reduced_matrices: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def residual(self, branch: int) -> float:
        """Largest relative residual of the reduced eigen-equation on ``branch``."""
        if self.reduced_matrices is None:
            raise ValueError("reduced matrices were not recorded")
        m = self.reduced_matrices[branch]
        vals = self.reduced_eigenvalues[branch]
        vecs = self.reduced_eigenvectors[branch]
        scale = max(np.linalg.norm(m, 2), 1.0)
        worst = 0.0
        for j in range(vals.size):
            v = vecs[:, j]
            r = np.linalg.norm(m @ v - vals[j] * v) / (scale * max(np.linalg.norm(v), 1e-300))
            worst = max(worst, float(r))
        return worst


# ---------------------------------------------------------------------------
# Reduced closed forms: each returns (eigenvalues, eigenvector columns, beta)


def _close(a: float, b: float, scale: float) -> bool:
    return abs(a - b) <= 1e-12 * max(1.0, scale)


def _chain1(g: tuple[float, ...], x: complex):
    return np.array([-0.5j * g[0]]), np.ones((1, 1), dtype=complex), None


def _chain2(g: tuple[float, ...], x: complex):
    gp, gm = (g[0] + g[1]) / 4, (g[0] - g[1]) / 4
    beta = principal_sqrt(x * x - gm * gm)
    vals, vecs = [], []
    for s in (-beta, beta):
        vals.append(-1j * gp + s)
        first = np.array([s - 1j * gm, x])
        second = np.array([x, s + 1j * gm])
        vecs.append(first if np.linalg.norm(first) >= np.linalg.norm(second) else second)
    return np.array(vals), np.column_stack(vecs), beta


def _chain3(g: tuple[float, ...], x: complex):
    if not _close(g[1], (g[0] + g[2]) / 2, max(map(abs, g))):
        raise NoClosedFormError("chain(3) needs the centred rate constraint")
    gp, gm = (g[0] + g[2]) / 4, (g[0] - g[2]) / 4
    beta = principal_sqrt(2 * x * x - gm * gm)
    vals, vecs = [], []
    for s in (0.0, -beta, beta):
        vals.append(-1j * gp + s)
        v = np.array([x * (s - 1j * gm), s * s + gm * gm, x * (s + 1j * gm)])
        if np.linalg.norm(v) <= 1e-14 * max(1.0, abs(x) ** 2 + gm * gm):
            if x == 0:
                # no coupling: plain diagonal modes, pick the matching one
                idx = int(np.argmin(np.abs(np.array([-1j * gm, 0.0, 1j * gm]) - s)))
                v = np.zeros(3, dtype=complex)
                v[idx] = 1.0
            else:
                v = np.array([1.0, 0.0, -1.0], dtype=complex)
        vecs.append(v)
    return np.array(vals), np.column_stack(vecs), beta


_CHAINS: dict[int, Callable] = {1: _chain1, 2: _chain2, 3: _chain3}


def _circular4(g: tuple[float, ...], x: complex):
    if not (_close(g[2], g[0], abs(g[0])) and _close(g[3], g[1], abs(g[1]))):
        raise NoClosedFormError("circular4 needs the alternating rate constraint")
    gp, gm = (g[0] + g[1]) / 4, (g[0] - g[1]) / 4
    beta = principal_sqrt(4 * x * x - gm * gm)
    vals = [-0.5j * g[0], -0.5j * g[1]]
    vecs = [np.array([-1, 0, 1, 0], dtype=complex), np.array([0, -1, 0, 1], dtype=complex)]
    for s in (-beta, beta):
        a, b = s - 1j * gm, 2 * x
        if abs(a) < 1e-14 and abs(b) < 1e-14:
            a, b = 1.0, 0.0
        vals.append(-1j * gp + s)
        vecs.append(np.array([a, b, a, b], dtype=complex))
    return np.array(vals), np.column_stack(vecs), beta


def _tetrahedral4(g: tuple[float, ...], x: complex):
    if not (_close(g[1], g[0], abs(g[0])) and _close(g[3], g[2], abs(g[2]))):
        raise NoClosedFormError("tetrahedral4 needs the pairwise rate constraint")
    gp, gm = (g[0] + g[2]) / 4, (g[0] - g[2]) / 4
    beta = principal_sqrt(4 * x * x - gm * gm)
    vals = [-0.5j * g[0] - x, -0.5j * g[2] - x]
    vecs = [np.array([-1, 1, 0, 0], dtype=complex), np.array([0, 0, -1, 1], dtype=complex)]
    for s in (-beta, beta):
        a, b = s - 1j * gm, 2 * x
        if abs(a) < 1e-14 and abs(b) < 1e-14:
            a, b = 1.0, 0.0
        vals.append(-1j * gp + x + s)
        vecs.append(np.array([a, a, b, b], dtype=complex))
    return np.array(vals), np.column_stack(vecs), beta


def _concat(spec: SystemSpec, x: complex):
    assert spec.concat is not None
    left, right = spec.concat.left, spec.concat.right
    if left not in _CHAINS or right not in _CHAINS:
        raise NoClosedFormError(f"no closed form for {spec.signature}")
    g = spec.rates.gamma
    a_vals, a_vecs, a_beta = _CHAINS[left](g[:left], x)
    b_vals, b_vecs, b_beta = _CHAINS[right](g[left:], x)
    b_mat = build_reduced(spec, x)[left:, left:]
    link = np.zeros((right, left), dtype=complex)
    for source, target in spec.concat.edges:
        link[target - left - 1, source - 1] = x
    n = left + right
    vals, vecs = [], []
    scale = max(1.0, float(np.linalg.norm(b_mat, 2)), abs(x))
    for lam, va in zip(a_vals, a_vecs.T):
        shifted = b_mat - lam * np.eye(right)
        if np.linalg.svd(shifted, compute_uv=False)[-1] > 1e-10 * scale:
            tail = -np.linalg.solve(shifted, link @ va)
            vec = np.concatenate([va, tail])
        else:
            # the left eigenvalue is shared with the right subsystem
            idx = int(np.argmin(np.abs(b_vals - lam)))
            vec = np.concatenate([np.zeros(left, dtype=complex), b_vecs[:, idx]])
        vals.append(lam)
        vecs.append(vec)
    for lam, vb in zip(b_vals, b_vecs.T):
        vals.append(lam)
        vecs.append(np.concatenate([np.zeros(left, dtype=complex), vb]))
    out = np.column_stack(vecs)
    assert out.shape == (n, n)
    if left >= 2:
        beta, beta_bar = a_beta, b_beta
    else:
        beta, beta_bar = b_beta, None
    return np.array(vals), out, beta, beta_bar


def analytic_eigensystem(spec: SystemSpec) -> BlockEigenSystem:
    """Closed-form reduced eigensystem for a catalogued configuration.

    Raises :class:`NoClosedFormError` when the topology or its rates fall
    outside the catalogue; callers then use a numeric eigensolver.
    """
    if spec.concat is not None and spec.concat.kind is not CouplingKind.MATRIX:
        raise NoClosedFormError("Hamiltonian-variant links break the shared-block reduction")
    xi_vals, xi_vecs = xi_eigensystem(spec.couplings)
    g = spec.rates.gamma
    red_vals, red_vecs, betas, bars, mats = [], [], [], [], []
    for x in xi_vals:
        beta_bar = None
        if spec.topology is Topology.CIRCULAR4:
            vals, vecs, beta = _circular4(g, x)
        elif spec.topology is Topology.TETRAHEDRAL4:
            vals, vecs, beta = _tetrahedral4(g, x)
        elif spec.topology is Topology.CHAIN:
            if spec.n not in _CHAINS:
                raise NoClosedFormError(f"no closed form for {spec.signature}")
            vals, vecs, beta = _CHAINS[spec.n](g, x)
        else:
            vals, vecs, beta, beta_bar = _concat(spec, x)
        red_vals.append(vals.astype(complex))
        red_vecs.append(vecs.astype(complex))
        betas.append(beta)
        bars.append(beta_bar)
        mats.append(build_reduced(spec, x))
    return BlockEigenSystem(
        n_modes=spec.n,
        xi_eigenvalues=(complex(xi_vals[0]), complex(xi_vals[1])),
        xi_eigenvectors=(xi_vecs[0], xi_vecs[1]),
        reduced_eigenvalues=(red_vals[0], red_vals[1]),
        reduced_eigenvectors=(red_vecs[0], red_vecs[1]),
        beta=(betas[0], betas[1]),
        beta_bar=(bars[0], bars[1]),
        reduced_matrices=(mats[0], mats[1]),
    )


def lift_full_spectrum(block: BlockEigenSystem) -> tuple[np.ndarray, np.ndarray]:
    """Full 2n eigenvalues and eigenvector columns from the reduced branches.

    Column ``2j`` comes from reduced pair ``j`` of the first branch and column
    ``2j + 1`` from the second, each built as ``kron(y_reduced, y_xi)``.
    """
    if len(block.reduced_eigenvalues) != 2 or len(block.reduced_eigenvectors) != 2:
        raise ValueError("lifting needs exactly two coupling-block branches")
    n = block.n_modes
    for vals, vecs in zip(block.reduced_eigenvalues, block.reduced_eigenvectors):
        if vals.shape != (n,) or vecs.shape != (n, n):
            raise ValueError("reduced branch does not match the mode count")
    values = np.empty(2 * n, dtype=complex)
    vectors = np.empty((2 * n, 2 * n), dtype=complex)
    for j in range(n):
        for b in (0, 1):
            values[2 * j + b] = block.reduced_eigenvalues[b][j]
            vectors[:, 2 * j + b] = np.kron(block.reduced_eigenvectors[b][:, j], block.xi_eigenvectors[b])
    return values, vectors


# ---------------------------------------------------------------------------
# Degeneracy loci


@dataclass(frozen=True)
class LocusResidual:
    """Signed distance-like quantity that vanishes on a degeneracy locus.

    ``gradient_hint`` is the gradient with respect to
    ``(kappa/epsilon, gamma_minus/epsilon)`` when the locus is an ellipse.
    """

    name: str
    value: float
    gradient_hint: tuple[float, float] | None = None


_ELLIPSES: dict[str, tuple[float, str, frozenset[str]]] = {
    "ellipse4": (4.0, "gamma_minus", frozenset({"circular4", "tetrahedral4"})),
    "circle": (
        1.0,
        "gamma_minus",
        frozenset({"chain(2)", "uniconcat(1+2)", "uniconcat(2+2)", "uniconcat(2+3)"}),
    ),
    "ellipse2": (2.0, "gamma_minus", frozenset({"chain(3)", "uniconcat(3+3)"})),
    "ellipse2-bar": (2.0, "gamma_minus_bar", frozenset({"uniconcat(2+3)"})),
}


def locus_names() -> list[str]:
    return sorted([*_ELLIPSES, "split-match"])


def locus_residual(spec: SystemSpec, name: str) -> LocusResidual:
    """``(kappa/eps)^2 + (g/eps)^2 / c - 1`` for ellipse loci, linear otherwise.

    ``split-match`` returns ``gamma_minus - gamma_minus_bar / sqrt(2)``.
    """
    agg = rate_aggregates(spec)
    if name == "split-match":
        if spec.signature != "uniconcat(2+3)":
            raise ConfigError(f"locus {name!r} is not defined for {spec.signature}")
        value = agg["gamma_minus"] - agg["gamma_minus_bar"] / np.sqrt(2.0)
        return LocusResidual(name, float(value))
    try:
        c, key, allowed = _ELLIPSES[name]
    except KeyError as exc:
        raise ConfigError(f"unknown locus {name!r}") from exc
    if spec.signature not in allowed:
        raise ConfigError(f"locus {name!r} is not defined for {spec.signature}")
    eps = spec.couplings.epsilon
    if eps == 0.0:
        raise ConfigError("loci are expressed in units of epsilon, which must be positive")
    k = spec.couplings.kappa / eps
    gm = agg[key] / eps
    return LocusResidual(name, float(k * k + gm * gm / c - 1.0), (2 * k, 2 * gm / c))
