"""Numerical detection of exceptional, diabolical and hybrid points.

Eigenvalues from a complex Schur form are grouped top-down along a
single-linkage dendrogram. A group is kept when two tests agree:

* its eigenvalues are the roots of a polynomial within ``cluster_tol`` (in
  backward-error terms) of ``(x - mu)^m``, which is how a perturbed Jordan
  block of size ``m`` looks: its roots spread like ``eta**(1/m)``;
* the nullities of ``(T11 - mu)^k`` on the group's Schur block form a valid
  Jordan staircase that ends at ``m``.

Otherwise the group is split into its two dendrogram children.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.cluster.hierarchy import linkage, to_tree
from scipy.linalg import lapack, schur
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError, IndeterminacyError, ScanError
from .model import MatrixLike, perturb

__all__ = [
    "DEFAULT_CLUSTER_TOL",
    "DEFAULT_RANK_TOL",
    "EigenCluster",
    "NumericEigensystem",
    "JordanCluster",
    "JordanReport",
    "PatternSite",
    "ScanResult",
    "SingularityKind",
    "SingularityReport",
    "numeric_eigensystem",
    "jordan_structure",
    "perturbation_scan",
    "classify",
    "eigenvector_overlap",
    "default_deltas",
    "generic_pattern",
]

log = logging.getLogger(__name__)

DEFAULT_CLUSTER_TOL = 1e-7  # relative to ||M||
DEFAULT_RANK_TOL = 1e-9
_GAP = 10.0


def _as_array(m: MatrixLike) -> np.ndarray:
    arr = np.array(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError("expected a square matrix")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("matrix has non-finite entries")
    return arr


def _norm(arr: np.ndarray) -> float:
    return float(np.linalg.norm(arr, 2)) if arr.size else 0.0


# ---------------------------------------------------------------------------
# Clustering


@dataclass(frozen=True, eq=False)
class EigenCluster:
    """Eigenvalues treated as one degenerate point.

    ``basis`` is an orthonormal basis of the invariant subspace and
    ``block`` the upper-triangular restriction of the matrix to it.
    """

    mean: complex
    eigenvalues: np.ndarray
    basis: np.ndarray = field(repr=False)
    block: np.ndarray = field(repr=False)

    @property
    def multiplicity(self) -> int:
        return int(self.eigenvalues.size)


@dataclass(frozen=True, eq=False)
class NumericEigensystem:
    clusters: tuple[EigenCluster, ...]
    norm: float

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([c.eigenvalues for c in self.clusters])


@dataclass
class _Workspace:
    t: np.ndarray
    z: np.ndarray
    diag: np.ndarray
    norm: float
    tau: float
    rank_tol: float

    def restrict(self, members: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        select = np.zeros(self.diag.size, dtype=np.int32)
        select[list(members)] = 1
        ts, qs, _w, m, _s, _sep, info = lapack.ztrsen(select, self.t, self.z, job="N")
        if info != 0:
            raise np.linalg.LinAlgError(f"Schur reordering failed (info={info})")
        return ts[:m, :m], qs[:, :m]

    def shift_norm(self, mu: complex) -> float:
        # ||M - mu I|| equals ||T - mu I|| because the Schur factor is unitary
        return max(_norm(self.t - mu * np.eye(self.diag.size)), 1e-300)


def _rank_profile(block: np.ndarray, mu: complex, scale: float, rank_tol: float) -> tuple[list[int], bool]:
    """Nullities of ``(block - mu)^k`` for k = 1..m and whether any decision was marginal."""
    m = block.shape[0]
    shifted = block - mu * np.eye(m)
    power = np.eye(m, dtype=complex)
    nullities: list[int] = []
    marginal = False
    for k in range(1, m + 1):
        power = power @ shifted
        sv = np.linalg.svd(power, compute_uv=False)
        threshold = rank_tol * scale**k
        below = sv[sv <= threshold]
        above = sv[sv > threshold]
        lo = float(below.max()) if below.size else 0.0
        hi = float(above.min()) if above.size else threshold
        lo_ref = lo if below.size else threshold
        if lo > 0.0 or not below.size:
            if hi / max(lo_ref, 1e-300) < _GAP:
                marginal = True
        nullities.append(int(below.size))
    return nullities, marginal


def _staircase_ok(nullities: list[int], m: int) -> bool:
    if not nullities or nullities[-1] != m or nullities[0] < 1:
        return False
    steps = [nullities[0]] + [b - a for a, b in zip(nullities, nullities[1:])]
    if any(s < 0 for s in steps):
        return False
    return all(b <= a for a, b in zip(steps, steps[1:]))


def _polynomial_ok(values: np.ndarray, mu: complex, norm: float, tau: float) -> bool:
    m = values.size
    x = (values - mu) / norm
    coeffs = np.poly(x)
    return all(abs(coeffs[j]) <= math.comb(m, j) * tau for j in range(1, m + 1))


def _verify(ws: _Workspace, members: list[int]) -> bool:
    values = ws.diag[members]
    mu = complex(values.mean())
    if not _polynomial_ok(values, mu, ws.norm, ws.tau):
        return False
    block, _ = ws.restrict(members)
    mu = complex(np.trace(block) / block.shape[0])
    nullities, marginal = _rank_profile(block, mu, ws.shift_norm(mu), ws.rank_tol)
    if marginal:
        # eigenvalues agree to backward error but the ranks do not settle
        raise IndeterminacyError(
            f"rank decision near {mu:.6g} is within a factor {_GAP:g} of the threshold; adjust rank_tol"
        )
    return _staircase_ok(nullities, len(members))


def _workspace(m: MatrixLike, cluster_tol: float | None, rank_tol: float) -> _Workspace:
    arr = _as_array(m)
    if rank_tol <= 0:
        raise ConfigError("rank_tol must be positive")
    t, z = schur(arr, output="complex")
    norm = _norm(arr)
    if norm == 0.0:
        norm = 1.0
    if cluster_tol is None:
        tau = DEFAULT_CLUSTER_TOL
    else:
        if cluster_tol <= 0:
            raise ConfigError("cluster_tol must be positive")
        tau = cluster_tol / norm
    return _Workspace(t, z, np.diag(t).copy(), norm, tau, rank_tol)


def _group(ws: _Workspace) -> list[list[int]]:
    n = ws.diag.size
    if n == 1:
        return [[0]]
    points = np.column_stack([ws.diag.real, ws.diag.imag])
    root = to_tree(linkage(points, method="single"))
    groups: list[list[int]] = []
    stack = [root]
    while stack:
        node = stack.pop()
        members = sorted(node.pre_order())
        if len(members) == 1 or _verify(ws, members):
            groups.append(members)
        else:
            stack.extend([node.get_right(), node.get_left()])
    groups.sort(key=lambda g: (round(float(ws.diag[g].real.mean()), 9), round(float(ws.diag[g].imag.mean()), 9), g[0]))
    return groups


def numeric_eigensystem(
    m: MatrixLike, cluster_tol: float | None = None, rank_tol: float = DEFAULT_RANK_TOL
) -> NumericEigensystem:
    """Cluster the spectrum of ``m`` and return an invariant-subspace basis per cluster.

    ``cluster_tol`` is an absolute backward-error radius; by default it is
    ``1e-7 * ||m||``.
    """
    ws = _workspace(m, cluster_tol, rank_tol)
    clusters = []
    for members in _group(ws):
        block, basis = ws.restrict(members)
        values = np.diag(block).copy()
        clusters.append(EigenCluster(complex(values.mean()), values, basis, block))
    return NumericEigensystem(tuple(clusters), ws.norm)


# ---------------------------------------------------------------------------
# Jordan structure


@dataclass(frozen=True)
class JordanCluster:
    eigenvalue: complex
    multiplicity: int
    block_sizes: tuple[int, ...]

    @property
    def ed_order(self) -> int:
        return max(self.block_sizes)

    @property
    def dd_order(self) -> int:
        return self.block_sizes.count(self.ed_order)


@dataclass(frozen=True)
class JordanReport:
    clusters: tuple[JordanCluster, ...]
    similarity_condition_estimate: float

    @property
    def dimension(self) -> int:
        return sum(sum(c.block_sizes) for c in self.clusters)

    def to_dict(self) -> dict:
        return {
            "clusters": [
                {
                    "eigenvalue": [c.eigenvalue.real, c.eigenvalue.imag],
                    "multiplicity": c.multiplicity,
                    "block_sizes": list(c.block_sizes),
                }
                for c in self.clusters
            ],
            "similarity_condition_estimate": _json_float(self.similarity_condition_estimate),
        }


def _blocks_from_nullities(nullities: list[int]) -> tuple[int, ...]:
    at_least = [nullities[0]] + [b - a for a, b in zip(nullities, nullities[1:])] + [0]
    sizes: list[int] = []
    for k in range(len(nullities), 0, -1):
        sizes += [k] * (at_least[k - 1] - at_least[k])
    return tuple(sizes)


def jordan_structure(
    m: MatrixLike, rank_tol: float = DEFAULT_RANK_TOL, cluster_tol: float | None = None
) -> JordanReport:
    """Jordan block sizes of every eigenvalue cluster of ``m``.

    The nullities ``nu_k`` of ``(M - mu)^k`` restricted to each cluster give
    ``nu_k - nu_{k-1}`` blocks of size at least ``k``. A rank decision whose
    neighbouring singular values lie within a factor 10 of the threshold
    ``rank_tol * ||M - mu||^k`` raises :class:`IndeterminacyError`.
    """
    ws = _workspace(m, cluster_tol, rank_tol)
    out = []
    bases = []
    for members in _group(ws):
        block, basis = ws.restrict(members)
        mu = complex(np.trace(block) / block.shape[0])
        if len(members) == 1:
            sizes: tuple[int, ...] = (1,)
        else:
            nullities, marginal = _rank_profile(block, mu, ws.shift_norm(mu), rank_tol)
            if marginal or not _staircase_ok(nullities, len(members)):
                raise IndeterminacyError(
                    f"rank decision near {mu:.6g} is within a factor {_GAP:g} of the threshold; adjust rank_tol"
                )
            sizes = _blocks_from_nullities(nullities)
        out.append(JordanCluster(mu, len(members), sizes))
        bases.append(basis)
    cond = float(np.linalg.cond(np.hstack(bases))) if bases else 1.0
    return JordanReport(tuple(out), cond)


# ---------------------------------------------------------------------------
# Perturbation probes


@dataclass(frozen=True, eq=False)
class PatternSite:
    """Adds ``delta * pattern`` to the whole matrix."""

    pattern: np.ndarray


def generic_pattern(dim: int) -> np.ndarray:
    """Deterministic full-rank probe: a unitary-node Vandermonde matrix.

    A rank-one probe can lift only one of several equal Jordan blocks, so
    the default scan uses a pattern that couples every direction.
    """
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    j = np.arange(1, dim + 1)
    return np.exp(2j * np.pi * golden * np.outer(j, j)) / dim


def _apply(m: MatrixLike, site, delta: float) -> np.ndarray:
    if isinstance(site, PatternSite):
        arr = np.array(m, dtype=complex)
        pattern = np.asarray(site.pattern, dtype=complex)
        if pattern.shape != arr.shape:
            raise ConfigError("pattern shape does not match the matrix")
        return arr + delta * pattern if delta != 0.0 else arr
    return np.array(perturb(m, site, delta), dtype=complex)


def eigenvector_overlap(y1: np.ndarray, y2: np.ndarray) -> float:
    """``|<y2|y1>| / (|y1| |y2|)``: 1 for parallel vectors, 0 for orthogonal ones."""
    y1 = np.asarray(y1, dtype=complex)
    y2 = np.asarray(y2, dtype=complex)
    denom = float(np.linalg.norm(y1) * np.linalg.norm(y2))
    if denom == 0.0:
        raise ValueError("overlap of a zero vector is undefined")
    return float(abs(np.vdot(y2, y1)) / denom)


def default_deltas(delta_min: float = 1e-10, delta_max: float = 1e-4, steps: int = 25) -> np.ndarray:
    return np.geomspace(delta_min, delta_max, steps)


@dataclass(frozen=True, eq=False)
class ScanResult:
    """Tracked eigenvalues under a growing perturbation.

    ``eigenvalues[i]`` holds the spectrum at ``deltas[i]`` in a fixed branch
    order; ``cluster`` lists the branches that start in the probed cluster.
    """

    deltas: np.ndarray
    eigenvalues: np.ndarray
    cluster: tuple[int, ...]
    splitting: np.ndarray
    overlap: np.ndarray
    slope: float
    fitted: np.ndarray

    def moving_branches(self, rel: float = 1e-3) -> int:
        """Number of cluster branches that leave their starting point noticeably."""
        start = self.eigenvalues[0, list(self.cluster)]
        end = self.eigenvalues[-1, list(self.cluster)]
        travel = np.abs(end - start)
        return int(np.sum(travel > rel * max(float(travel.max()), 1e-300)))


def _pairwise_max(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(np.max(np.abs(values[:, None] - values[None, :])))


def _max_overlap(vectors: np.ndarray) -> float:
    k = vectors.shape[1]
    if k < 2:
        return float("nan")
    return max(
        eigenvector_overlap(vectors[:, i], vectors[:, j]) for i in range(k) for j in range(i + 1, k)
    )


def _match(previous: np.ndarray, current: np.ndarray) -> np.ndarray:
    cost = np.abs(previous[:, None] - current[None, :])
    _rows, cols = linear_sum_assignment(cost)
    return cols


def perturbation_scan(
    m: MatrixLike,
    site,
    deltas: Sequence[float] | None = None,
    cluster: Sequence[int] | None = None,
    cluster_tol: float | None = None,
    executor: Executor | None = None,
) -> ScanResult:
    """Follow the eigenvalues of ``m`` as the perturbation at ``site`` grows.

    ``cluster`` holds indices into ``numpy.linalg.eigvals(m)``; by default
    the largest numeric cluster is probed. The splitting is the largest
    pairwise distance between the cluster's branches and its log-log slope
    is fitted over the inner half of the grid (about 1/m for an m-th order
    exceptional point, 1 for diabolical or regular points).
    """
    base = _as_array(m)
    grid = np.sort(np.asarray(deltas if deltas is not None else default_deltas(), dtype=float))
    if grid.size < 4 or np.any(grid <= 0) or not np.all(np.isfinite(grid)):
        raise ConfigError("deltas must be at least four positive finite values")
    if math.log10(grid[-1] / grid[0]) < 4.0 - 1e-9:
        raise ConfigError("deltas must span at least four decades")
    norm = _norm(base) or 1.0

    start_vals, start_vecs = np.linalg.eig(base)
    if cluster is None:
        system = numeric_eigensystem(base, cluster_tol)
        biggest = max(system.clusters, key=lambda c: c.multiplicity)
        chosen = _match(biggest.eigenvalues, start_vals)
        cluster = tuple(int(i) for i in chosen)
    cluster = tuple(sorted(int(i) for i in cluster))

    def solve(delta: float) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eig(_apply(m, site, float(delta)))

    if executor is not None:
        results = list(executor.map(solve, grid))
    else:
        results = [solve(d) for d in grid]

    tracked = np.empty((grid.size, base.shape[0]), dtype=complex)
    splitting = np.empty(grid.size)
    overlap = np.empty(grid.size)
    previous = start_vals
    idx = list(cluster)
    for i, (vals, vecs) in enumerate(results):
        order = _match(previous, vals)
        vals, vecs = vals[order], vecs[:, order]
        tracked[i] = vals
        splitting[i] = _pairwise_max(vals[idx])
        overlap[i] = _max_overlap(vecs[:, idx])
        previous = vals
    all_vals = np.vstack([start_vals[None, :], tracked])

    lo, hi = grid.size // 4, grid.size - grid.size // 4
    window = np.arange(lo, hi)
    keep = window[splitting[window] > 1e-12 * norm]
    if keep.size >= 2:
        seq = splitting[keep]
        if np.any(np.diff(seq) < -1e-8 * seq[:-1]):
            raise ScanError("splitting is not monotone over the fitted range")
        slope = float(np.polyfit(np.log(grid[keep]), np.log(seq), 1)[0])
    else:
        slope = float("nan")
    return ScanResult(grid, all_vals[1:], cluster, splitting, overlap, slope, grid[keep])


# ---------------------------------------------------------------------------
# Classification


class SingularityKind(str, Enum):
    REGULAR = "regular"
    QEP = "QEP"
    QDP = "QDP"
    QHP = "QHP"


def _kind(ed: int, dd: int) -> SingularityKind:
    if ed >= 2 and dd >= 2:
        return SingularityKind.QHP
    if ed >= 2:
        return SingularityKind.QEP
    if dd >= 2:
        return SingularityKind.QDP
    return SingularityKind.REGULAR


@dataclass(frozen=True)
class SingularityReport:
    kind: SingularityKind
    ed_order: int
    dd_order: int
    eigenvalue: complex
    jordan: JordanReport
    splitting_exponents: tuple[float, ...]
    min_overlap: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "ed_order": self.ed_order,
            "dd_order": self.dd_order,
            "eigenvalue": [self.eigenvalue.real, self.eigenvalue.imag],
            "evidence": {
                "jordan": self.jordan.to_dict(),
                "splitting_exponents": [_json_float(s) for s in self.splitting_exponents],
                "min_overlap": _json_float(self.min_overlap),
            },
        }


def _json_float(x: float) -> float | None:
    return None if not math.isfinite(x) else float(x)


def _dominant(report: JordanReport) -> JordanCluster:
    return max(
        report.clusters,
        key=lambda c: (c.ed_order, c.dd_order, c.multiplicity, -c.eigenvalue.real, -c.eigenvalue.imag),
    )


def classify(
    m: MatrixLike,
    cluster_tol: float | None = None,
    rank_tol: float = DEFAULT_RANK_TOL,
    deltas: Sequence[float] | None = None,
    sites: Sequence | None = None,
) -> SingularityReport:
    """Classify the most degenerate point in the spectrum of ``m``.

    ED and DD orders come from the Jordan structure of the dominant cluster
    (largest block, then most maximal blocks, then largest multiplicity).
    Perturbation scans at ``sites`` (default: :func:`generic_pattern`)
    and the eigenvector overlap are attached as corroborating evidence.
    """
    arr = _as_array(m)
    report = jordan_structure(arr, rank_tol, cluster_tol)
    top = _dominant(report)
    ed, dd = top.ed_order, top.dd_order

    vals, vecs = np.linalg.eig(arr)
    order = np.argsort(np.abs(vals - top.eigenvalue), kind="stable")
    members = tuple(int(i) for i in order[: top.multiplicity])
    min_overlap = float("nan")
    if len(members) >= 2:
        min_overlap = min(
            eigenvector_overlap(vecs[:, i], vecs[:, j])
            for a, i in enumerate(members)
            for j in members[a + 1 :]
        )

    exponents: list[float] = []
    if top.multiplicity >= 2:
        probe_sites = sites if sites is not None else [PatternSite(generic_pattern(arr.shape[0]))]
        for site in probe_sites:
            try:
                scan = perturbation_scan(m, site, deltas, cluster=members, cluster_tol=cluster_tol)
                exponents.append(scan.slope)
            except ScanError as exc:
                log.info("perturbation scan skipped: %s", exc)
                exponents.append(float("nan"))
    return SingularityReport(_kind(ed, dd), ed, dd, top.eigenvalue, report, tuple(exponents), min_overlap)
