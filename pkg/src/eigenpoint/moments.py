"""Degeneracy counting for k-th order field-operator moments.

The first-order spectrum is split into clusters ``B_j``, one per Jordan
block, each carrying ``n_j`` coalescing operators. A k-th order moment class
is labelled by how many factors it takes from each cluster (its k-vector).
Its eigenfrequency is the weighted sum of the cluster eigenvalues; its
exceptional degree is the product of ``n_j ** k_j``, its diabolical degree
is the number of ways to order the clusters, and its genuine exceptional
degree counts the distinct symmetric monomials it contains.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, replace
from itertools import combinations, combinations_with_replacement, product
from typing import Any, Iterable, Sequence

from .errors import ConfigError
from .model import SystemSpec, build_system
from .singularity import DEFAULT_RANK_TOL, JordanReport, jordan_structure

__all__ = [
    "PartitionCluster",
    "SpectrumPartition",
    "MomentClass",
    "MomentRow",
    "MomentClassTable",
    "partition_spectrum",
    "k_vectors",
    "moment_classes",
    "moment_counts",
    "ordering_degeneracy",
    "class_monomials",
    "table_from_partition",
    "generate_table",
]


@dataclass(frozen=True)
class PartitionCluster:
    eigenvalue: complex
    size: int
    label: str


@dataclass(frozen=True)
class SpectrumPartition:
    clusters: tuple[PartitionCluster, ...]

    def __post_init__(self) -> None:
        labels = [c.label for c in self.clusters]
        if len(set(labels)) != len(labels):
            raise ConfigError("cluster labels must be unique")
        if any(c.size < 1 for c in self.clusters):
            raise ConfigError("cluster sizes must be positive")

    @property
    def sigma(self) -> int:
        """Number of clusters."""
        return len(self.clusters)

    @property
    def total_dim(self) -> int:
        return sum(c.size for c in self.clusters)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(c.size for c in self.clusters)

    @classmethod
    def from_sizes(cls, eigenvalues: Sequence[complex], sizes: Sequence[int]) -> "SpectrumPartition":
        if len(eigenvalues) != len(sizes):
            raise ConfigError("one size per eigenvalue is required")
        return cls(
            tuple(
                PartitionCluster(complex(lam), int(n), f"B{j + 1}")
                for j, (lam, n) in enumerate(zip(eigenvalues, sizes))
            )
        )


def _ordering_key(lam: complex, size: int) -> tuple:
    return (size, round(-lam.imag, 9), round(lam.real, 9))


def partition_spectrum(source: JordanReport | Iterable[tuple[complex, int]]) -> SpectrumPartition:
    """One cluster per Jordan block, sized by the block.

    Blocks are ordered by size, then by decay rate, then by frequency, and
    labelled ``B1, B2, ...`` in that order. Equal blocks at one eigenvalue
    (a diabolical degeneracy) become separate clusters with equal
    eigenvalues. A plain iterable of ``(eigenvalue, size)`` pairs is also
    accepted.
    """
    if isinstance(source, JordanReport):
        pairs = [(c.eigenvalue, size) for c in source.clusters for size in c.block_sizes]
    else:
        pairs = [(complex(lam), int(size)) for lam, size in source]
    if sum(size for _, size in pairs) % 2:
        raise ConfigError("a bosonic spectrum has even total dimension")
    pairs.sort(key=lambda p: _ordering_key(*p))
    return SpectrumPartition.from_sizes([p[0] for p in pairs], [p[1] for p in pairs])


def k_vectors(sigma: int, k: int) -> list[tuple[int, ...]]:
    """All non-negative integer vectors of length ``sigma`` summing to ``k``, colex order."""
    if sigma < 1 or k < 0:
        raise ConfigError("need at least one cluster and a non-negative order")
    out = []
    # stars and bars: choose the positions of sigma - 1 separators among k + sigma - 1 slots
    for bars in combinations(range(k + sigma - 1), sigma - 1):
        edges = (-1, *bars, k + sigma - 1)
        out.append(tuple(b - a - 1 for a, b in zip(edges, edges[1:])))
    out.sort(key=lambda v: v[::-1])
    return out


@dataclass(frozen=True)
class MomentClass:
    k_vector: tuple[int, ...]
    k: int
    Lambda: complex
    d_e: int
    d_d: int
    N_b: int

    @property
    def genuine_ed(self) -> int:
        return self.N_b

    @property
    def genuine_dd(self) -> int:
        return 1

    @property
    def induced_ed(self) -> int:
        return self.d_e - self.N_b


def moment_classes(p: SpectrumPartition, k: int) -> list[MomentClass]:
    if k < 1:
        raise ConfigError("moment order must be at least 1")
    lams = [c.eigenvalue for c in p.clusters]
    sizes = p.sizes
    out = []
    for vec in k_vectors(p.sigma, k):
        lam = sum((kj * lj for kj, lj in zip(vec, lams)), 0j)
        d_e = math.prod(n**kj for n, kj in zip(sizes, vec))
        d_d = math.factorial(k) // math.prod(math.factorial(kj) for kj in vec)
        n_b = math.prod(math.comb(n + kj - 1, kj) for n, kj in zip(sizes, vec))
        out.append(MomentClass(vec, k, complex(lam), d_e, d_d, n_b))
    return out


def moment_counts(p: SpectrumPartition, k: int) -> tuple[int, int, int]:
    """``(N_B, sum of N_b over classes, N_b over all 2n operators)``; the last two agree."""
    if k < 1:
        raise ConfigError("moment order must be at least 1")
    n_classes = math.comb(p.sigma + k - 1, k)
    total = sum(c.N_b for c in moment_classes(p, k))
    return n_classes, total, math.comb(p.total_dim + k - 1, k)


def ordering_degeneracy(monomial: Sequence[Any]) -> int:
    """Number of distinct orderings of the factors of ``monomial``."""
    counts = Counter(monomial)
    return math.factorial(len(monomial)) // math.prod(math.factorial(c) for c in counts.values())


def class_monomials(p: SpectrumPartition, vec: Sequence[int]) -> list[tuple[str, ...]]:
    """Symmetric monomials of a class, factors named ``"B<j>[<e>]"``."""
    per_cluster = []
    for cluster, kj in zip(p.clusters, vec):
        names = [f"{cluster.label}[{e}]" for e in range(cluster.size)]
        per_cluster.append(list(combinations_with_replacement(names, kj)))
    return [tuple(x for part in parts for x in part) for parts in product(*per_cluster)]


# ---------------------------------------------------------------------------
# Tables


@dataclass(frozen=True)
class MomentRow:
    moment: MomentClass
    labels: str
    group: int
    combined: str
    genuine_combined: str
    ordering_degeneracies: tuple[int, ...]

    @property
    def lambda_re(self) -> float:
        return self.moment.Lambda.real

    @property
    def lambda_im(self) -> float:
        """Decay part: the eigenfrequency reads ``re - i * im``."""
        return -self.moment.Lambda.imag


def _format_groups(pairs: Iterable[tuple[int, int]]) -> str:
    """Sum ``dd`` per ``ed`` and print ``"dd x ed"`` terms, largest ``ed`` first.

    Non-exceptional terms (``ed == 1``) are dropped when an exceptional one
    shares the eigenfrequency: they are plain coincidences, not part of the
    hybrid point.
    """
    totals: Counter[int] = Counter()
    for dd, ed in pairs:
        totals[ed] += dd
    eds = sorted(totals, reverse=True)
    if eds[0] > 1:
        eds = [ed for ed in eds if ed > 1]
    return " + ".join(f"{totals[ed]}x{ed}" for ed in eds)


def _class_label(p: SpectrumPartition, vec: Sequence[int]) -> str:
    parts = []
    for cluster, kj in zip(p.clusters, vec):
        if kj == 1:
            parts.append(cluster.label)
        elif kj > 1:
            parts.append(f"{cluster.label}^{kj}")
    return " ".join(parts)


@dataclass(frozen=True)
class MomentClassTable:
    partition: SpectrumPartition
    k: int
    rows: tuple[MomentRow, ...]

    def find(self, k_vector: Sequence[int]) -> MomentRow:
        target = tuple(k_vector)
        for row in self.rows:
            if row.moment.k_vector == target:
                return row
        raise KeyError(target)

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "partition": [
                {"label": c.label, "eigenvalue": [c.eigenvalue.real, c.eigenvalue.imag], "size": c.size}
                for c in self.partition.clusters
            ],
            "rows": [
                {
                    "k_vector": list(r.moment.k_vector),
                    "moment": r.labels,
                    "lambda_re": r.lambda_re,
                    "lambda_im": r.lambda_im,
                    "group": r.group,
                    "d_e": r.moment.d_e,
                    "d_d": r.moment.d_d,
                    "N_b": r.moment.N_b,
                    "induced_ed": r.moment.induced_ed,
                    "partial": f"{r.moment.d_d}x{r.moment.d_e}",
                    "combined": r.combined,
                    "genuine_partial": f"{r.moment.genuine_dd}x{r.moment.genuine_ed}",
                    "genuine_combined": r.genuine_combined,
                    "ordering_degeneracies": list(r.ordering_degeneracies),
                }
                for r in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MomentClassTable":
        partition = SpectrumPartition(
            tuple(
                PartitionCluster(complex(*c["eigenvalue"]), int(c["size"]), str(c["label"]))
                for c in data["partition"]
            )
        )
        return table_from_partition(partition, int(data["k"]))

    CSV_COLUMNS = (
        "k_vector",
        "moment",
        "lambda_re",
        "lambda_im",
        "group",
        "d_e",
        "d_d",
        "N_b",
        "induced_ed",
        "partial",
        "combined",
        "genuine_partial",
        "genuine_combined",
    )

    def to_csv(self, header_comment: str | None = None) -> str:
        buffer = io.StringIO()
        if header_comment:
            buffer.write(f"# {header_comment}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.CSV_COLUMNS)
        for row in self.to_dict()["rows"]:
            values = [row[c] for c in self.CSV_COLUMNS]
            values[0] = " ".join(str(x) for x in values[0])
            writer.writerow([repr(v) if isinstance(v, float) else v for v in values])
        return buffer.getvalue()


def _snap(z: complex, atol: float) -> complex:
    re = 0.0 if abs(z.real) <= atol else z.real
    im = 0.0 if abs(z.imag) <= atol else z.imag
    return complex(re, im)


def table_from_partition(p: SpectrumPartition, k: int, tol: float = 1e-9) -> MomentClassTable:
    """Per-class degeneracies with combined columns for classes sharing an eigenfrequency.

    Real or imaginary parts below ``tol`` times the spectral scale are
    printed as exact zeros.
    """
    scale = max([abs(c.eigenvalue) for c in p.clusters] + [1.0]) * k
    classes = [replace(c, Lambda=_snap(c.Lambda, tol * scale)) for c in moment_classes(p, k)]
    groups: list[list[int]] = []
    anchors: list[complex] = []
    for i, cls_ in enumerate(classes):
        for g, anchor in enumerate(anchors):
            if abs(cls_.Lambda - anchor) <= tol * scale:
                groups[g].append(i)
                break
        else:
            anchors.append(cls_.Lambda)
            groups.append([i])
    group_of = {i: g for g, members in enumerate(groups) for i in members}
    combined = [_format_groups((classes[i].d_d, classes[i].d_e) for i in members) for members in groups]
    genuine = [_format_groups((1, classes[i].N_b) for i in members) for members in groups]
    rows = []
    for i, cls_ in enumerate(classes):
        g = group_of[i]
        monomials = class_monomials(p, cls_.k_vector)
        rows.append(
            MomentRow(
                cls_,
                _class_label(p, cls_.k_vector),
                g,
                combined[g],
                genuine[g],
                tuple(ordering_degeneracy(mono) for mono in monomials),
            )
        )
    return MomentClassTable(p, k, tuple(rows))


def generate_table(
    spec: SystemSpec,
    k: int,
    rank_tol: float = DEFAULT_RANK_TOL,
    cluster_tol: float | None = None,
) -> MomentClassTable:
    """Moment-class table of order ``k`` from the numerical Jordan structure of ``spec``."""
    report = jordan_structure(build_system(spec), rank_tol, cluster_tol)
    return table_from_partition(partition_spectrum(report), k)

