"""Dynamical matrices of damped/amplified multimode bosonic systems.

Every matrix lives in the interleaved basis ``[a1, a1+, a2, a2+, ...]`` and
generates the linear Heisenberg-Langevin equations ``da/dt = -i M a + L``.
Mode ``j`` contributes the diagonal block ``-i diag(g_j/2, g_j/2)``; a
bidirectional link between two modes places the coupling block

    xi = [[eps, kappa], [-kappa, -eps]]

at both off-diagonal positions, while a one-way link places a block only
below the diagonal (from the source mode's columns into the target mode's
rows).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Iterator, Mapping, Sequence, Union

import numpy as np

from .errors import ConfigError, ConstraintError

__all__ = [
    "Topology",
    "CouplingKind",
    "CouplingParams",
    "RateSet",
    "Concat",
    "SystemSpec",
    "DynamicalMatrix",
    "EntrySite",
    "CouplingSite",
    "RateSite",
    "build_system",
    "build_reduced",
    "coupling_block",
    "apply_constraint",
    "satisfies_constraint",
    "constraint_names",
    "rate_aggregates",
    "rates_from_aggregates",
    "perturb",
    "parse_site",
]


class Topology(str, Enum):
    CIRCULAR4 = "circular4"
    TETRAHEDRAL4 = "tetrahedral4"
    CHAIN = "chain"
    UNICONCAT = "uniconcat"


class CouplingKind(str, Enum):
    """How a one-way link between two subsystems enters the matrix."""

    MATRIX = "xi"
    HAMILTONIAN_1 = "hamiltonian-1"
    HAMILTONIAN_2 = "hamiltonian-2"


_TOPOLOGY_ALIASES = {
    "circular4": Topology.CIRCULAR4,
    "circular": Topology.CIRCULAR4,
    "tetrahedral4": Topology.TETRAHEDRAL4,
    "tetrahedral": Topology.TETRAHEDRAL4,
    "chain": Topology.CHAIN,
    "uniconcat": Topology.UNICONCAT,
    "concat": Topology.UNICONCAT,
}


def _finite(value: Any, name: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a real number, got {value!r}") from exc
    if not math.isfinite(out):
        raise ConfigError(f"{name} must be finite, got {value!r}")
    return out


@dataclass(frozen=True)
class CouplingParams:
    """Linear (``epsilon``) and nonlinear (``kappa``) coupling strengths."""

    epsilon: float
    kappa: float

    def __post_init__(self) -> None:
        eps = _finite(self.epsilon, "epsilon")
        kap = _finite(self.kappa, "kappa")
        if eps < 0 or kap < 0:
            raise ConfigError("coupling strengths must be non-negative")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "kappa", kap)

    @property
    def zeta(self) -> complex:
        """sqrt(eps^2 - kappa^2); purely imaginary once kappa exceeds epsilon."""
        return complex(np.sqrt(complex(self.epsilon**2 - self.kappa**2)))

    def xi(self) -> np.ndarray:
        return np.array(
            [[self.epsilon, self.kappa], [-self.kappa, -self.epsilon]], dtype=complex
        )


@dataclass(frozen=True)
class RateSet:
    """Per-mode rates: positive values damp, negative values amplify."""

    gamma: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(_finite(g, f"gamma[{i}]") for i, g in enumerate(self.gamma))
        object.__setattr__(self, "gamma", values)

    def __len__(self) -> int:
        return len(self.gamma)

    def __iter__(self) -> Iterator[float]:
        return iter(self.gamma)

    def __getitem__(self, index: int) -> float:
        return self.gamma[index]


@dataclass(frozen=True)
class Concat:
    """Two linear chains joined by one-way links.

    ``edges`` holds ``(source, target)`` pairs of global 1-based mode numbers;
    every source must belong to the left chain and every target to the right
    chain. The default links the last left mode to the first right mode.
    """

    left: int
    right: int
    edges: tuple[tuple[int, int], ...] = ()
    kind: CouplingKind = CouplingKind.MATRIX

    def __post_init__(self) -> None:
        if int(self.left) < 1 or int(self.right) < 1:
            raise ConfigError("both concatenated subsystems need at least one mode")
        object.__setattr__(self, "left", int(self.left))
        object.__setattr__(self, "right", int(self.right))
        try:
            kind = CouplingKind(self.kind)
        except ValueError as exc:
            raise ConfigError(f"unknown coupling kind {self.kind!r}") from exc
        object.__setattr__(self, "kind", kind)
        edges = tuple((int(s), int(t)) for s, t in self.edges) or (
            (self.left, self.left + 1),
        )
        total = self.left + self.right
        for source, target in edges:
            for mode in (source, target):
                if not 1 <= mode <= total:
                    raise ConfigError(f"edge {source}->{target} references a nonexistent mode")
            if not (source <= self.left < target):
                raise ConfigError(
                    f"edge {source}->{target} must point from the left subsystem to the right one"
                )
        if len(set(edges)) != len(edges):
            raise ConfigError("duplicate concatenation edge")
        object.__setattr__(self, "edges", edges)


@dataclass(frozen=True)
class SystemSpec:
    """Declarative description of one bosonic configuration."""

    topology: Topology
    couplings: CouplingParams
    rates: RateSet
    constraint: tuple[str, ...] = ()
    n_modes: int | None = None
    concat: Concat | None = None

    def __post_init__(self) -> None:
        topology = _parse_topology(self.topology)
        object.__setattr__(self, "topology", topology)
        if not isinstance(self.rates, RateSet):
            object.__setattr__(self, "rates", RateSet(tuple(self.rates)))
        if isinstance(self.constraint, str):
            object.__setattr__(self, "constraint", (self.constraint,))
        else:
            object.__setattr__(self, "constraint", tuple(self.constraint or ()))

        if topology in (Topology.CIRCULAR4, Topology.TETRAHEDRAL4):
            expected = 4
        elif topology is Topology.CHAIN:
            n = self.n_modes if self.n_modes is not None else len(self.rates)
            expected = int(n)
        else:
            if self.concat is None:
                raise ConfigError("a concatenated system needs its concat description")
            expected = self.concat.left + self.concat.right
        if self.n_modes is not None and int(self.n_modes) != expected:
            raise ConfigError(f"mode count {self.n_modes} does not match topology ({expected})")
        if expected < 1:
            raise ConfigError("a system needs at least one mode")
        if topology is not Topology.UNICONCAT and self.concat is not None:
            raise ConfigError("concat description given for a non-concatenated topology")
        object.__setattr__(self, "n_modes", expected)
        if len(self.rates) != expected:
            raise ConfigError(f"expected {expected} rates, got {len(self.rates)}")
        for name in self.constraint:
            _lookup_constraint(name, self)

    @property
    def n(self) -> int:
        return int(self.n_modes)  # type: ignore[arg-type]

    @property
    def signature(self) -> str:
        """Short structural label such as ``chain(3)`` or ``uniconcat(2+3)``."""
        if self.topology is Topology.CHAIN:
            return f"chain({self.n})"
        if self.topology is Topology.UNICONCAT:
            assert self.concat is not None
            return f"uniconcat({self.concat.left}+{self.concat.right})"
        return self.topology.value

    def with_rates(self, gamma: Sequence[float]) -> "SystemSpec":
        return replace(self, rates=RateSet(tuple(gamma)))

    def with_couplings(self, epsilon: float, kappa: float) -> "SystemSpec":
        return replace(self, couplings=CouplingParams(epsilon, kappa))

    # -- constructors -------------------------------------------------

    @classmethod
    def circular4(cls, epsilon: float, kappa: float, gamma: Sequence[float]) -> "SystemSpec":
        return cls(Topology.CIRCULAR4, CouplingParams(epsilon, kappa), RateSet(tuple(gamma)))

    @classmethod
    def tetrahedral4(cls, epsilon: float, kappa: float, gamma: Sequence[float]) -> "SystemSpec":
        return cls(Topology.TETRAHEDRAL4, CouplingParams(epsilon, kappa), RateSet(tuple(gamma)))

    @classmethod
    def chain(cls, epsilon: float, kappa: float, gamma: Sequence[float]) -> "SystemSpec":
        return cls(Topology.CHAIN, CouplingParams(epsilon, kappa), RateSet(tuple(gamma)))

    @classmethod
    def uniconcat(
        cls,
        left: int,
        right: int,
        epsilon: float,
        kappa: float,
        gamma: Sequence[float],
        edges: Sequence[tuple[int, int]] = (),
        kind: CouplingKind | str = CouplingKind.MATRIX,
    ) -> "SystemSpec":
        concat = Concat(left, right, tuple(edges), CouplingKind(kind))
        return cls(
            Topology.UNICONCAT,
            CouplingParams(epsilon, kappa),
            RateSet(tuple(gamma)),
            concat=concat,
        )

    # -- JSON ---------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        concat = None
        if self.concat is not None:
            concat = {
                "left": self.concat.left,
                "right": self.concat.right,
                "edges": [list(e) for e in self.concat.edges],
                "kind": self.concat.kind.value,
            }
        constraint: Any = None
        if len(self.constraint) == 1:
            constraint = self.constraint[0]
        elif self.constraint:
            constraint = list(self.constraint)
        return {
            "topology": self.topology.value,
            "n": self.n,
            "epsilon": self.couplings.epsilon,
            "kappa": self.couplings.kappa,
            "gamma": list(self.rates.gamma),
            "constraint": constraint,
            "concat": concat,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SystemSpec":
        """Parse the JSON form and apply any listed constraints to the rates."""
        if not isinstance(data, Mapping):
            raise ConfigError("system description must be a JSON object")
        missing = [k for k in ("topology", "epsilon", "kappa", "gamma") if k not in data]
        if missing:
            raise ConfigError(f"system description lacks {', '.join(missing)}")
        topology = _parse_topology(data["topology"])
        gamma = data["gamma"]
        if not isinstance(gamma, (list, tuple)):
            raise ConfigError("gamma must be a list of rates")
        concat = None
        raw_concat = data.get("concat")
        if raw_concat is not None:
            if not isinstance(raw_concat, Mapping):
                raise ConfigError("concat must be an object")
            try:
                concat = Concat(
                    int(raw_concat["left"]),
                    int(raw_concat["right"]),
                    tuple(tuple(e) for e in raw_concat.get("edges") or ()),  # type: ignore[misc]
                    raw_concat.get("kind", CouplingKind.MATRIX.value),
                )
            except (KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"malformed concat description: {exc}") from exc
        raw_constraint = data.get("constraint")
        if raw_constraint is None:
            names: tuple[str, ...] = ()
        elif isinstance(raw_constraint, str):
            names = tuple(part for part in raw_constraint.split("+") if part)
        else:
            names = tuple(str(x) for x in raw_constraint)
        n = data.get("n")
        spec = cls(
            topology,
            CouplingParams(data["epsilon"], data["kappa"]),
            RateSet(tuple(gamma)),
            n_modes=None if n is None else int(n),
            concat=concat,
        )
        for name in names:
            spec = apply_constraint(spec, name)
        return spec


def _parse_topology(value: Any) -> Topology:
    if isinstance(value, Topology):
        return value
    key = str(value).strip().lower().replace("_", "").replace("-", "")
    try:
        return _TOPOLOGY_ALIASES[key]
    except KeyError as exc:
        raise ConfigError(f"unknown topology {value!r}") from exc


# ---------------------------------------------------------------------------
# Matrix assembly


@dataclass(frozen=True, eq=False)
class DynamicalMatrix:
    """A 2n x 2n dynamical matrix together with its 2x2 block layout."""

    entries: np.ndarray
    n_modes: int
    coupling_blocks: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        arr = np.array(self.entries, dtype=complex)
        if arr.shape != (2 * self.n_modes, 2 * self.n_modes):
            raise ConfigError(f"matrix shape {arr.shape} does not fit {self.n_modes} modes")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    def __array__(self, dtype: Any = None, copy: Any = None) -> np.ndarray:
        out = np.array(self.entries, dtype=dtype if dtype is not None else complex)
        return out

    @property
    def dim(self) -> int:
        return 2 * self.n_modes

    def block(self, row: int, col: int) -> np.ndarray:
        return np.array(self.entries[2 * row : 2 * row + 2, 2 * col : 2 * col + 2])


def coupling_block(kind: CouplingKind | str, couplings: CouplingParams) -> np.ndarray:
    """2x2 block written into the target mode's rows for a one-way link.

    ``xi`` reuses the bidirectional coupling block. The two Hamiltonian
    variants follow from the Heisenberg equations of
    ``eps a_s a_t+ + kappa a_s a_t`` and ``eps a_s a_t+ + kappa a_s+ a_t+``
    (source ``s``, target ``t``), keeping only the rows of the target mode so
    that the link stays one-way.
    """
    kind = CouplingKind(kind)
    eps, kap = couplings.epsilon, couplings.kappa
    if kind is CouplingKind.MATRIX:
        return couplings.xi()
    if kind is CouplingKind.HAMILTONIAN_1:
        return np.array([[eps, 0.0], [-kap, 0.0]], dtype=complex)
    return np.array([[eps, kap], [0.0, 0.0]], dtype=complex)


def _links(spec: SystemSpec) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Bidirectional pairs and one-way (target, source) pairs, 0-based."""
    n = spec.n
    if spec.topology is Topology.CIRCULAR4:
        return [(0, 1), (1, 2), (2, 3), (3, 0)], []
    if spec.topology is Topology.TETRAHEDRAL4:
        return [(i, j) for i in range(4) for j in range(i + 1, 4)], []
    if spec.topology is Topology.CHAIN:
        return [(j, j + 1) for j in range(n - 1)], []
    assert spec.concat is not None
    left, right = spec.concat.left, spec.concat.right
    pairs = [(j, j + 1) for j in range(left - 1)]
    pairs += [(left + j, left + j + 1) for j in range(right - 1)]
    oneway = [(t - 1, s - 1) for s, t in spec.concat.edges]
    return pairs, oneway


def build_system(spec: SystemSpec) -> DynamicalMatrix:
    """Assemble the full 2n x 2n dynamical matrix of ``spec``."""
    n = spec.n
    m = np.zeros((2 * n, 2 * n), dtype=complex)
    for j, g in enumerate(spec.rates):
        m[2 * j, 2 * j] = m[2 * j + 1, 2 * j + 1] = -0.5j * g
    xi = spec.couplings.xi()
    pairs, oneway = _links(spec)
    blocks: list[tuple[int, int]] = []
    for i, j in pairs:
        m[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = xi
        m[2 * j : 2 * j + 2, 2 * i : 2 * i + 2] = xi
        blocks += [(i, j), (j, i)]
    if oneway:
        assert spec.concat is not None
        link = coupling_block(spec.concat.kind, spec.couplings)
        for target, source in oneway:
            m[2 * target : 2 * target + 2, 2 * source : 2 * source + 2] = link
            if spec.concat.kind is CouplingKind.MATRIX:
                blocks.append((target, source))
    return DynamicalMatrix(m, n, tuple(sorted(blocks)))


def build_reduced(spec: SystemSpec, xi_value: complex) -> np.ndarray:
    """n x n matrix obtained by replacing every coupling block with a number.

    This is the block form seen by one eigenvector of ``xi``; it exists only
    when every link uses the ``xi`` block.
    """
    if spec.concat is not None and spec.concat.kind is not CouplingKind.MATRIX:
        raise ConfigError("Hamiltonian-variant links do not share the xi block")
    n = spec.n
    m = np.zeros((n, n), dtype=complex)
    for j, g in enumerate(spec.rates):
        m[j, j] = -0.5j * g
    pairs, oneway = _links(spec)
    for i, j in pairs:
        m[i, j] = m[j, i] = xi_value
    for target, source in oneway:
        m[target, source] = xi_value
    return m


# ---------------------------------------------------------------------------
# Rate constraints


@dataclass(frozen=True)
class _Constraint:
    name: str
    signatures: frozenset[str]
    rule: Callable[[list[float]], list[float]]
    summary: str


def _alternating(g: list[float]) -> list[float]:
    return [g[0], g[1], g[0], g[1]]


def _pairwise(g: list[float]) -> list[float]:
    return [g[0], g[0], g[2], g[2]]


def _equal(g: list[float]) -> list[float]:
    return [g[1], g[1]]


def _gain_loss(g: list[float]) -> list[float]:
    return [g[0], -g[0]]


def _mean_feed(g: list[float]) -> list[float]:
    return [(g[1] + g[2]) / 2, g[1], g[2]]


def _centered(g: list[float]) -> list[float]:
    return [g[0], (g[0] + g[2]) / 2, g[2]]


def _balanced(g: list[float]) -> list[float]:
    total = g[2] + g[4]
    spread = g[0] - g[1]
    return [(total + spread) / 2, (total - spread) / 2, g[2], total / 2, g[4]]


def _split_match(g: list[float]) -> list[float]:
    total = g[0] + g[1]
    spread = (g[2] - g[4]) / math.sqrt(2.0)
    return [(total + spread) / 2, (total - spread) / 2, g[2], g[3], g[4]]


def _mirrored(g: list[float]) -> list[float]:
    mid = (g[0] + g[2]) / 2
    return [g[0], mid, g[2], g[0], mid, g[2]]


_CONSTRAINTS: dict[str, _Constraint] = {
    c.name: c
    for c in (
        _Constraint("alternating", frozenset({"circular4", "uniconcat(2+2)"}), _alternating,
                    "g3 = g1 and g4 = g2"),
        _Constraint("pairwise", frozenset({"tetrahedral4"}), _pairwise,
                    "g2 = g1 and g4 = g3"),
        _Constraint("equal", frozenset({"uniconcat(1+1)", "chain(2)"}), _equal,
                    "g1 = g2"),
        _Constraint("gain-loss", frozenset({"uniconcat(1+1)", "chain(2)"}), _gain_loss,
                    "g2 = -g1"),
        _Constraint("mean-feed", frozenset({"uniconcat(1+2)"}), _mean_feed,
                    "g1 = (g2 + g3)/2"),
        _Constraint("centered", frozenset({"chain(3)"}), _centered,
                    "g2 = (g1 + g3)/2"),
        _Constraint("balanced", frozenset({"uniconcat(2+3)"}), _balanced,
                    "g1 + g2 = g3 + g5 and 2 g4 = g3 + g5"),
        _Constraint("split-match", frozenset({"uniconcat(2+3)"}), _split_match,
                    "g1 - g2 = (g3 - g5)/sqrt(2)"),
        _Constraint("mirrored", frozenset({"uniconcat(3+3)"}), _mirrored,
                    "g4 = g1, g6 = g3 and g2 = g5 = (g1 + g3)/2"),
    )
}


def constraint_names() -> list[str]:
    return sorted(_CONSTRAINTS)


def _lookup_constraint(name: str, spec: SystemSpec) -> _Constraint:
    try:
        constraint = _CONSTRAINTS[name]
    except KeyError as exc:
        raise ConstraintError(f"unknown constraint {name!r}") from exc
    if spec.signature not in constraint.signatures:
        raise ConstraintError(f"constraint {name!r} does not apply to {spec.signature}")
    return constraint


def apply_constraint(spec: SystemSpec, name: str) -> SystemSpec:
    """Overwrite the dependent rates so that ``spec`` obeys constraint ``name``."""
    constraint = _lookup_constraint(name, spec)
    gamma = constraint.rule(list(spec.rates.gamma))
    names = spec.constraint if name in spec.constraint else spec.constraint + (name,)
    return replace(spec, rates=RateSet(tuple(gamma)), constraint=names)


def satisfies_constraint(spec: SystemSpec, name: str, rtol: float = 1e-12) -> bool:
    constraint = _lookup_constraint(name, spec)
    current = np.array(spec.rates.gamma)
    target = np.array(constraint.rule(list(spec.rates.gamma)))
    scale = max(1.0, float(np.max(np.abs(current))))
    return bool(np.all(np.abs(current - target) <= rtol * scale))


# ---------------------------------------------------------------------------
# Rate aggregates


def rate_aggregates(spec: SystemSpec) -> dict[str, float]:
    """Sum/difference rates used by the closed forms of each topology.

    ``gamma_plus`` and ``gamma_minus`` are a quarter of the sum and difference
    of the two rates that pair up in the primary subsystem; for a
    concatenation whose second part has two or more modes the second part's
    difference rate is reported as ``gamma_minus_bar``.
    """
    g = spec.rates.gamma
    sig = spec.signature
    if sig == "circular4":
        return _pm(g[0], g[1])
    if sig == "tetrahedral4":
        return _pm(g[0], g[2])
    if spec.topology is Topology.CHAIN:
        return _pm(g[0], g[-1]) if spec.n >= 2 else {}
    assert spec.concat is not None
    left, right = spec.concat.left, spec.concat.right
    out: dict[str, float] = {}
    if left >= 2:
        out = _pm(g[0], g[left - 1])
        if right >= 2:
            out["gamma_minus_bar"] = (g[left] - g[-1]) / 4
    elif right >= 2:
        out = _pm(g[left], g[-1])
    return out


def _pm(a: float, b: float) -> dict[str, float]:
    return {"gamma_plus": (a + b) / 4, "gamma_minus": (a - b) / 4}


def rates_from_aggregates(spec: SystemSpec, gamma_plus: float, gamma_minus: float) -> tuple[float, ...]:
    """Rates of ``spec``'s topology that realise the given aggregates.

    The returned rates satisfy the topology's usual symmetry constraints; for
    ``uniconcat(2+3)`` the second-part spread is tied to the first by the
    split-match condition.
    """
    hi, lo, mid = 2 * (gamma_plus + gamma_minus), 2 * (gamma_plus - gamma_minus), 2 * gamma_plus
    sig = spec.signature
    table: dict[str, tuple[float, ...]] = {
        "circular4": (hi, lo, hi, lo),
        "tetrahedral4": (hi, hi, lo, lo),
        "chain(2)": (hi, lo),
        "chain(3)": (hi, mid, lo),
        "uniconcat(1+2)": (mid, hi, lo),
        "uniconcat(2+2)": (hi, lo, hi, lo),
        "uniconcat(3+3)": (hi, mid, lo, hi, mid, lo),
    }
    if sig == "uniconcat(2+3)":
        bar = math.sqrt(2.0) * gamma_minus
        return (hi, lo, 2 * (gamma_plus + bar), mid, 2 * (gamma_plus - bar))
    try:
        return table[sig]
    except KeyError as exc:
        raise ConfigError(f"no aggregate parametrisation for {sig}") from exc


# ---------------------------------------------------------------------------
# Perturbations


@dataclass(frozen=True)
class EntrySite:
    """A single matrix entry (0-based)."""

    row: int
    col: int


@dataclass(frozen=True)
class CouplingSite:
    """A 2x2 pattern added to coupling blocks (all of them when ``blocks`` is None)."""

    pattern: tuple[tuple[float, float], tuple[float, float]]
    blocks: tuple[tuple[int, int], ...] | None = None


@dataclass(frozen=True)
class RateSite:
    """Entry ``(row, col)`` of mode ``mode``'s rate block; enters multiplied by -i."""

    mode: int
    row: int = 0
    col: int = 0


Site = Union[EntrySite, CouplingSite, RateSite]
MatrixLike = Union[DynamicalMatrix, np.ndarray]


def perturb(m: MatrixLike, site: Site, delta: float) -> MatrixLike:
    """Return ``m`` plus ``delta`` at ``site``; the input is never modified."""
    delta = float(delta)
    if not math.isfinite(delta):
        raise ConfigError("perturbation must be finite")
    layout = m if isinstance(m, DynamicalMatrix) else None
    arr = np.array(m, dtype=complex)
    dim = arr.shape[0]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ConfigError("perturb expects a square matrix")
    if isinstance(site, EntrySite):
        if not (0 <= site.row < dim and 0 <= site.col < dim):
            raise ConfigError(f"entry ({site.row}, {site.col}) outside a {dim}x{dim} matrix")
        if delta != 0.0:
            arr[site.row, site.col] += delta
    elif isinstance(site, RateSite):
        if dim % 2 or not (0 <= site.mode < dim // 2) or site.row not in (0, 1) or site.col not in (0, 1):
            raise ConfigError("rate-block selector out of range")
        if delta != 0.0:
            arr[2 * site.mode + site.row, 2 * site.mode + site.col] += -1j * delta
    elif isinstance(site, CouplingSite):
        pattern = np.array(site.pattern, dtype=complex)
        if pattern.shape != (2, 2):
            raise ConfigError("coupling pattern must be 2x2")
        blocks = site.blocks
        if blocks is None:
            if layout is None:
                raise ConfigError("a plain array has no coupling layout; list the blocks")
            blocks = layout.coupling_blocks
        for i, j in blocks:
            if dim % 2 or not (0 <= i < dim // 2 and 0 <= j < dim // 2):
                raise ConfigError(f"coupling block ({i}, {j}) out of range")
        if delta != 0.0:
            for i, j in blocks:
                arr[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] += delta * pattern
    else:
        raise ConfigError(f"unknown site selector {site!r}")
    if layout is not None:
        return DynamicalMatrix(arr, layout.n_modes, layout.coupling_blocks)
    return arr


def parse_site(text: str) -> Site:
    """Parse ``entry:R,C``, ``rate:MODE,R,C`` or ``xi:a,b,c,d`` (0-based)."""
    try:
        kind, _, rest = text.partition(":")
        values = [v for v in rest.split(",") if v.strip()]
        kind = kind.strip().lower()
        if kind == "entry" and len(values) == 2:
            return EntrySite(int(values[0]), int(values[1]))
        if kind == "rate" and len(values) in (1, 3):
            nums = [int(v) for v in values] + [0, 0]
            return RateSite(nums[0], nums[1], nums[2])
        if kind == "xi" and len(values) == 4:
            a, b, c, d = (float(v) for v in values)
            return CouplingSite(((a, b), (c, d)))
    except ValueError as exc:
        raise ConfigError(f"malformed site selector {text!r}") from exc
    raise ConfigError(f"malformed site selector {text!r}")
