"""Command-line front end: batch commands and parameter-space scans.

Every command reads a JSON config (``--config``), lets flags override it,
and writes CSV or JSON whose first line (CSV) or ``"config"`` key (JSON)
echoes the resolved config. Couplings and rates in a config are measured
in units of ``epsilon`` unless ``"units": "raw"`` is given.

Exit status: 0 on success, 1 when ``validate`` finds a failing check,
2 for configuration or I/O problems, 3 when a numerical decision is
indeterminate.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dynamics import (
    TRAJECTORY_COLUMNS,
    DampedAmplifiedPair,
    commutator_check,
    commutator_matrix,
    gaussian_evolution,
    noise_diffusion,
    reservoir_consistency,
)
from .errors import ConfigError, EigenpointError, IndeterminacyError, NoClosedFormError, QuadratureError
from .model import (
    SystemSpec,
    build_system,
    rate_aggregates,
    rates_from_aggregates,
    satisfies_constraint,
)
from .moments import generate_table
from .singularity import DEFAULT_RANK_TOL, classify, default_deltas, numeric_eigensystem
from .spectra import analytic_eigensystem, lift_full_spectrum

log = logging.getLogger(__name__)

COMMANDS = ("build", "spectrum", "classify", "scan-locus", "evolve", "moments", "validate")
SWEEPABLE = ("epsilon", "kappa", "gamma_plus", "gamma_minus")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


# ---------------------------------------------------------------------------
# Jobs


@dataclass(frozen=True)
class Sweep:
    name: str
    start: float
    stop: float
    steps: int

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


def _parameter_ok(name: str, n_modes: int) -> bool:
    if name in SWEEPABLE:
        return True
    if name.startswith("gamma") and name[5:].isdigit():
        return 1 <= int(name[5:]) <= n_modes
    return False


@dataclass(frozen=True)
class ScanJob:
    """One CLI run: a system template, optional sweeps and the output target."""

    command: str
    system: Mapping[str, Any] | None
    sweeps: tuple[Sweep, ...] = ()
    options: Mapping[str, Any] = field(default_factory=dict)
    out: str | None = None
    fmt: str = "csv"

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.fmt not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.fmt!r}")
        n_modes = 0
        if self.system is not None:
            n_modes = _template_spec(self.system, self.units).n
        seen = set()
        for sw in self.sweeps:
            if sw.steps < 2:
                raise ConfigError(f"sweep {sw.name!r} needs at least 2 steps")
            if not _parameter_ok(sw.name, n_modes):
                raise ConfigError(f"sweep parameter {sw.name!r} does not name a field of the system")
            if sw.name in seen:
                raise ConfigError(f"parameter {sw.name!r} is swept twice")
            seen.add(sw.name)

    @property
    def units(self) -> str:
        return str(self.options.get("units", "epsilon"))

    def grid(self) -> list[dict[str, float]]:
        """Sweep points in row-major order of the listed sweeps."""
        axes = [[(sw.name, float(v)) for v in sw.values()] for sw in self.sweeps]
        return [dict(point) for point in itertools.product(*axes)]

    def spec_at(self, point: Mapping[str, float]) -> SystemSpec:
        if self.system is None:
            raise ConfigError(f"command {self.command!r} needs a system description")
        return system_at(self.system, point, self.units)


def _template_spec(system: Mapping[str, Any], units: str) -> SystemSpec:
    return system_at(system, {}, units)


def system_at(system: Mapping[str, Any], point: Mapping[str, float], units: str = "epsilon") -> SystemSpec:
    """Build the raw spec for one sweep point.

    Individual rates (``gammaN``, 1-based) and couplings are set before the
    config's constraints are applied; aggregate rates (``gamma_plus``,
    ``gamma_minus``) are imposed afterwards through the topology's
    parametrisation.
    """
    if units not in ("epsilon", "raw"):
        raise ConfigError(f"unknown units {units!r}")
    data = dict(system)
    gamma = data.get("gamma")
    if not isinstance(gamma, (list, tuple)):
        raise ConfigError("gamma must be a list of rates")
    gamma = [float(g) for g in gamma]
    for name, value in point.items():
        if name in ("epsilon", "kappa"):
            data[name] = value
        elif name.startswith("gamma") and name[5:].isdigit():
            idx = int(name[5:]) - 1
            if not 0 <= idx < len(gamma):
                raise ConfigError(f"{name} is outside the system's {len(gamma)} rates")
            gamma[idx] = value
    try:
        eps = float(data["epsilon"])
        scale = eps if units == "epsilon" else 1.0
        data["kappa"] = float(data["kappa"]) * scale
    except KeyError as exc:
        raise ConfigError(f"system description lacks {exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"non-numeric coupling: {exc}") from exc
    data["gamma"] = [g * scale for g in gamma]
    spec = SystemSpec.from_dict(data)
    if "gamma_plus" in point or "gamma_minus" in point:
        agg = rate_aggregates(spec)
        if "gamma_plus" not in agg:
            raise ConfigError(f"{spec.signature} has no aggregate rates")
        gp = point.get("gamma_plus", agg["gamma_plus"] / scale) * scale
        gm = point.get("gamma_minus", agg["gamma_minus"] / scale) * scale
        spec = spec.with_rates(rates_from_aggregates(spec, gp, gm))
    return spec


def _parse_sweeps(raw: Any) -> tuple[Sweep, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ConfigError("sweep must be a list of {name, start, stop, steps} objects")
    out = []
    for item in raw:
        try:
            out.append(Sweep(str(item["name"]), float(item["start"]), float(item["stop"]), int(item["steps"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed sweep entry {item!r}") from exc
    return tuple(out)


# ---------------------------------------------------------------------------
# Locus scan


@dataclass(frozen=True)
class LocusCell:
    """A grid cell whose corners disagree on the number of distinct real parts.

    ``kappa`` and ``gamma_minus`` locate the refined crossing on one of the
    cell's edges (units of epsilon); ``ed``/``dd`` classify the spectrum there.
    """

    i: int
    j: int
    kappa: float
    gamma_minus: float
    ed: int
    dd: int


@dataclass(frozen=True, eq=False)
class LocusScan:
    kappas: np.ndarray
    gamma_minus: np.ndarray
    real_parts: np.ndarray  # (len(kappas), len(gamma_minus), dim), sorted
    counts: np.ndarray
    cells: tuple[LocusCell, ...]

    def exceptional_cells(self) -> list[LocusCell]:
        return [c for c in self.cells if c.ed >= 2]


def _distinct_real(values: np.ndarray, atol: float) -> int:
    re = np.sort(values.real)
    return 1 + int(np.sum(np.diff(re) > atol))


def scan_locus(
    system: Mapping[str, Any] | SystemSpec,
    kappas: Sequence[float],
    gamma_minus: Sequence[float],
    gamma_plus: float = 0.0,
    count_tol: float = 1e-2,
    confirm_cluster_tol: float = 1e-4,
    confirm_rank_tol: float = 1e-6,
    executor: ThreadPoolExecutor | None = None,
) -> LocusScan:
    """Map where eigenvalue real parts coalesce over ``(kappa, gamma_minus)``.

    Values are in units of epsilon. At each node the real parts are counted
    as distinct when they differ by more than ``count_tol * ||M||``; a cell
    whose corners disagree is refined along an edge and classified at the
    crossing. The count tolerance is deliberately coarse: near a
    high-order exceptional point round-off scatters the eigenvalues by
    roughly ``eps_mach ** (1 / order)``.
    """
    base = system if isinstance(system, SystemSpec) else _template_spec(system, "raw")
    eps = base.couplings.epsilon
    if not eps > 0:
        raise ConfigError("scan-locus needs a positive epsilon")
    kap = np.asarray(kappas, dtype=float)
    gam = np.asarray(gamma_minus, dtype=float)
    if kap.size < 2 or gam.size < 2:
        raise ConfigError("scan-locus needs at least 2 steps per axis")

    def spec_at(k: float, g: float) -> SystemSpec:
        s = base.with_couplings(eps, k * eps)
        return s.with_rates(rates_from_aggregates(s, gamma_plus * eps, g * eps))

    def eig_at(k: float, g: float) -> tuple[np.ndarray, float]:
        m = np.array(build_system(spec_at(k, g)))
        return np.linalg.eigvals(m), float(np.linalg.norm(m))

    def column(i: int) -> tuple[np.ndarray, np.ndarray]:
        re = []
        cnt = []
        for g in gam:
            vals, norm = eig_at(kap[i], g)
            re.append(np.sort(vals.real))
            cnt.append(_distinct_real(vals, count_tol * norm))
        return np.array(re), np.array(cnt)

    mapper: Callable = executor.map if executor is not None else map
    cols = list(mapper(column, range(kap.size)))
    real_parts = np.stack([c[0] for c in cols])
    counts = np.stack([c[1] for c in cols])

    flagged = [
        (i, j)
        for i in range(kap.size - 1)
        for j in range(gam.size - 1)
        if len({counts[i, j], counts[i + 1, j], counts[i, j + 1], counts[i + 1, j + 1]}) > 1
    ]

    def count_at(point: np.ndarray) -> int:
        vals, norm = eig_at(point[0], point[1])
        return _distinct_real(vals, count_tol * norm)

    def spread_sq(point: np.ndarray) -> float:
        vals, _ = eig_at(point[0], point[1])
        return float(np.ptp(vals.real) ** 2)

    def refine(cell: tuple[int, int]) -> LocusCell:
        i, j = cell
        corners = {
            (a, b): np.array([kap[a], gam[b]]) for a in (i, i + 1) for b in (j, j + 1)
        }
        edges = [((i, j), (i + 1, j)), ((i, j), (i, j + 1)), ((i, j + 1), (i + 1, j + 1)), ((i + 1, j), (i + 1, j + 1))]
        a, b = next(e for e in edges if counts[e[0]] != counts[e[1]])
        pa, pb = corners[a], corners[b]
        ca = counts[a]
        lo, hi = 0.0, 1.0
        for _ in range(48):
            mid = 0.5 * (lo + hi)
            if count_at(pa + mid * (pb - pa)) == ca:
                lo = mid
            else:
                hi = mid
        crossing = pa + lo * (pb - pa)
        # the squared spread of the real parts is linear in the distance to a
        # square-root branch point; extrapolate it from the split side
        split_dir = (pa - pb) if counts[a] > counts[b] else (pb - pa)
        offsets = np.geomspace(0.05, 1.5, 12)
        samples = [spread_sq(crossing + o * split_dir) for o in offsets]
        roots = np.roots(np.polyfit(offsets, samples, 4))
        real_roots = roots[np.abs(roots.imag) < 1e-9].real
        if real_roots.size:
            r = real_roots[np.argmin(np.abs(real_roots))]
            if abs(r) <= 1.5:
                crossing = crossing + r * split_dir
        m = build_system(spec_at(*crossing))
        ed, dd = 1, 1
        # a marginal rank decision at the loose tolerances is retried with
        # tighter ones; near kappa == epsilon both coupling branches crowd
        # one cluster and only a smaller radius separates them
        for c_shrink, r_shrink in itertools.product((1.0, 1e-1, 1e-2), (1.0, 1e-2)):
            try:
                rep = classify(
                    m,
                    cluster_tol=confirm_cluster_tol * c_shrink,
                    rank_tol=confirm_rank_tol * r_shrink,
                    sites=(),
                )
            except IndeterminacyError:
                continue
            ed, dd = rep.ed_order, rep.dd_order
            break
        return LocusCell(i, j, float(crossing[0]), float(crossing[1]), ed, dd)

    cells = tuple(mapper(refine, flagged))
    return LocusScan(kap, gam, real_parts, counts, cells)


# ---------------------------------------------------------------------------
# Command implementations. Each returns (columns, rows, json_payload, ok).


@dataclass
class Result:
    columns: Sequence[str]
    rows: list[list[Any]]
    payload: Any
    ok: bool = True


def _complex_pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _sorted_spectrum(values: np.ndarray) -> np.ndarray:
    return values[np.lexsort((values.imag, values.real))]


def _classify_options(opts: Mapping[str, Any]) -> dict[str, Any]:
    deltas = default_deltas(
        float(opts.get("delta_min", 1e-10)), float(opts.get("delta_max", 1e-4)), int(opts.get("delta_steps", 25))
    )
    return {
        "cluster_tol": opts.get("cluster_tol"),
        "rank_tol": float(opts.get("rank_tol", DEFAULT_RANK_TOL)),
        "deltas": deltas,
    }


def _run_build(job: ScanJob, pool: ThreadPoolExecutor) -> Result:
    if job.sweeps:
        raise ConfigError("build does not take sweeps")
    m = np.array(build_system(job.spec_at({})))
    rows = [[r, c, float(m[r, c].real), float(m[r, c].imag)] for r in range(m.shape[0]) for c in range(m.shape[1])]
    payload = {"dim": m.shape[0], "real": m.real.tolist(), "imag": m.imag.tolist()}
    return Result(("row", "col", "re", "im"), rows, payload)


def _spectrum_point(job: ScanJob, point: dict[str, float]) -> dict[str, Any]:
    spec = job.spec_at(point)
    m = np.array(build_system(spec))
    values = _sorted_spectrum(np.linalg.eigvals(m))
    gap = None
    try:
        analytic, _ = lift_full_spectrum(analytic_eigensystem(spec))
        cost = np.abs(values[:, None] - analytic[None, :])
        r, c = linear_sum_assignment(cost)
        gap = float(cost[r, c].max())
    except NoClosedFormError:
        pass
    return {"parameters": point, "eigenvalues": [_complex_pair(v) for v in values], "analytic_gap": gap}


def _run_spectrum(job: ScanJob, pool: ThreadPoolExecutor) -> Result:
    points = job.grid() or [{}]
    results = list(pool.map(lambda p: _spectrum_point(job, p), points))
    names = [sw.name for sw in job.sweeps]
    rows = []
    for res in results:
        for idx, (re, im) in enumerate(res["eigenvalues"]):
            gap = "" if res["analytic_gap"] is None else res["analytic_gap"]
            rows.append([res["parameters"][n] for n in names] + [idx, re, im, gap])
    return Result((*names, "index", "re", "im", "analytic_gap"), rows, {"results": results})


def _classify_point(job: ScanJob, point: dict[str, float]) -> dict[str, Any]:
    m = build_system(job.spec_at(point))
    report = classify(m, **_classify_options(job.options))
    return {"parameters": point, **report.to_dict()}


def _run_classify(job: ScanJob, pool: ThreadPoolExecutor) -> Result:
    points = job.grid() or [{}]
    results = list(pool.map(lambda p: _classify_point(job, p), points))
    names = [sw.name for sw in job.sweeps]
    rows = []
    for res in results:
        blocks = "|".join(
            " ".join(str(b) for b in c["block_sizes"]) for c in res["evidence"]["jordan"]["clusters"]
        )
        slopes = " ".join("" if s is None else repr(s) for s in res["evidence"]["splitting_exponents"])
        overlap = res["evidence"]["min_overlap"]
        rows.append(
            [res["parameters"][n] for n in names]
            + [res["kind"], res["ed_order"], res["dd_order"], *res["eigenvalue"], slopes, "" if overlap is None else overlap, blocks]
        )
    columns = (*names, "kind", "ed", "dd", "re", "im", "splitting_exponents", "min_overlap", "blocks")
    return Result(columns, rows, {"results": results})


def _run_scan_locus(job: ScanJob, pool: ThreadPoolExecutor) -> Result:
    axes = {sw.name: sw for sw in job.sweeps}
    unknown = set(axes) - {"kappa", "gamma_minus"}
    if unknown:
        raise ConfigError(f"scan-locus sweeps kappa and gamma_minus only, not {sorted(unknown)}")
    kap = axes.get("kappa", Sweep("kappa", 0.0, 1.5, 151)).values()
    gam = axes.get("gamma_minus", Sweep("gamma_minus", 0.0, 1.5, 151)).values()
    spec = job.spec_at({})
    scan = scan_locus(
        spec,
        kap,
        gam,
        gamma_plus=float(job.options.get("gamma_plus", 0.0)),
        count_tol=float(job.options.get("count_tol", 1e-2)),
        executor=pool,
    )
    by_corner = {(c.i, c.j): c for c in scan.cells}
    dim = scan.real_parts.shape[2]
    rows = []
    for i, k in enumerate(kap):
        for j, g in enumerate(gam):
            cell = by_corner.get((i, j))
            rows.append(
                [float(k), float(g), int(scan.counts[i, j])]
                + ([cell.ed, cell.dd, cell.kappa, cell.gamma_minus] if cell else [0, 0, "", ""])
                + [float(x) for x in scan.real_parts[i, j]]
            )
    columns = (
        "kappa",
        "gamma_minus",
        "distinct_real",
        "cell_ed",
        "cell_dd",
        "crossing_kappa",
        "crossing_gamma_minus",
        *[f"re_{n}" for n in range(dim)],
    )
    payload = {
        "kappa": kap.tolist(),
        "gamma_minus": gam.tolist(),
        "distinct_real": scan.counts.tolist(),
        "cells": [
            {"i": c.i, "j": c.j, "kappa": c.kappa, "gamma_minus": c.gamma_minus, "ed": c.ed, "dd": c.dd}
            for c in scan.cells
        ],
    }
    return Result(columns, rows, payload)


def _pair_from(opts: Mapping[str, Any]) -> DampedAmplifiedPair:
    raw = opts.get("pair")
    if not isinstance(raw, Mapping):
        raise ConfigError("expected a 'pair' object with gamma, epsilon and kappa")
    try:
        return DampedAmplifiedPair(float(raw["gamma"]), float(raw["epsilon"]), float(raw["kappa"]))
    except KeyError as exc:
        raise ConfigError(f"pair lacks {exc.args[0]}") from exc


def _times_from(opts: Mapping[str, Any], default_stop: float) -> np.ndarray:
    raw = opts.get("times", {})
    if isinstance(raw, list):
        return np.asarray(raw, dtype=float)
    if not isinstance(raw, Mapping):
        raise ConfigError("times must be a list or a {start, stop, steps} object")
    steps = int(raw.get("steps", 51))
    if steps < 2:
        raise ConfigError("times need at least 2 steps")
    return np.linspace(float(raw.get("start", 0.0)), float(raw.get("stop", default_stop)), steps)


def _run_evolve(job: ScanJob, pool: ThreadPoolExecutor) -> Result:
    if job.sweeps:
        raise ConfigError("evolve does not take sweeps")
    pair = _pair_from(job.options)
    raw_alpha = job.options.get("alpha0", [[1.0, 0.0], [0.0, 0.0]])
    try:
        alpha0 = [complex(float(a[0]), float(a[1])) for a in raw_alpha]
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError("alpha0 must list [re, im] per mode") from exc
    times = _times_from(job.options, pair.validity_limit())
    traj = gaussian_evolution(pair, alpha0, times, method=str(job.options.get("method", "closed")))
    rows = [list(r) for r in traj.rows()]
    payload = {name: [r[n] for r in rows] for n, name in enumerate(TRAJECTORY_COLUMNS)}
    return Result(TRAJECTORY_COLUMNS, rows, payload)


def _run_moments(job: ScanJob, pool: ThreadPoolExecutor) -> Result:
    if job.sweeps:
        raise ConfigError("moments does not take sweeps")
    k = int(job.options.get("k", 2))
    opts = _classify_options(job.options)
    table = generate_table(job.spec_at({}), k, rank_tol=opts["rank_tol"], cluster_tol=opts["cluster_tol"])
    data = table.to_dict()
    rows = []
    for row in data["rows"]:
        values = [row[c] for c in table.CSV_COLUMNS]
        values[0] = " ".join(str(x) for x in values[0])
        rows.append(values)
    return Result(table.CSV_COLUMNS, rows, data)


def _check(name: str, value: float, tol: float, ok: bool | None = None) -> list[Any]:
    passed = (value <= tol) if ok is None else ok
    return [name, float(value), float(tol), int(bool(passed))]


def _run_validate(job: ScanJob, pool: ThreadPoolExecutor) -> Result:
    if job.sweeps:
        raise ConfigError("validate does not take sweeps")
    rows: list[list[Any]] = []
    if job.system is not None:
        spec = job.spec_at({})
        dm = build_system(spec)
        m = np.array(dm)
        scale = max(1.0, float(np.linalg.norm(m)))
        values = numeric_eigensystem(m).eigenvalues
        rows.append(_check("trace", abs(values.sum() - np.trace(m)), 1e-10 * scale * m.shape[0]))
        try:
            block = analytic_eigensystem(spec)
            analytic, vectors = lift_full_spectrum(block)
            cost = np.abs(values[:, None] - analytic[None, :])
            r, c = linear_sum_assignment(cost)
            rows.append(_check("analytic-spectrum", cost[r, c].max(), 1e-9 * scale))
            residual = max(
                np.linalg.norm(m @ vectors[:, n] - analytic[n] * vectors[:, n]) / np.linalg.norm(vectors[:, n])
                for n in range(analytic.size)
            )
            rows.append(_check("eigen-residual", residual, 1e-10 * scale))
        except NoClosedFormError:
            log.info("no closed form for %s; analytic checks skipped", spec.signature)
        for name in spec.constraint:
            rows.append(_check(f"constraint:{name}", 0.0, 0.0, satisfies_constraint(spec, name)))
    if "pair" in job.options:
        pair = _pair_from(job.options)
        times = _times_from(job.options, pair.validity_limit())
        diffusion = noise_diffusion((2 * pair.gamma, -2 * pair.gamma))
        worst = 0.0
        for t in times:
            closed = commutator_check(pair, float(t))
            k = commutator_matrix(pair.matrix(), diffusion, float(t))
            worst = max(worst, abs(k[2, 2] - closed.comm22), abs(k[0, 2] - closed.comm12))
        rows.append(_check("commutator-reconstruction", worst, 1e-8))
        reservoir = reservoir_consistency(pair, 0.0)
        rows.append(_check("reservoir-psd", reservoir.min_eigenvalue, 0.0, reservoir.physical))
    if not rows:
        raise ConfigError("validate needs a system description or a pair")
    ok = all(r[3] for r in rows)
    payload = {"checks": [dict(zip(("check", "value", "tolerance", "passed"), r)) for r in rows], "passed": ok}
    for entry in payload["checks"]:
        entry["passed"] = bool(entry["passed"])
    return Result(("check", "value", "tolerance", "passed"), rows, payload, ok)


_RUNNERS: dict[str, Callable[[ScanJob, ThreadPoolExecutor], Result]] = {
    "build": _run_build,
    "spectrum": _run_spectrum,
    "classify": _run_classify,
    "scan-locus": _run_scan_locus,
    "evolve": _run_evolve,
    "moments": _run_moments,
    "validate": _run_validate,
}


# ---------------------------------------------------------------------------
# Output


def _jsonable(x: Any) -> Any:
    if isinstance(x, float):
        return x if math.isfinite(x) else None
    if isinstance(x, (np.floating, np.integer)):
        return _jsonable(x.item())
    if isinstance(x, Mapping):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _cell(x: Any) -> Any:
    if isinstance(x, (np.floating, float)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


def render(result: Result, resolved: Mapping[str, Any], fmt: str) -> str:
    if fmt == "json":
        payload = result.payload if isinstance(result.payload, Mapping) else {"data": result.payload}
        doc = {"config": resolved, **payload}
        return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
    buffer = io.StringIO()
    buffer.write("# config: " + json.dumps(_jsonable(resolved), sort_keys=True, separators=(",", ":")) + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([_cell(x) for x in row])
    return buffer.getvalue()


def run(job: ScanJob, resolved: Mapping[str, Any] | None = None, jobs: int = 1) -> int:
    """Execute ``job``, write its artefact and return the exit status."""
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        result = _RUNNERS[job.command](job, pool)
    text = render(result, resolved if resolved is not None else {"command": job.command}, job.fmt)
    if job.out is None:
        sys.stdout.write(text)
    else:
        try:
            with open(job.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise ConfigError(f"cannot write {job.out}: {exc}") from exc
    return EXIT_OK if result.ok else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# Argument parsing


_FLAG_KEYS = ("cluster_tol", "rank_tol", "delta_min", "delta_max", "delta_steps", "jobs", "format", "out", "k")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eigenpoint",
        description="Spectral degeneracies and Gaussian dynamics of damped/amplified bosonic modes.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", help="output file (default: stdout)")
    parser.add_argument("--format", choices=("csv", "json"))
    parser.add_argument("--jobs", type=int, help="worker threads for grid points")
    parser.add_argument("--cluster-tol", type=float, dest="cluster_tol")
    parser.add_argument("--rank-tol", type=float, dest="rank_tol")
    parser.add_argument("--delta-min", type=float, dest="delta_min")
    parser.add_argument("--delta-max", type=float, dest="delta_max")
    parser.add_argument("--delta-steps", type=int, dest="delta_steps")
    parser.add_argument("--k", type=int, help="moment order for the moments command")
    return parser


def load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def resolve(command: str, config: Mapping[str, Any], flags: Mapping[str, Any]) -> tuple[ScanJob, dict[str, Any], int]:
    """Merge flags over the file config and build the job."""
    merged = dict(config)
    for key in _FLAG_KEYS:
        if flags.get(key) is not None:
            merged[key] = flags[key]
    merged["command"] = command
    fmt = str(merged.get("format", "csv"))
    jobs = int(merged.get("jobs", 1))
    if jobs < 1:
        raise ConfigError("jobs must be at least 1")
    system = merged.get("system")
    if system is not None and not isinstance(system, Mapping):
        raise ConfigError("system must be a JSON object")
    options = {k: v for k, v in merged.items() if k not in ("system", "sweep", "out", "format", "jobs", "command")}
    job = ScanJob(command, system, _parse_sweeps(merged.get("sweep")), options, merged.get("out"), fmt)
    # output location and worker count do not change the content
    resolved = {k: v for k, v in merged.items() if k not in ("out", "jobs")}
    return job, resolved, jobs


def _configure_logging() -> None:
    level = os.environ.get("EIGENPOINT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        job, resolved, jobs = resolve(args.command, config, vars(args))
        return run(job, resolved, jobs)
    except ConfigError as exc:
        print(f"eigenpoint: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IndeterminacyError, QuadratureError) as exc:
        print(f"eigenpoint: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except EigenpointError as exc:
        print(f"eigenpoint: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
