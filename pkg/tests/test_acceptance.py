"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are repeated in the terminal summary under "acceptance criteria".
"""

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from conftest import ladder_specs, matched_gap
from eigenpoint.cli import scan_locus
from eigenpoint.dynamics import (
    DampedAmplifiedPair,
    TimeFunctions,
    commutator_check,
    commutator_matrix,
    gaussian_evolution,
    noise_diffusion,
    reservoir_consistency,
)
from eigenpoint.model import CouplingSite, EntrySite, SystemSpec, apply_constraint, build_reduced, build_system, perturb
from eigenpoint.moments import SpectrumPartition, generate_table, moment_classes, moment_counts
from eigenpoint.singularity import classify, jordan_structure, numeric_eigensystem, perturbation_scan

PROBE_GRID = np.geomspace(1e-10, 1e-4, 25)


class UnattainableCriterion(AssertionError):
    """A stated target that contradicts an identity the rest of the suite verifies."""


@pytest.fixture
def verdict(record_property):
    def emit(number: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        print(line)
        record_property("acceptance", line)
        return ok

    return emit


def chain2_at_zero_beta(gamma_plus, gamma_minus, epsilon=1.0):
    kappa = math.sqrt(epsilon**2 - gamma_minus**2)
    return SystemSpec.chain(epsilon, kappa, [2 * (gamma_plus + gamma_minus), 2 * (gamma_plus - gamma_minus)])


# 1 ---------------------------------------------------------------------------------------


def test_criterion_01_degeneracy_ladder(verdict):
    expected = {"1+1": (2, 2), "1+2": (3, 2), "2+2": (4, 2), "2+3": (5, 2), "3+3": (6, 2)}
    found = {}
    for name, spec in ladder_specs().items():
        r = classify(build_system(spec))
        found[name] = (r.ed_order, r.dd_order)
    ok = found == expected
    verdict(1, ok, ", ".join(f"{n} -> {found[n]}" for n in expected))
    assert ok


# 2 ---------------------------------------------------------------------------------------

LOCI = [
    ("circular4", SystemSpec.circular4(1.0, 0.0, [0.0] * 4), 4.0),
    ("1+2", SystemSpec.uniconcat(1, 2, 1.0, 0.0, [0.0] * 3), 1.0),
    ("3+3", SystemSpec.uniconcat(3, 3, 1.0, 0.0, [0.0] * 6), 2.0),
]


def test_criterion_02_locus_geometry(verdict):
    grid = np.linspace(0.0, 1.2, 200)
    h = grid[1] - grid[0]
    theta = np.linspace(0.0, math.pi / 2, 20001)
    parts = []
    ok = True
    with ThreadPoolExecutor(4) as pool:
        for name, base, c in LOCI:
            scan = scan_locus(base, grid, grid, executor=pool)
            cells = scan.exceptional_cells()
            ek, eg = np.cos(theta), math.sqrt(c) * np.sin(theta)
            inside = (eg <= 1.2) & (ek <= 1.2)
            centres = np.array([[grid[x.i] + h / 2, grid[x.j] + h / 2] for x in cells])
            # every detected cell near the curve
            far = max(float(np.min(np.hypot(ek - x, eg - y))) for x, y in centres) / h
            # guard against a trivially empty detection: most of the curve must be covered;
            # the stretch next to kappa == epsilon thins out because the spectral scale vanishes there
            gaps = np.min(np.hypot(ek[inside, None] - centres[None, :, 0], eg[inside, None] - centres[None, :, 1]), axis=1)
            coverage = float(np.mean(gaps <= h))
            ok &= far <= 1.0 and coverage >= 0.95
            parts.append(f"{name}: {len(cells)} cells, max distance {far:.2f} h, locus coverage {coverage:.1%}")
    verdict(2, ok, "; ".join(parts))
    assert ok


# 3 ---------------------------------------------------------------------------------------


def test_criterion_03_jordan_oracles(verdict):
    gp, gm = 0.2, 0.5
    two_mode = jordan_structure(build_reduced(chain2_at_zero_beta(gp, gm), gm))
    one_way_spec = SystemSpec.uniconcat(1, 1, 1.0, 0.3, [0.6, 0.6])
    one_way = jordan_structure(build_reduced(one_way_spec, math.sqrt(1 - 0.09)))
    full = jordan_structure(build_system(chain2_at_zero_beta(gp, gm)))
    checks = {
        "reduced two-mode": [(c.block_sizes, c.eigenvalue) for c in two_mode.clusters],
        "reduced one-way": [(c.block_sizes, c.eigenvalue) for c in one_way.clusters],
        "full two-mode": [(c.block_sizes, c.eigenvalue) for c in full.clusters],
    }
    ok = (
        len(two_mode.clusters) == 1
        and two_mode.clusters[0].block_sizes == (2,)
        and abs(two_mode.clusters[0].eigenvalue + 1j * gp) < 1e-12
        and len(one_way.clusters) == 1
        and one_way.clusters[0].block_sizes == (2,)
        and abs(one_way.clusters[0].eigenvalue + 0.3j) < 1e-12
        and len(full.clusters) == 1
        and full.clusters[0].block_sizes == (2, 2)
        and abs(full.clusters[0].eigenvalue + 1j * gp) < 1e-9
    )
    verdict(3, ok, "; ".join(f"{k}: blocks {v[0][0]}" for k, v in checks.items()))
    assert ok


# 4 ---------------------------------------------------------------------------------------


def test_criterion_04_perturbation_exponents(verdict):
    gm = 0.5
    sqrt_scan = perturbation_scan(build_reduced(chain2_at_zero_beta(0.0, gm), gm), EntrySite(0, 1), PROBE_GRID, cluster=(0, 1))
    one_way = build_reduced(SystemSpec.uniconcat(1, 1, 1.0, 0.3, [0.0, 0.0]), math.sqrt(1 - 0.09))
    linear_scan = perturbation_scan(one_way, EntrySite(0, 0), PROBE_GRID, cluster=(0, 1))
    ok = (
        abs(sqrt_scan.slope - 0.5) <= 0.05
        and abs(linear_scan.slope - 1.0) <= 0.05
        and sqrt_scan.moving_branches() == 2
        and linear_scan.moving_branches() == 1
    )
    verdict(
        4,
        ok,
        f"square-root probe slope {sqrt_scan.slope:.4f} ({sqrt_scan.moving_branches()} moving branches), "
        f"linear probe slope {linear_scan.slope:.4f} ({linear_scan.moving_branches()} moving)",
    )
    assert ok


# 5 ---------------------------------------------------------------------------------------


def test_criterion_05_dd_removal(verdict):
    gm = math.sqrt(3) / 2  # kappa / epsilon = 1/2 with beta = 0
    m = build_system(chain2_at_zero_beta(0.0, gm))
    multiplicities = {}
    for name, pattern in (("diagonal", ((1.0, 0.0), (0.0, 0.0))), ("row", ((1.0, 1.0), (0.0, 0.0)))):
        p = np.array(perturb(m, CouplingSite(pattern), 1e-3))
        multiplicities[name] = max(c.multiplicity for c in numeric_eigensystem(p).clusters)
    kept = jordan_structure(np.array(perturb(m, EntrySite(0, 0), 1e-3)))
    blocks = sorted(size for c in kept.clusters for size in c.block_sizes)
    ok = max(multiplicities.values()) == 1 and blocks == [1, 1, 2]
    verdict(
        5,
        ok,
        f"coupling-block probes leave largest cluster {multiplicities}; damping-block probe leaves blocks {blocks}",
    )
    assert ok


# 6 ---------------------------------------------------------------------------------------


def test_criterion_06_unidirectional_invariance(verdict):
    rng = np.random.default_rng(6)
    found = []
    for _ in range(20):
        eps = rng.uniform(0.1, 3.0)
        kap = eps * rng.uniform(0.0, 1.0)
        rates = list(rng.uniform(-1.0, 1.0, 2))
        spec = apply_constraint(SystemSpec.uniconcat(1, 1, eps, kap, rates), "equal")
        r = classify(build_system(spec))
        found.append((r.ed_order, r.dd_order))
    ok = set(found) == {(2, 2)}
    verdict(6, ok, f"{found.count((2, 2))}/20 random draws give (2, 2)")
    assert ok


# 7 ---------------------------------------------------------------------------------------


def test_criterion_07_commutator_anomaly(verdict):
    pair = DampedAmplifiedPair(1.0, 0.8, 0.5)
    worst = 0.0
    printed_gap = 0.0
    for gt in (0.01, 0.1, 0.5):
        k = commutator_matrix(pair.matrix(), noise_diffusion((2.0, -2.0)), gt)
        c = commutator_check(pair, gt)
        worst = max(worst, abs(k[2, 2] - c.comm22), abs(k[0, 2] - c.comm12))
        psi = TimeFunctions(pair.gamma, gt).psi
        printed_gap = max(printed_gap, abs(k[0, 2] - (-1j * pair.epsilon * psi / (2 * pair.gamma))))
    control = 0.0
    for rates in ((0.6, 0.4), (2.0, -2.0)):
        m = build_system(SystemSpec.chain(0.7, 0.3, list(rates)))
        for gt in (0.01, 0.1, 0.5, 5.0):
            k = commutator_matrix(m, noise_diffusion(rates), gt / max(abs(r) for r in rates))
            control = max(control, float(np.max(np.abs(k - np.diag([1.0, -1.0, 1.0, -1.0])))))
    ok = worst <= 1e-8 and control <= 1e-9
    verdict(
        7,
        ok,
        f"closed forms vs reconstruction {worst:.1e}; bidirectional control {control:.1e}; "
        f"cross term written as -i eps psi/(2 gamma) would miss by {printed_gap:.1e}",
    )
    assert ok


# 8 ---------------------------------------------------------------------------------------


def test_criterion_08_reservoir(verdict):
    lowest = reservoir_consistency(DampedAmplifiedPair(1.0, 1.0, 0.5), 0.0).min_eigenvalue
    rng = np.random.default_rng(8)
    minima = [
        reservoir_consistency(DampedAmplifiedPair(rng.uniform(0.01, 5), rng.uniform(0.01, 5), rng.uniform(0, 5)), 0.0).min_eigenvalue
        for _ in range(50)
    ]
    ok = abs(lowest - (1 - math.sqrt(5))) <= 1e-12 and max(minima) < 0
    verdict(8, ok, f"lowest eigenvalue {lowest!r} (1 - sqrt 5 = {1 - math.sqrt(5)!r}); largest of 50 random minima {max(minima):.3g}")
    assert ok


# 9 ---------------------------------------------------------------------------------------


def test_criterion_09_entanglement_expansion(verdict):
    pair = DampedAmplifiedPair(1.0, 1.0, 1.0)
    times = np.geomspace(1e-4, 1e-2, 21)
    traj = gaussian_evolution(pair, [0, 0], times)
    ratio = np.abs(traj.EN - traj.EN_short_time) / times**2
    variation = float(np.ptp(ratio) / np.mean(ratio))
    ok = np.all(np.isfinite(ratio)) and variation < 0.2 and np.all(traj.tau[:, 1] == 0)
    verdict(9, ok, f"|dEN|/t^2 in [{ratio.min():.4f}, {ratio.max():.4f}], variation {variation:.2%}; tau2 = 0 throughout")
    assert ok


# 10 --------------------------------------------------------------------------------------


@pytest.mark.xfail(raises=UnattainableCriterion, strict=True, reason="sum of N_b over 8 operators is 36, not 55")
def test_criterion_10_combinatorics(verdict):
    spec = SystemSpec.circular4(1.0, 0.6, [0.0] * 4)
    from eigenpoint.model import rates_from_aggregates

    spec = spec.with_rates(rates_from_aggregates(spec, 0.3, 2 * math.sqrt(1 - 0.36)))
    table = generate_table(spec, 2)
    mixed = table.find((0, 0, 0, 0, 1, 1)).moment
    square = table.find((0, 0, 0, 0, 2, 0))
    n_classes, total, operators = moment_counts(table.partition, 2)
    identities = True
    for sizes_seed in range(40):
        rng = np.random.default_rng(sizes_seed)
        sigma = int(rng.integers(1, 9))
        p = SpectrumPartition.from_sizes(range(sigma), [int(x) for x in rng.integers(1, 4, sigma)])
        for k in range(1, 5):
            classes = moment_classes(p, k)
            identities &= sum(c.d_d for c in classes) == sigma**k
            identities &= sum(c.N_b for c in classes) == math.comb(p.total_dim + k - 1, k)
    attainable = (
        (mixed.d_e, mixed.d_d) == (4, 2)
        and (mixed.genuine_ed, mixed.genuine_dd) == (4, 1)
        and square.combined.startswith("4x4")
        and square.moment.genuine_ed == 3
        and n_classes == 21
        and identities
    )
    ok = attainable and total == 55
    verdict(
        10,
        ok,
        f"<B5B6> partial {mixed.d_d}x{mixed.d_e}, genuine {mixed.genuine_dd}x{mixed.genuine_ed}; "
        f"<B5^2> combined {square.combined}, genuine ED {square.moment.genuine_ed}; N_B = {n_classes}; "
        f"identities {'hold' if identities else 'broken'}; sum N_b = {total} (= C({table.partition.total_dim + 1}, 2)) "
        f"against a stated 55",
    )
    assert attainable
    if total != 55:
        raise UnattainableCriterion(f"sum of N_b is {total} = number of quadratic monomials in 8 operators")


# 11 --------------------------------------------------------------------------------------


def test_criterion_11_power_rule(verdict):
    found = {}
    for n in range(1, 7):
        p = SpectrumPartition.from_sizes([-1j], [n])
        for k in (1, 2, 3):
            found[(n, k)] = max(c.d_e for c in moment_classes(p, k))
    ok = all(v == n**k for (n, k), v in found.items())
    verdict(11, ok, f"max d_e == n^k for n <= 6, k <= 3 ({sum(v == n**k for (n, k), v in found.items())}/18)")
    assert ok
