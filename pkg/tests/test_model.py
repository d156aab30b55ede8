import json

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy.physics.quantum import Dagger
from sympy.physics.quantum.boson import BosonOp
from sympy.physics.quantum.operatorordering import normal_ordered_form

from eigenpoint.errors import ConfigError, ConstraintError
from eigenpoint.model import (
    CouplingKind,
    CouplingParams,
    CouplingSite,
    EntrySite,
    RateSite,
    SystemSpec,
    apply_constraint,
    build_reduced,
    build_system,
    constraint_names,
    coupling_block,
    parse_site,
    perturb,
    rate_aggregates,
    rates_from_aggregates,
    satisfies_constraint,
)

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
positive = st.floats(0.05, 3, allow_nan=False, allow_infinity=False)
strength = st.floats(0, 3, allow_nan=False, allow_infinity=False)


def bidirectional_specs():
    return st.one_of(
        st.builds(lambda e, k, g: SystemSpec.circular4(e, k, g), positive, strength, st.lists(finite, min_size=4, max_size=4)),
        st.builds(lambda e, k, g: SystemSpec.tetrahedral4(e, k, g), positive, strength, st.lists(finite, min_size=4, max_size=4)),
        st.integers(1, 6).flatmap(
            lambda n: st.builds(lambda e, k, g: SystemSpec.chain(e, k, g), positive, strength, st.lists(finite, min_size=n, max_size=n))
        ),
    )


def concat_specs():
    shapes = st.sampled_from([(1, 1), (1, 2), (2, 2), (2, 3), (3, 3), (2, 1)])
    return shapes.flatmap(
        lambda lr: st.builds(
            lambda e, k, g, kind: SystemSpec.uniconcat(lr[0], lr[1], e, k, g, kind=kind),
            positive,
            strength,
            st.lists(finite, min_size=sum(lr), max_size=sum(lr)),
            st.sampled_from(list(CouplingKind)),
        )
    )


# -- assembly examples -------------------------------------------------------


def test_circular4_without_damping_has_diagonal_couplings():
    m = build_system(SystemSpec.circular4(1.0, 0.0, [0, 0, 0, 0]))
    for j in range(4):
        assert np.all(m.block(j, j) == 0)
    for i, j in [(0, 1), (1, 2), (2, 3), (3, 0)]:
        np.testing.assert_array_equal(m.block(i, j), np.diag([1.0, -1.0]))
        np.testing.assert_array_equal(m.block(j, i), np.diag([1.0, -1.0]))
    np.testing.assert_array_equal(m.block(0, 2), np.zeros((2, 2)))


@pytest.mark.parametrize("eps,kap", [(1.0, 0.3), (2.5, 1.7), (0.4, 0.0)])
def test_one_plus_one_is_lower_block_triangular(eps, kap):
    m = build_system(SystemSpec.uniconcat(1, 1, eps, kap, [0.3, 0.7]))
    np.testing.assert_array_equal(m.block(1, 0), np.array([[eps, kap], [-kap, -eps]]))
    np.testing.assert_array_equal(m.block(0, 1), np.zeros((2, 2)))


def test_circular4_entries():
    m = np.array(build_system(SystemSpec.circular4(1.0, 0.5, [0.4, 0.2, 0.4, 0.2])))
    assert m[0, 0] == -0.2j
    assert m[0, 2] == 1.0
    assert m[0, 3] == 0.5
    assert m[1, 3] == -1.0


def independent_assembly(spec: SystemSpec) -> np.ndarray:
    """Mode-by-mode assembly from an explicit adjacency list."""
    eps, kap = spec.couplings.epsilon, spec.couplings.kappa
    xi = np.array([[eps, kap], [-kap, -eps]], dtype=complex)
    n = spec.n
    adjacency = {
        "circular4": {(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2), (3, 0), (0, 3)},
        "tetrahedral4": {(i, j) for i in range(4) for j in range(4) if i != j},
    }.get(spec.signature, {(j, j + 1) for j in range(n - 1)} | {(j + 1, j) for j in range(n - 1)})
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    for r in range(2 * n):
        for c in range(2 * n):
            i, a = divmod(r, 2)
            j, b = divmod(c, 2)
            if i == j:
                out[r, c] = -0.5j * spec.rates.gamma[i] if a == b else 0.0
            elif (i, j) in adjacency:
                out[r, c] = xi[a, b]
    return out


@settings(max_examples=60, deadline=None)
@given(bidirectional_specs())
def test_assembly_matches_entrywise_construction(spec):
    np.testing.assert_array_equal(np.array(build_system(spec)), independent_assembly(spec))


# -- Hamiltonian-variant links ---------------------------------------------


def heisenberg_block(hamiltonian_terms) -> np.ndarray:
    """Rows of ``i d/dt (a_t, a_t^+) = [., H]`` in the source basis ``(a_s, a_s^+)``."""
    eps, kap = sp.symbols("epsilon kappa")
    s, t = BosonOp("s"), BosonOp("t")
    h = hamiltonian_terms(eps, kap, s, t)
    rows = []
    for op in (t, Dagger(t)):
        rhs = normal_ordered_form((op * h - h * op).expand(), independent=True).expand()
        rows.append([rhs.coeff(s), rhs.coeff(Dagger(s))])
    return sp.Matrix(rows), eps, kap


@pytest.mark.parametrize(
    "kind,terms",
    [
        (CouplingKind.HAMILTONIAN_1, lambda e, k, s, t: e * s * Dagger(t) + k * s * t),
        (CouplingKind.HAMILTONIAN_2, lambda e, k, s, t: e * s * Dagger(t) + k * Dagger(s) * Dagger(t)),
    ],
)
def test_hamiltonian_blocks_follow_heisenberg_equations(kind, terms):
    block, eps_sym, kap_sym = heisenberg_block(terms)
    for eps, kap in [(1.0, 0.3), (0.7, 1.9), (2.0, 0.0)]:
        expected = np.array(block.subs({eps_sym: eps, kap_sym: kap}), dtype=complex)
        np.testing.assert_array_equal(coupling_block(kind, CouplingParams(eps, kap)), expected)


def test_hamiltonian_link_sits_in_target_rows():
    spec = SystemSpec.uniconcat(1, 1, 1.0, 0.5, [0.2, 0.2], kind="hamiltonian-2")
    m = build_system(spec)
    np.testing.assert_array_equal(m.block(1, 0), np.array([[1.0, 0.5], [0.0, 0.0]]))
    np.testing.assert_array_equal(m.block(0, 1), np.zeros((2, 2)))
    with pytest.raises(ConfigError):
        build_reduced(spec, 1.0)


# -- invariants ---------------------------------------------------------------


@settings(max_examples=80, deadline=None)
@given(bidirectional_specs())
def test_block_transpose_symmetry(spec):
    m = build_system(spec)
    for i in range(spec.n):
        for j in range(spec.n):
            np.testing.assert_array_equal(m.block(i, j), m.block(j, i))


@settings(max_examples=80, deadline=None)
@given(concat_specs())
def test_concat_upper_right_region_is_zero(spec):
    m = np.array(build_system(spec))
    left = spec.concat.left
    assert np.all(m[: 2 * left, 2 * left :] == 0)


@settings(max_examples=80, deadline=None)
@given(st.one_of(bidirectional_specs(), concat_specs()))
def test_trace_is_minus_i_sum_of_rates(spec):
    m = np.array(build_system(spec))
    assert np.trace(m) == pytest.approx(-1j * sum(spec.rates.gamma), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.one_of(bidirectional_specs(), concat_specs()), st.floats(-2, 2))
def test_reduced_matrix_replaces_every_coupling_block(spec, x):
    if spec.concat is not None and spec.concat.kind is not CouplingKind.MATRIX:
        return
    full = build_system(spec)
    red = build_reduced(spec, x)
    for i in range(spec.n):
        for j in range(spec.n):
            if i == j:
                expected = -0.5j * spec.rates.gamma[i]
            else:
                expected = x if (i, j) in full.coupling_blocks else 0.0
            assert red[i, j] == expected


# -- constraints ----------------------------------------------------------------


def test_alternating_constraint():
    spec = apply_constraint(SystemSpec.circular4(1.0, 0.2, [0.1, 0.2, 0.3, 0.4]), "alternating")
    assert spec.rates.gamma == (0.1, 0.2, 0.1, 0.2)


def test_mean_feed_constraint():
    spec = apply_constraint(SystemSpec.uniconcat(1, 2, 1.0, 0.2, [9.0, 0.6, 0.2]), "mean-feed")
    assert spec.rates.gamma[0] == pytest.approx(0.4)


def test_gain_loss_constraint():
    spec = apply_constraint(SystemSpec.uniconcat(1, 1, 1.0, 0.2, [1.0, 0.3]), "gain-loss")
    assert spec.rates.gamma == (1.0, -1.0)


def test_constraint_topology_mismatch():
    with pytest.raises(ConstraintError):
        apply_constraint(SystemSpec.chain(1.0, 0.0, [0, 0, 0]), "alternating")
    with pytest.raises(ConstraintError):
        apply_constraint(SystemSpec.circular4(1.0, 0.0, [0] * 4), "no-such-rule")


CONSTRAINT_HOSTS = {
    "alternating": SystemSpec.circular4(1.0, 0.2, [0.0] * 4),
    "pairwise": SystemSpec.tetrahedral4(1.0, 0.2, [0.0] * 4),
    "equal": SystemSpec.uniconcat(1, 1, 1.0, 0.2, [0.0] * 2),
    "gain-loss": SystemSpec.chain(1.0, 0.2, [0.0] * 2),
    "mean-feed": SystemSpec.uniconcat(1, 2, 1.0, 0.2, [0.0] * 3),
    "centered": SystemSpec.chain(1.0, 0.2, [0.0] * 3),
    "balanced": SystemSpec.uniconcat(2, 3, 1.0, 0.2, [0.0] * 5),
    "split-match": SystemSpec.uniconcat(2, 3, 1.0, 0.2, [0.0] * 5),
    "mirrored": SystemSpec.uniconcat(3, 3, 1.0, 0.2, [0.0] * 6),
}


def test_every_constraint_has_a_host():
    assert sorted(CONSTRAINT_HOSTS) == constraint_names()


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(sorted(CONSTRAINT_HOSTS)), st.lists(finite, min_size=6, max_size=6))
def test_constraints_are_idempotent_and_satisfied(name, rates):
    host = CONSTRAINT_HOSTS[name]
    spec = host.with_rates(rates[: host.n])
    once = apply_constraint(spec, name)
    twice = apply_constraint(once, name)
    assert satisfies_constraint(once, name)
    np.testing.assert_allclose(once.rates.gamma, twice.rates.gamma, rtol=0, atol=1e-14)


@pytest.mark.parametrize(
    "spec,names",
    [
        (SystemSpec.circular4(1.0, 0.0, [0] * 4), ["alternating"]),
        (SystemSpec.uniconcat(1, 2, 1.0, 0.0, [0] * 3), ["mean-feed"]),
        (SystemSpec.uniconcat(2, 2, 1.0, 0.0, [0] * 4), ["alternating"]),
        (SystemSpec.uniconcat(2, 3, 1.0, 0.0, [0] * 5), ["balanced", "split-match"]),
        (SystemSpec.uniconcat(3, 3, 1.0, 0.0, [0] * 6), ["mirrored"]),
        (SystemSpec.chain(1.0, 0.0, [0] * 3), ["centered"]),
    ],
)
@pytest.mark.parametrize("gp,gm", [(0.3, 0.8), (-0.2, 0.1), (0.0, 1.4)])
def test_aggregate_parametrisation_round_trips(spec, names, gp, gm):
    spec = spec.with_rates(rates_from_aggregates(spec, gp, gm))
    agg = rate_aggregates(spec)
    assert agg["gamma_plus"] == pytest.approx(gp)
    assert agg["gamma_minus"] == pytest.approx(gm)
    for name in names:
        assert satisfies_constraint(spec, name)


# -- JSON -------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(st.one_of(bidirectional_specs(), concat_specs()))
def test_json_round_trip(spec):
    again = SystemSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert again == spec


def test_from_dict_applies_listed_constraints():
    spec = SystemSpec.from_dict(
        {"topology": "uniconcat", "epsilon": 1, "kappa": 0.1, "gamma": [0, 0.6, 0.2], "constraint": "mean-feed",
         "concat": {"left": 1, "right": 2}}
    )
    assert spec.rates.gamma[0] == pytest.approx(0.4)
    assert spec.constraint == ("mean-feed",)


@pytest.mark.parametrize(
    "data",
    [
        {"topology": "hexagonal", "epsilon": 1, "kappa": 0, "gamma": [0]},
        {"topology": "circular4", "epsilon": 1, "kappa": 0, "gamma": [0, 0, 0]},
        {"topology": "chain", "epsilon": 1, "gamma": [0, 0]},
        {"topology": "uniconcat", "epsilon": 1, "kappa": 0, "gamma": [0, 0],
         "concat": {"left": 1, "right": 1, "edges": [[2, 1]]}},
        {"topology": "uniconcat", "epsilon": 1, "kappa": 0, "gamma": [0, 0],
         "concat": {"left": 1, "right": 1, "edges": [[1, 3]]}},
        [1, 2, 3],
    ],
)
def test_malformed_specs_are_config_errors(data):
    with pytest.raises(ConfigError):
        SystemSpec.from_dict(data)


# -- perturbation -----------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.one_of(bidirectional_specs(), concat_specs()), st.data())
def test_zero_perturbation_is_bitwise_identity(spec, data):
    m = build_system(spec)
    site = data.draw(
        st.one_of(
            st.builds(EntrySite, st.integers(0, m.dim - 1), st.integers(0, m.dim - 1)),
            st.builds(RateSite, st.integers(0, spec.n - 1), st.integers(0, 1), st.integers(0, 1)),
            st.just(CouplingSite(((1.0, 1.0), (0.0, 0.0)))),
        )
    )
    before = np.array(m).copy()
    out = perturb(m, site, 0.0)
    assert np.array(out).tobytes() == before.tobytes()
    assert np.array(m).tobytes() == before.tobytes()


def test_coupling_site_touches_every_coupling_block():
    m = build_system(SystemSpec.chain(1.0, 0.5, [0.2, 0.3]))
    out = np.array(perturb(m, CouplingSite(((1.0, 0.0), (0.0, 0.0))), 0.1)) - np.array(m)
    expected = np.zeros((4, 4))
    expected[0, 2] = expected[2, 0] = 0.1
    np.testing.assert_allclose(out, expected, atol=0)


def test_rate_site_enters_times_minus_i():
    m = build_system(SystemSpec.chain(1.0, 0.5, [0.2, 0.3]))
    out = np.array(perturb(m, RateSite(0), 0.1)) - np.array(m)
    assert out[0, 0] == pytest.approx(-0.1j)
    assert np.count_nonzero(out) == 1


def test_out_of_range_sites():
    m = build_system(SystemSpec.chain(1.0, 0.5, [0.2, 0.3]))
    for site in (EntrySite(4, 0), RateSite(2), CouplingSite(((1.0, 0.0), (0.0, 0.0)), ((0, 5),))):
        with pytest.raises(ConfigError):
            perturb(m, site, 0.1)


def test_parse_site():
    assert parse_site("entry:0,1") == EntrySite(0, 1)
    assert parse_site("rate:1") == RateSite(1, 0, 0)
    assert parse_site("xi:1,1,0,0") == CouplingSite(((1.0, 1.0), (0.0, 0.0)))
    with pytest.raises(ConfigError):
        parse_site("entry:1")
