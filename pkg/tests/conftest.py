import math

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from eigenpoint.model import SystemSpec, apply_constraint, rates_from_aggregates


def matched_gap(a, b) -> float:
    """Largest distance between two spectra after optimal one-to-one matching."""
    cost = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def on_locus(base: SystemSpec, kappa: float, gamma_plus: float, c: float, epsilon: float = 1.0) -> SystemSpec:
    """``base`` moved onto the ellipse ``k^2 + g^2 / c = 1`` at the given kappa."""
    spec = base.with_couplings(epsilon, kappa * epsilon)
    gm = epsilon * math.sqrt(c * (1.0 - kappa**2))
    return spec.with_rates(rates_from_aggregates(spec, gamma_plus * epsilon, gm))


def ladder_specs(kappa: float = 0.6, gamma_plus: float = 0.3) -> dict[str, SystemSpec]:
    """The five concatenations at their highest-order degeneracy."""
    one_one = apply_constraint(SystemSpec.uniconcat(1, 1, 1.0, kappa, [0.4, 0.9]), "equal")
    return {
        "1+1": one_one,
        "1+2": on_locus(SystemSpec.uniconcat(1, 2, 1.0, 0.0, [0.0] * 3), kappa, gamma_plus, 1.0),
        "2+2": on_locus(SystemSpec.uniconcat(2, 2, 1.0, 0.0, [0.0] * 4), kappa, gamma_plus, 1.0),
        "2+3": on_locus(SystemSpec.uniconcat(2, 3, 1.0, 0.0, [0.0] * 5), kappa, gamma_plus, 1.0),
        "3+3": on_locus(SystemSpec.uniconcat(3, 3, 1.0, 0.0, [0.0] * 6), kappa, gamma_plus, 2.0),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdicts, one line per criterion, at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "xfailed", "xpassed"):
        for report in terminalreporter.stats.get(outcome, []):
            for key, value in getattr(report, "user_properties", []):
                if key == "acceptance":
                    lines.append(value)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
