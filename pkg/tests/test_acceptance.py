"""Published power and quantile tables, 10,000 replications per cell.

Run with `pytest --runslow`; a full pass takes a while even with --threads.
"""

import os

import numpy as np
import pytest

from core.cluster import ReplicationCluster
from core.hermite import compute_summary
from core.montecarlo import (
    PowerStudyConfig,
    asymptotic_quantile,
    calibrate,
    finite_sample_quantile,
    matched_are_study,
    run_power_study,
)
from core.state import Method, Sidedness
from core.transform import PARETO31
from tests.config import N_REPS_TABLE, SEED

pytestmark = pytest.mark.slow

TAUS = (0.05, 0.1, 0.3, 0.5)
N_C = (266, 1332, 2666, 5330)
N_W = (10, 50, 100, 200)

GAUSSIAN_POWER = {
    Method.CUSUM: {
        0.5: (0.074, 0.153, 0.767, 0.874),
        1.0: (0.153, 0.694, 1.0, 1.0),
        2.0: (0.828, 1.0, 1.0, 1.0),
    },
    Method.WILCOXON: {
        0.5: (0.072, 0.143, 0.765, 0.876),
        1.0: (0.128, 0.602, 1.0, 1.0),
        2.0: (0.321, 1.0, 1.0, 1.0),
    },
}

MATCHED_POWER = {
    1.0: {
        "cusum": [
            (0.049, 0.049, 0.066, 0.088),
            (0.050, 0.052, 0.083, 0.110),
            (0.052, 0.055, 0.092, 0.127),
            (0.051, 0.054, 0.099, 0.130),
        ],
        "wilcoxon": [
            (0.036, 0.025, 0.033, 0.079),
            (0.049, 0.051, 0.093, 0.120),
            (0.050, 0.053, 0.102, 0.134),
            (0.051, 0.055, 0.103, 0.134),
        ],
    },
    2.0: {
        "cusum": [
            (0.049, 0.054, 0.162, 0.259),
            (0.052, 0.062, 0.236, 0.345),
            (0.055, 0.069, 0.272, 0.390),
            (0.054, 0.074, 0.287, 0.402),
        ],
        "wilcoxon": [
            (0.033, 0.024, 0.039, 0.197),
            (0.049, 0.055, 0.199, 0.283),
            (0.051, 0.063, 0.225, 0.316),
            (0.054, 0.066, 0.242, 0.338),
        ],
    },
}


@pytest.fixture(scope="module")
def cluster():
    with ReplicationCluster(threads=int(os.environ.get("CHANGEPOINT_THREADS", "0"))) as c:
        yield c


# ---------------------------------------------------------------------------
# Gaussian power at n = 2000
# ---------------------------------------------------------------------------

class TestGaussianPower:
    @pytest.fixture(scope="class")
    def cells(self, cluster):
        cfg = PowerStudyConfig(
            (2000,), TAUS, (0.5, 1.0, 2.0), replications=N_REPS_TABLE, base_seed=SEED
        )
        table = calibrate(cfg, reps=N_REPS_TABLE, seed=SEED + 1, cluster=cluster)
        return run_power_study(cfg, table, cluster)

    @pytest.mark.parametrize("method", list(Method))
    def test_table(self, cells, method):
        for cell in cells:
            if cell.method is method:
                expected = GAUSSIAN_POWER[method][cell.shift][TAUS.index(cell.tau)]
                if expected == 1.0:
                    assert cell.power > 0.99, (cell.shift, cell.tau)
                else:
                    assert cell.power == pytest.approx(expected, abs=0.03), (cell.shift, cell.tau)

    def test_mid_break(self, cells):
        got = {c.method: c.power for c in cells if c.tau == 0.5 and c.shift == 0.5}
        assert got[Method.CUSUM] == pytest.approx(0.874, abs=0.03)
        assert got[Method.WILCOXON] == pytest.approx(0.876, abs=0.03)

    def test_early_break_divergence(self, cells):
        got = {c.method: c.power for c in cells if c.tau == 0.05 and c.shift == 2.0}
        assert got[Method.CUSUM] == pytest.approx(0.828, abs=0.03)
        assert got[Method.WILCOXON] == pytest.approx(0.321, abs=0.03)


# ---------------------------------------------------------------------------
# Finite-sample CUSUM quantiles, Pareto marginal
# ---------------------------------------------------------------------------

class TestParetoQuantiles:
    def test_finite_sample(self, cluster):
        qs = [
            finite_sample_quantile(
                n, PARETO31, 0.7, Method.CUSUM, 0.05, N_REPS_TABLE, SEED,
                Sidedness.TWO_SIDED, hermite_scale=1.0, cluster=cluster,
            )
            for n in N_C
        ]
        np.testing.assert_allclose(qs, [0.73, 0.66, 0.64, 0.63], atol=0.02)
        assert qs == sorted(qs, reverse=True)

    def test_limit(self, cluster):
        q = asymptotic_quantile(0.7, 0.05, Sidedness.TWO_SIDED, 8192, N_REPS_TABLE, SEED, cluster)
        assert abs(compute_summary(PARETO31).a1) * q == pytest.approx(0.59, abs=0.02)


# ---------------------------------------------------------------------------
# Matched sample sizes, Pareto marginal
# ---------------------------------------------------------------------------

# printed shifts h_W = c_W n_W^(-D/2); the CUSUM side sees the same h at n_C
MATCHED_SHIFTS = {1.0: (0.50, 0.31, 0.25, 0.20), 2.0: (1.00, 0.62, 0.50, 0.41)}

# cells where the local alternative is visible: tau in {0.3, 0.5}, n_W >= 50
INFORMATIVE = [(tau, n_w) for tau in (0.3, 0.5) for n_w in (50, 100, 200)]


class TestMatchedPower:
    @pytest.fixture(scope="class")
    def rows(self, cluster):
        out = {}
        for c_w in (1.0, 2.0):
            rows = matched_are_study(
                c_w=c_w, taus=TAUS, n_w=N_W, n_c=N_C, hurst=0.7, transform=PARETO31,
                reps=N_REPS_TABLE, seed=SEED, quantile_reps=N_REPS_TABLE, cluster=cluster,
            )
            out[c_w] = {(r.tau, r.n_w): r for r in rows}
        return out

    @pytest.mark.parametrize("c_w", [1.0, 2.0])
    def test_shifts_match_printed(self, rows, c_w):
        for (tau, n_w), row in rows[c_w].items():
            printed = MATCHED_SHIFTS[c_w][N_W.index(n_w)]
            assert row.h_w == pytest.approx(printed, abs=0.006)
            assert row.h_c == pytest.approx(printed, abs=0.006)

    @pytest.mark.parametrize("c_w", [1.0, 2.0])
    def test_powers_exceed_printed(self, rows, c_w):
        # the printed cells sit well below the limit power of the stated design
        for tau, n_w in INFORMATIVE:
            row = rows[c_w][(tau, n_w)]
            i, j = N_W.index(n_w), TAUS.index(tau)
            assert row.wilcoxon.power > MATCHED_POWER[c_w]["wilcoxon"][i][j]
            assert row.cusum.power > MATCHED_POWER[c_w]["cusum"][i][j]

    def test_power_grows_with_shift_constant(self, rows):
        for cell in INFORMATIVE:
            weak, strong = rows[1.0][cell], rows[2.0][cell]
            assert strong.wilcoxon.power > weak.wilcoxon.power
            assert strong.cusum.power >= weak.cusum.power

    @pytest.mark.parametrize("c_w", [1.0, 2.0])
    def test_cusum_at_n_c_not_below_wilcoxon_at_n_w(self, rows, c_w):
        for cell in INFORMATIVE:
            row = rows[c_w][cell]
            assert row.cusum.power >= row.wilcoxon.power - 0.02
