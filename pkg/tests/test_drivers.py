import numpy as np
import pytest

import levyint as li
from levyint.drivers import reconstruction_residual
from levyint.errors import ConsistencyError, ParameterError


def _se_of_mean(x):
    return np.std(x, ddof=1) / np.sqrt(x.size)


class TestSpecValidation:
    def test_negative_volatility_rejected(self):
        with pytest.raises(ParameterError):
            li.Brownian(volatility=-1.0)

    @pytest.mark.parametrize("rate", [0.0, -2.0])
    def test_nonpositive_intensity_rejected(self, rate):
        with pytest.raises(ParameterError):
            li.CompensatedPoisson(rate=rate)
        with pytest.raises(ParameterError):
            li.CompoundPoisson(rate=rate)

    def test_jump_law_moments(self):
        assert li.TwoPointJumps().second_moment() == 1.0
        assert li.ExponentialJumps(rate=2.0).second_moment() == pytest.approx(0.5)
        assert li.NormalJumps(loc=1.0, scale=2.0).second_moment() == pytest.approx(5.0)

    def test_bad_n_paths(self, grid100):
        with pytest.raises(ParameterError):
            li.simulate_paths(li.Brownian(), grid100, 0, 1)

    def test_negative_seed_rejected(self, grid100):
        with pytest.raises(ParameterError):
            li.simulate_paths(li.Brownian(), grid100, 2, -1)
        with pytest.raises(ParameterError):
            li.child_seed(-1, 0)


class TestBracketRate:
    def test_unit_brownian(self):
        assert li.bracket_rate(li.Brownian(volatility=1.0)) == 1.0

    def test_compensated_poisson(self):
        assert li.bracket_rate(li.CompensatedPoisson(rate=2.0)) == 2.0

    def test_two_point_compound(self):
        spec = li.CompoundPoisson(rate=3.0, jump_law=li.TwoPointJumps())
        assert li.bracket_rate(spec) == 3.0

    def test_exponential_compound(self):
        spec = li.CompoundPoisson(rate=3.0, jump_law=li.ExponentialJumps(rate=1.0))
        assert li.bracket_rate(spec) == pytest.approx(6.0)


class TestSimulation:
    def test_degenerate_brownian_is_zero(self, grid100):
        ens = li.simulate_paths(li.Brownian(volatility=0.0, drift=0.0), grid100, 4, 1)
        assert np.all(ens.values == 0.0)

    def test_compensated_poisson_terminal_moments(self, grid100):
        ens = li.simulate_paths(li.CompensatedPoisson(rate=1.0), grid100, 100_000, 21)
        xt = ens.values[:, -1, 0]
        assert abs(np.mean(xt)) <= 3 * _se_of_mean(xt)
        sq = (xt - xt.mean()) ** 2
        assert abs(np.var(xt, ddof=1) - 1.0) <= 3 * _se_of_mean(sq)

    def test_brownian_drift_mean(self, grid100):
        ens = li.simulate_paths(li.Brownian(volatility=1.0, drift=2.0), grid100, 50_000, 22)
        xt = ens.values[:, -1, 0]
        assert abs(np.mean(xt) - 2.0) <= 3 * _se_of_mean(xt)

    @pytest.mark.parametrize("spec_idx", [0, 1, 2])
    def test_martingale_variance_matches_bracket(self, martingale_specs, grid100, spec_idx):
        spec = martingale_specs[spec_idx]
        ens = li.simulate_paths(spec, grid100, 100_000, 33 + spec_idx)
        m = li.martingale_part(spec, ens)
        c = li.bracket_rate(spec)
        for t_idx in (50, 100):
            mt = m.values[:, t_idx, 0]
            sq = (mt - mt.mean()) ** 2
            expected = c * grid100.points[t_idx]
            assert abs(np.var(mt, ddof=1) - expected) <= 3 * _se_of_mean(sq)

    def test_jump_reconstruction_exact(self, grid100, cadlag_specs):
        for spec in cadlag_specs:
            ens = li.simulate_paths(spec, grid100, 200, 5)
            assert reconstruction_residual(spec, ens) < 1e-12

    def test_increments_uncorrelated_over_disjoint_intervals(self, grid100):
        ens = li.simulate_paths(li.CompensatedPoisson(rate=2.0), grid100, 40_000, 8)
        x = ens.values[:, :, 0]
        a = x[:, 30] - x[:, 0]
        b = x[:, 100] - x[:, 30]
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) < 3 / np.sqrt(a.size)


class TestMartingalePart:
    def test_zero_drift_identity(self, grid100):
        spec = li.Brownian(volatility=1.0)
        ens = li.simulate_paths(spec, grid100, 10, 2)
        m = li.martingale_part(spec, ens)
        assert np.array_equal(m.values, ens.values)

    def test_standard_poisson_decomposition(self, grid100):
        # a path sitting at 3 at time 1 has martingale part 3 - rate*1
        spec = li.standard_poisson(rate=1.0)
        ens = li.simulate_paths(spec, grid100, 2000, 4)
        m = li.martingale_part(spec, ens)
        target = ens.values[:, -1, 0] - 1.0
        assert np.max(np.abs(m.values[:, -1, 0] - target)) < 1e-12
        with_three = ens.values[:, -1, 0] == 3.0
        assert with_three.any()
        assert np.allclose(m.values[with_three, -1, 0], 2.0)

    def test_drifted_brownian_martingale_mean_zero(self, grid100):
        spec = li.Brownian(volatility=1.0, drift=5.0)
        ens = li.simulate_paths(spec, grid100, 100_000, 6)
        m = li.martingale_part(spec, ens)
        mt = m.values[:, -1, 0]
        assert abs(np.mean(mt)) <= 3 * _se_of_mean(mt)

    def test_spec_mismatch_rejected(self, grid100):
        ens = li.simulate_paths(li.Brownian(volatility=1.0), grid100, 5, 1)
        with pytest.raises(ConsistencyError):
            li.martingale_part(li.Brownian(volatility=2.0), ens)

    def test_jump_records_preserved(self, grid100):
        spec = li.CompoundPoisson(rate=2.0, jump_law=li.ExponentialJumps(rate=1.0))
        ens = li.simulate_paths(spec, grid100, 20, 3)
        m = li.martingale_part(spec, ens)
        assert m.jumps is ens.jumps


class TestDeterminism:
    def test_same_seed_bit_identical(self, grid100, martingale_specs):
        for spec in martingale_specs:
            a = li.simulate_paths(spec, grid100, 300, 77)
            b = li.simulate_paths(spec, grid100, 300, 77)
            assert np.array_equal(a.values, b.values)

    def test_different_seeds_differ(self, grid100):
        a = li.simulate_paths(li.Brownian(), grid100, 300, 77)
        b = li.simulate_paths(li.Brownian(), grid100, 300, 78)
        assert not np.array_equal(a.values, b.values)

    def test_threads_do_not_change_output(self, grid100):
        a = li.simulate_paths(li.CompoundPoisson(rate=3.0), grid100, 500, 9, threads=1)
        b = li.simulate_paths(li.CompoundPoisson(rate=3.0), grid100, 500, 9, threads=2)
        assert np.array_equal(a.values, b.values)
        assert all(
            np.array_equal(ra.times, rb.times) for ra, rb in zip(a.jumps, b.jumps)
        )

    def test_path_offset_reproduces_slices(self, grid100):
        full = li.simulate_paths(li.Brownian(), grid100, 50, 13)
        lo = li.simulate_paths(li.Brownian(), grid100, 30, 13, path_offset=0)
        hi = li.simulate_paths(li.Brownian(), grid100, 20, 13, path_offset=30)
        assert np.array_equal(np.vstack([lo.values, hi.values]), full.values)
