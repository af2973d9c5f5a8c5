import numpy as np
import pytest

from sepsim import (
    ModelParams,
    SimConfig,
    SimStats,
    arrival_rate_boundary_form,
    arrival_rate_closed_form,
    estimate_from_stats,
    merge_replicas,
    run_replica,
    sojourn_closed_form,
    sojourn_littles_law,
)


def params(n=2, k=1, alpha=None, beta=None, delta=None, boundary_hops=True):
    return ModelParams(
        n_sites=n,
        n_types=k,
        alpha=alpha or (1.0,) * k,
        beta=beta or (1.0,) * k,
        delta=delta if delta is not None else (1.0,) * k,
        boundary_hops=boundary_hops,
    )


def random_models(seed=77, count=20):
    rng = np.random.default_rng(seed)
    models = []
    for _ in range(count):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, 4))
        models.append(
            ModelParams(
                n_sites=n,
                n_types=k,
                alpha=tuple(rng.uniform(0.3, 3.0, k)),
                beta=tuple(rng.uniform(0.3, 3.0, k)),
                delta=tuple(rng.uniform(0.0, 3.0, k)),
            )
        )
    return models


def synthetic_stats(n=3, k=2, total_time=500.0, arrivals=(1000, 400), sojourns=None):
    marginal_time = np.full((n, k + 1), total_time / (k + 1))
    arrivals = np.asarray(arrivals, dtype=np.int64)
    return SimStats(
        n_sites=n,
        n_types=k,
        total_time=total_time,
        site_occupancy_time=marginal_time,
        arrivals_by_type=arrivals,
        departures_by_type=arrivals.copy(),
        start_counts_by_type=np.zeros(k, dtype=np.int64),
        end_counts_by_type=np.zeros(k, dtype=np.int64),
        completed_sojourns=sojourns if sojourns is not None else [[1.0, 2.0, 3.0], [0.5]],
        event_count=int(arrivals.sum() * 2),
    )


class TestClosedForms:
    def test_arrival_rate_examples(self):
        assert arrival_rate_closed_form(params(5, 1), 1) == pytest.approx(1.0, abs=1e-15)
        p = params(4, 2, alpha=(1.0, 2.0), beta=(1.0, 1.0))
        assert arrival_rate_closed_form(p, 1) == pytest.approx(0.5, abs=1e-15)
        assert arrival_rate_closed_form(p, 2) == pytest.approx(1.0, abs=1e-15)

    def test_arrival_rate_vanishes_with_vanishing_alpha(self):
        rates = [
            arrival_rate_closed_form(params(3, 1, alpha=(a,), beta=(1.0,)), 1)
            for a in (1e-3, 1e-6, 1e-9)
        ]
        assert rates[0] > rates[1] > rates[2]
        assert rates[2] == pytest.approx(0.0, abs=1e-8)

    def test_boundary_form_example(self):
        p = params(4, 1, alpha=(1.0,), beta=(2.0,))
        assert arrival_rate_boundary_form(p, 1) == pytest.approx(4.0 / 3.0, abs=1e-15)
        assert arrival_rate_closed_form(p, 1) == pytest.approx(4.0 / 3.0, abs=1e-15)

    def test_balanced_rates_give_two_over_k_plus_one(self):
        for k in (1, 2, 3):
            p = params(3, k)
            for ptype in range(1, k + 1):
                assert arrival_rate_closed_form(p, ptype) == pytest.approx(2.0 / (k + 1), abs=1e-15)

    def test_flux_identity_on_random_models(self):
        for p in random_models():
            for k in range(1, p.n_types + 1):
                diff = abs(arrival_rate_closed_form(p, k) - arrival_rate_boundary_form(p, k))
                assert diff <= 1e-12

    def test_sojourn_examples(self):
        assert sojourn_closed_form(params(4, 1, beta=(2.0,)), 1) == pytest.approx(1.0, abs=0.0)
        assert sojourn_closed_form(params(2, 1, beta=(2.0,)), 1) == pytest.approx(0.5, abs=0.0)
        p = params(3, 2, alpha=(1.0, 2.0), beta=(1.0, 1.0))
        assert sojourn_closed_form(p, 1) == pytest.approx(1.5, abs=0.0)
        assert sojourn_closed_form(p, 2) == pytest.approx(1.5, abs=0.0)

    def test_littles_law_examples(self):
        p = params(2, 1, alpha=(1.0,), beta=(2.0,))
        assert sojourn_littles_law(p, 1) == pytest.approx(0.5, abs=1e-15)
        balanced = params(6, 3)
        assert sojourn_littles_law(balanced, 2) == pytest.approx(3.0, abs=1e-13)

    def test_littles_law_identity_on_random_models(self):
        for p in random_models():
            for k in range(1, p.n_types + 1):
                diff = abs(sojourn_littles_law(p, k) - sojourn_closed_form(p, k))
                assert diff <= 1e-12

    def test_flux_monotone_in_alpha(self):
        values = [
            arrival_rate_closed_form(params(3, 2, alpha=(a, 1.0), beta=(1.5, 0.5)), 1)
            for a in (0.5, 1.0, 2.0, 4.0)
        ]
        assert all(lo < hi for lo, hi in zip(values, values[1:]))

    def test_sojourn_monotone_in_beta(self):
        values = [
            sojourn_closed_form(params(3, 1, beta=(b,)), 1) for b in (0.5, 1.0, 2.0, 4.0)
        ]
        assert all(lo > hi for lo, hi in zip(values, values[1:]))

    def test_sojourn_invariant_under_alpha_and_delta(self):
        reference = sojourn_closed_form(params(4, 2, alpha=(1.0, 2.0), beta=(0.7, 1.3)), 1)
        for alpha in ((0.1, 5.0), (9.0, 0.2)):
            for delta in ((0.0, 0.0), (4.0, 0.5)):
                p = params(4, 2, alpha=alpha, beta=(0.7, 1.3), delta=delta)
                assert sojourn_closed_form(p, 1) == reference

    @pytest.mark.parametrize("func", [
        arrival_rate_closed_form,
        arrival_rate_boundary_form,
        sojourn_closed_form,
        sojourn_littles_law,
    ])
    def test_type_out_of_range(self, func):
        with pytest.raises(ValueError):
            func(params(3, 2), 0)
        with pytest.raises(ValueError):
            func(params(3, 2), 3)


class TestEstimateFromStats:
    def test_flux_ratio_definition(self):
        stats = synthetic_stats()
        flux, _, _ = estimate_from_stats(stats, params(3, 2))
        assert flux.empirical[0] == pytest.approx(2.0, abs=0.0)  # 1000 arrivals / 500 time
        assert flux.stderr[0] == pytest.approx(np.sqrt(1000) / 500, abs=0.0)
        assert np.isfinite(flux.zscore).all()

    def test_marginals_are_normalized_occupancy(self):
        stats = synthetic_stats()
        _, _, marginals = estimate_from_stats(stats, params(3, 2))
        assert marginals.shape == (3, 3)
        assert np.allclose(marginals.sum(axis=1), 1.0)

    def test_no_completed_sojourns_marked_insufficient(self):
        stats = synthetic_stats(sojourns=[[1.0, 1.5], []])
        _, sojourn, _ = estimate_from_stats(stats, params(3, 2))
        assert sojourn.sample_count.tolist() == [2, 0]
        assert sojourn.insufficient_data.tolist() == [False, True]
        assert np.isnan(sojourn.empirical_mean[1])
        assert np.isnan(sojourn.stderr[1])

    def test_single_sample_has_no_stderr(self):
        stats = synthetic_stats(sojourns=[[1.0], [0.5, 0.7]])
        _, sojourn, _ = estimate_from_stats(stats, params(3, 2))
        assert sojourn.empirical_mean[0] == pytest.approx(1.0)
        assert np.isnan(sojourn.stderr[0])

    def test_empty_measurement_window_rejected(self):
        stats = synthetic_stats(total_time=0.0)
        with pytest.raises(ValueError):
            estimate_from_stats(stats, params(3, 2))

    def test_model_mismatch_rejected(self):
        with pytest.raises(ValueError):
            estimate_from_stats(synthetic_stats(), params(4, 2))

    def test_reports_close_to_theory_on_a_real_run(self):
        p = params(3, 2, alpha=(1.0, 2.0), beta=(2.0, 1.0))
        cfg = SimConfig(seed=53, max_events=120_000, warmup_fraction=0.2)
        merged = merge_replicas([run_replica(p, cfg, i) for i in range(3)])
        flux, sojourn, marginals = estimate_from_stats(merged, p)
        assert np.abs(flux.closed_form - flux.boundary_form).max() <= 1e-12
        assert np.abs(sojourn.closed_form - sojourn.littles_law).max() <= 1e-12
        assert np.abs(flux.zscore).max() <= 3.0
        assert np.abs(sojourn.zscore).max() <= 3.0
