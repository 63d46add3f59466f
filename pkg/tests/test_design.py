import numpy as np
import pytest
import scipy.linalg

from hamlearn.dataset import EnsembleSpec
from hamlearn.design import (
    build_candidates,
    fps_select_fluxes,
    greedy_select,
    informativeness_signals,
    load_selection,
    save_selection,
)
from hamlearn.errors import RankDeficiencyError
from hamlearn.physics import ControlFlux, MeasurementPair
from hamlearn.surrogate import init_model


class TestCandidates:
    def test_count_and_content(self):
        pairs = build_candidates()
        assert len(pairs) == 540
        assert MeasurementPair("Z+", "Z+", "ZZ") in pairs
        assert all(p.observable != "II" for p in pairs)

    def test_canonical_order_stable(self):
        assert build_candidates() == build_candidates()
        first = build_candidates()[0]
        assert (first.state_q1, first.state_q2, first.observable) == ("Z+", "Z+", "IX")


class TestSignals:
    def test_constant_model_gives_zero_variance(self):
        model = init_model(0)
        model.weights[6][:] = 0.0
        model.weights[7][:] = 0.0
        sig = informativeness_signals(model, EnsembleSpec(seed=1), n_draws=40, seed=1)
        assert sig.raw_variance.max() < 1e-30  # identical rows up to mean roundoff

    def test_symmetry_zero_column(self):
        # |00>-type states never develop X expectation under the coefficient basis
        model = init_model(5)
        sig = informativeness_signals(model, EnsembleSpec(seed=2), n_draws=60, seed=2)
        j = sig.pairs.index(MeasurementPair("Z+", "Z+", "XI"))
        assert np.abs(sig.values[:, j]).max() < 1e-12
        assert sig.raw_variance[j] < 1e-24

    def test_reproducible_given_seed(self, small_model):
        a = informativeness_signals(small_model, EnsembleSpec(seed=3), n_draws=30, seed=7)
        b = informativeness_signals(small_model, EnsembleSpec(seed=3), n_draws=30, seed=7)
        assert np.array_equal(a.values, b.values)

    def test_entries_bounded(self, small_model):
        sig = informativeness_signals(small_model, EnsembleSpec(seed=3), n_draws=50, seed=0)
        assert np.abs(sig.values).max() <= 1.0 + 1e-10


def brute_force_greedy(values: np.ndarray, k: int) -> list[int]:
    """Reference greedy: exact residual variance by projecting onto the
    orthogonal complement of the selected columns at every step."""
    centered = values - values.mean(axis=0)
    n = values.shape[0]
    chosen: list[int] = []
    for _ in range(k):
        if chosen:
            basis, _ = np.linalg.qr(centered[:, chosen])
            resid = centered - basis @ (basis.T @ centered)
        else:
            resid = centered
        scores = (resid * resid).sum(axis=0) / n
        scores[chosen] = -1.0
        chosen.append(int(np.argmax(scores)))
    return chosen


class TestGreedySelect:
    def test_k1_is_argmax_variance(self):
        rng = np.random.default_rng(0)
        m = rng.normal(size=(200, 30)) * rng.uniform(0.1, 2.0, size=30)
        sel = greedy_select(m, 1)
        assert sel.indices[0] == int(np.argmax(m.var(axis=0)))
        assert sel.marginal[0] == pytest.approx(sel.raw[0])

    def test_duplicate_column_never_repicked(self):
        rng = np.random.default_rng(1)
        m = rng.normal(size=(100, 10))
        m[:, 7] = m[:, 2]  # exact duplicate
        sel = greedy_select(m, 9)
        # one twin's residual is zero once the other is picked, so while any
        # independent column remains the copy is never selected
        assert not {2, 7} <= set(sel.indices)
        assert len(set(sel.indices)) == 9

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(42)
        m = rng.normal(size=(500, 540))
        sel = greedy_select(m, 5)
        assert sel.indices == brute_force_greedy(m, 5)

    def test_matches_pivoted_qr(self):
        rng = np.random.default_rng(7)
        m = rng.normal(size=(120, 40))
        centered = m - m.mean(axis=0)
        _, _, piv = scipy.linalg.qr(centered, pivoting=True, mode="economic")
        sel = greedy_select(m, 6)
        assert sel.indices == list(piv[:6])

    def test_marginal_non_increasing_and_below_raw(self, small_model):
        sig = informativeness_signals(small_model, EnsembleSpec(seed=3), n_draws=80, seed=1)
        sel = greedy_select(sig, 10)
        assert np.all(np.diff(sel.marginal) <= 1e-15)
        assert sel.marginal[0] == pytest.approx(sel.raw[0])
        assert np.all(sel.marginal[1:] <= sel.raw[1:] + 1e-15)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(9)
        m = rng.normal(size=(80, 25))
        perm = rng.permutation(25)
        sel_a = greedy_select(m, 6)
        sel_b = greedy_select(m[:, perm], 6)
        assert [perm[j] for j in sel_b.indices] == sel_a.indices

    def test_rank_deficiency_error(self):
        rng = np.random.default_rng(2)
        basis = rng.normal(size=(60, 3))
        coeffs = rng.normal(size=(3, 12))
        m = basis @ coeffs
        with pytest.raises(RankDeficiencyError):
            greedy_select(m, 4)
        assert len(greedy_select(m, 3).indices) == 3


class TestFps:
    def test_pool_of_two(self):
        pool = [ControlFlux(0.1, 0.1, 0.2), ControlFlux(0.4, 0.3, 1.1)]
        assert set(fps_select_fluxes(pool, 2)) == set(pool)

    def test_grid_second_pick_is_farthest_corner(self):
        axes_q = np.linspace(0.0, 0.5, 5)
        axes_c = np.linspace(0.1, 1.35, 5)
        pool = [
            ControlFlux(a, b, c) for a in axes_q for b in axes_q for c in axes_c
        ]
        pts = np.stack([p.as_array() for p in pool])
        std = pts.std(axis=0)
        scaled = pts / std
        sel = fps_select_fluxes(pool, 2)
        start = pool.index(sel[0])
        d2 = ((scaled - scaled[start]) ** 2).sum(axis=1)
        assert pool.index(sel[1]) == int(np.argmax(d2))
        corner = sel[1].as_array()
        assert all(
            v in (axis[0], axis[-1])
            for v, axis in zip(corner, [axes_q, axes_q, axes_c])
        )

    def test_spread_beats_random_subsets(self):
        rng = np.random.default_rng(12)
        spec = EnsembleSpec(seed=12)
        from hamlearn.dataset import sample_pulses

        pool = sample_pulses(spec, 300)
        pts = np.stack([p.as_array() for p in pool])
        scaled = pts / pts.std(axis=0)

        def min_pairwise(idx):
            sub = scaled[idx]
            d = np.sqrt(((sub[:, None] - sub[None]) ** 2).sum(-1))
            return (d + np.eye(len(idx)) * 1e9).min()

        fps_idx = [pool.index(p) for p in fps_select_fluxes(pool, 20)]
        best_random = max(
            min_pairwise(rng.choice(300, size=20, replace=False)) for _ in range(100)
        )
        assert min_pairwise(fps_idx) >= best_random

    def test_deterministic_and_in_pool(self):
        spec = EnsembleSpec(seed=13)
        from hamlearn.dataset import sample_pulses

        pool = sample_pulses(spec, 50)
        a = fps_select_fluxes(pool, 10)
        b = fps_select_fluxes(pool, 10)
        assert a == b
        assert all(p in pool for p in a)

    def test_empty_pool_and_bad_counts(self):
        with pytest.raises(ValueError):
            fps_select_fluxes([], 1)
        with pytest.raises(ValueError):
            fps_select_fluxes([ControlFlux(0.1, 0.1, 0.2)], 2)


class TestSelectionPersistence:
    def test_round_trip(self, small_model, tmp_path):
        sig = informativeness_signals(small_model, EnsembleSpec(seed=3), n_draws=60, seed=0)
        sel = greedy_select(sig, 4)
        fluxes = [ControlFlux(0.1, 0.2, 0.5), ControlFlux(0.3, 0.0, 1.2)]
        path = tmp_path / "sel.json"
        save_selection(sel, fluxes, path)
        pairs, fluxes_back, payload = load_selection(path)
        assert pairs == sel.pairs
        assert fluxes_back == fluxes
        assert [p["marginal"] for p in payload["pairs"]] == list(map(float, sel.marginal))
