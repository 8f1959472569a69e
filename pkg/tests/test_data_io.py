from __future__ import annotations

import io

import numpy as np
import pytest

from ransom.core import ConfigError, root_rng
from ransom.data_io import (
    DataFormatError,
    DesignMatrix,
    parse_libsvm,
    parse_movielens,
    serialize_libsvm,
    synth_classification,
    synth_lowrank,
    train_test_split,
)

CANONICAL = "+1 1:0.5 3:-2\n-1 2:1.25\n+1\n"


class TestParseLibsvm:
    def test_basic_line(self) -> None:
        data = parse_libsvm("+1 1:0.5 3:-2", n_features=3)
        np.testing.assert_array_equal(data.features, [[0.5, 0.0, -2.0]])
        np.testing.assert_array_equal(data.labels, [1.0])

    def test_width_inferred_from_largest_index(self) -> None:
        data = parse_libsvm("+1 1:0.5 3:-2")
        assert data.n_features == 3

    def test_empty_file_gives_zero_rows(self) -> None:
        data = parse_libsvm("")
        assert data.n_samples == 0

    def test_zero_label_maps_to_minus_one(self) -> None:
        data = parse_libsvm("0 1:1\n1 1:2\n")
        np.testing.assert_array_equal(data.labels, [-1.0, 1.0])

    def test_reads_file_like_sources(self) -> None:
        data = parse_libsvm(io.StringIO(CANONICAL))
        assert data.n_samples == 3

    def test_malformed_feature_reports_line_number(self) -> None:
        with pytest.raises(DataFormatError, match="line 2"):
            parse_libsvm("+1 1:1\n+1 1:abc\n")

    def test_bad_label_reports_line_number(self) -> None:
        with pytest.raises(DataFormatError, match="line 1"):
            parse_libsvm("2 1:1\n")

    def test_zero_based_index_rejected(self) -> None:
        with pytest.raises(DataFormatError, match="1-based"):
            parse_libsvm("+1 0:1\n")

    def test_index_beyond_declared_width_rejected(self) -> None:
        with pytest.raises(DataFormatError):
            parse_libsvm("+1 5:1\n", n_features=3)

    def test_round_trip_is_byte_identical_on_canonical_text(self) -> None:
        assert serialize_libsvm(parse_libsvm(CANONICAL)) == CANONICAL

    def test_serialize_is_idempotent_on_messy_input(self) -> None:
        messy = "0   2:0.0  1:3.5\n+1.0 3:7 1:-0\n"
        once = serialize_libsvm(parse_libsvm(messy))
        assert serialize_libsvm(parse_libsvm(once)) == once
        # Zeros trimmed, indices sorted, labels normalized.
        assert once == "-1 1:3.5\n+1 3:7\n"

    def test_non_finite_value_rejected(self) -> None:
        with pytest.raises(DataFormatError, match="line 1"):
            parse_libsvm("+1 1:inf\n")


class TestDesignMatrixValidation:
    def test_label_outside_pm_one_rejected(self) -> None:
        with pytest.raises(ConfigError):
            DesignMatrix(np.zeros((2, 3)), np.asarray([1.0, 2.0]))

    def test_non_finite_feature_rejected(self) -> None:
        with pytest.raises(ConfigError):
            DesignMatrix(np.asarray([[np.nan]]), np.asarray([1.0]))


ML_FIXTURE = "1\t10\t4.0\t100\n2\t10\t3.0\t101\n1\t20\t5.0\t102\n"


class TestParseMovielens:
    def test_small_fixture_keeps_everyone(self) -> None:
        table = parse_movielens(ML_FIXTURE)
        assert table.n_users == 2 and table.n_items == 2
        assert set(table.user_index) == {0, 1}

    def test_duplicate_pair_keeps_latest_timestamp(self) -> None:
        text = "1\t10\t4.0\t100\n1\t10\t2.0\t999\n1\t10\t3.0\t50\n"
        table = parse_movielens(text)
        assert table.n_entries == 1
        assert table.rating[0] == 2.0 and table.timestamp[0] == 999

    def test_count_tie_prefers_lower_raw_id(self) -> None:
        # Users 7 and 3 both have one rating; only one slot is available.
        text = "7\t10\t1.0\t1\n3\t11\t1.0\t2\n"
        table = parse_movielens(text, top_users=1, top_items=2)
        assert list(table.user_ids) == [3]
        assert table.n_entries == 1

    def test_top_selection_is_by_count_descending(self) -> None:
        # User 5 rates twice, users 1 and 2 once each.
        text = "5\t10\t1.0\t1\n5\t11\t1.0\t2\n1\t10\t1.0\t3\n2\t11\t1.0\t4\n"
        table = parse_movielens(text, top_users=2, top_items=2)
        assert list(table.user_ids) == [5, 1]

    def test_entries_outside_selection_dropped(self) -> None:
        table = parse_movielens(ML_FIXTURE, top_users=1, top_items=1)
        assert table.n_entries == 1
        assert table.n_users == 1 and table.n_items == 1

    def test_malformed_line_reports_number(self) -> None:
        with pytest.raises(DataFormatError, match="line 2"):
            parse_movielens("1\t10\t4.0\t100\n1\t10\t4.0\n")

    def test_non_numeric_field_rejected(self) -> None:
        with pytest.raises(DataFormatError, match="line 1"):
            parse_movielens("a\t10\t4.0\t100\n")


class TestSynthLowrank:
    def test_rank_one_has_vanishing_two_by_two_minors(self) -> None:
        x, _ = synth_lowrank((8, 6), rank=1, noise_sigma=0.0, rng=root_rng(0))
        for i in range(7):
            for j in range(5):
                minor = x[i, j] * x[i + 1, j + 1] - x[i, j + 1] * x[i + 1, j]
                assert abs(minor) <= 1e-10

    def test_full_density_mask_is_all_true(self) -> None:
        _, mask = synth_lowrank((5, 4), rank=2, noise_sigma=0.0, rng=root_rng(0), density=1.0)
        assert mask.all()

    def test_rank_matches_singular_spectrum_and_dual_route_nuclear_norm(self) -> None:
        x, _ = synth_lowrank((10, 7), rank=3, noise_sigma=0.0, rng=root_rng(1))
        sv = np.linalg.svd(x, compute_uv=False)
        assert np.all(sv[:3] > 1e-8) and np.all(sv[3:] <= 1e-10)
        # Independent route: singular values are the square roots of the
        # Gram-matrix eigenvalues.
        eig = np.linalg.eigvalsh(x.T @ x)
        nuclear_from_gram = float(np.sqrt(np.clip(eig, 0.0, None)).sum())
        assert nuclear_from_gram == pytest.approx(float(sv.sum()), rel=1e-8)

    def test_deterministic_in_rng(self) -> None:
        a = synth_lowrank((6, 5), rank=2, noise_sigma=0.1, rng=root_rng(7))
        b = synth_lowrank((6, 5), rank=2, noise_sigma=0.1, rng=root_rng(7))
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_rank_validation(self) -> None:
        with pytest.raises(ConfigError):
            synth_lowrank((4, 3), rank=5, noise_sigma=0.0, rng=root_rng(0))


class TestSynthClassification:
    def test_shapes_labels_and_code_levels(self) -> None:
        data = synth_classification(200, n_features=20, seed=3)
        assert data.n_samples == 200 and data.n_features == 20
        assert set(np.unique(data.labels)) <= {-1.0, 1.0}
        assert set(np.unique(data.features)) <= {-1.5, -0.5, 0.5, 1.5}

    def test_deterministic_in_seed(self) -> None:
        a = synth_classification(50, seed=9)
        b = synth_classification(50, seed=9)
        c = synth_classification(50, seed=10)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)
        assert not np.array_equal(a.features, c.features)

    def test_both_classes_present(self) -> None:
        data = synth_classification(500, seed=0)
        assert (data.labels > 0).any() and (data.labels < 0).any()


class TestTrainTestSplit:
    def test_disjoint_and_covering(self) -> None:
        train, test = train_test_split(103, 0.2, seed=4)
        merged = np.concatenate([train, test])
        assert len(np.intersect1d(train, test)) == 0
        assert np.array_equal(np.sort(merged), np.arange(103))

    def test_pure_function_of_seed_and_ratio(self) -> None:
        assert np.array_equal(train_test_split(50, 0.3, 1)[1], train_test_split(50, 0.3, 1)[1])
        assert not np.array_equal(
            train_test_split(50, 0.3, 1)[1], train_test_split(50, 0.3, 2)[1]
        )

    def test_test_size_rounded(self) -> None:
        _, test = train_test_split(10, 0.25, seed=0)
        assert len(test) == 2  # round(10 * 0.25)

    def test_ratio_validated(self) -> None:
        with pytest.raises(ConfigError):
            train_test_split(10, 0.0, seed=0)
