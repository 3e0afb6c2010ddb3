import numpy as np
import pytest

from evt import evidence
from evt.evidence import (EvidenceError, EvidenceSet, EvidenceSource, MISSING,
                          apply_incompleteness, drop_classes, drop_percent,
                          fnv1a, hash_mod_evidence, labelset_evidence,
                          make_source, mod_evidence, one_hot, random_evidence,
                          superset_evidence)

# 32-bit FNV-1a of decimal label strings, frozen from an independent
# byte-by-byte computation (offset 0x811C9DC5, prime 0x01000193).
FNV_GOLDEN = {
    "0": 890022063,
    "1": 873244444,
    "2": 923577301,
    "9": 1007465396,
    "10": 468396612,
    "42": 2279835011,
    "123": 1916298011,
}


class TestEvidenceSource:
    def test_basic_properties(self):
        src = EvidenceSource(np.array([0, 1, MISSING, 2]), 3,
                             np.array([True, True, False, True]))
        assert src.n == 4 and src.m == 3
        np.testing.assert_array_equal(src.available_indices(), [0, 1, 3])
        np.testing.assert_array_equal(src.observed_classes(), [0, 1, 2])

    def test_value_out_of_range_rejected(self):
        with pytest.raises(EvidenceError):
            EvidenceSource(np.array([0, 3]), 3, np.array([True, True]))

    def test_masked_positions_must_hold_sentinel(self):
        with pytest.raises(EvidenceError):
            EvidenceSource(np.array([0, 1]), 3, np.array([True, False]))

    def test_width_floor(self):
        with pytest.raises(EvidenceError):
            EvidenceSource(np.array([0, 0]), 1, np.array([True, True]))

    def test_copy_independent(self):
        src = mod_evidence([0, 1, 2], 2)
        dup = src.copy()
        dup.mask[0] = False
        dup.values[0] = MISSING
        assert src.mask[0]

    def test_set_iterates_in_order(self):
        a, b = mod_evidence([0, 1], 2), mod_evidence([1, 0], 2)
        s = EvidenceSet([a, b])
        assert len(s) == 2 and s[0] is a and list(s) == [a, b]

    def test_set_requires_equal_lengths(self):
        with pytest.raises(EvidenceError):
            EvidenceSet([mod_evidence([0, 1], 2), mod_evidence([0, 1, 2], 2)])


class TestGenerators:
    def test_mod_values(self):
        src = mod_evidence(np.arange(10), 3)
        np.testing.assert_array_equal(src.values, np.arange(10) % 3)
        assert src.width == 3 and src.mask.all()

    def test_mod_width_floor(self):
        with pytest.raises(EvidenceError):
            mod_evidence([0, 1], 1)

    def test_fnv1a_golden_values(self):
        for text, want in FNV_GOLDEN.items():
            assert fnv1a(text) == want

    def test_hash_mod_uses_decimal_string(self):
        src = hash_mod_evidence([0, 1, 42, 123], 4)
        want = [FNV_GOLDEN["0"] % 4, FNV_GOLDEN["1"] % 4,
                FNV_GOLDEN["42"] % 4, FNV_GOLDEN["123"] % 4]
        np.testing.assert_array_equal(src.values, want)

    def test_superset_grouping(self):
        src = superset_evidence([0, 1, 2, 3], {0: 0, 1: 0, 2: 1, 3: 1})
        np.testing.assert_array_equal(src.values, [0, 0, 1, 1])
        assert src.width == 2

    def test_superset_missing_class(self):
        with pytest.raises(EvidenceError):
            superset_evidence([0, 1, 2], {0: 0, 1: 1})

    def test_superset_group_numbering(self):
        with pytest.raises(EvidenceError):
            superset_evidence([0, 1], {0: 0, 1: 2})

    def test_labelset_identity(self):
        src = labelset_evidence([3, 1, 0, 2])
        np.testing.assert_array_equal(src.values, [3, 1, 0, 2])
        assert src.width == 4

    def test_random_deterministic_and_in_range(self):
        a = random_evidence(500, 4, seed=9)
        b = random_evidence(500, 4, seed=9)
        np.testing.assert_array_equal(a.values, b.values)
        assert a.values.min() >= 0 and a.values.max() < 4
        # roughly uniform: each class within 40% of the expected count
        counts = np.bincount(a.values, minlength=4)
        assert (np.abs(counts - 125) < 50).all()

    def test_random_differs_by_seed(self):
        a = random_evidence(100, 3, seed=0)
        b = random_evidence(100, 3, seed=1)
        assert (a.values != b.values).any()

    def test_negative_labels_rejected(self):
        with pytest.raises(EvidenceError):
            mod_evidence([-1, 0, 1], 2)


class TestOneHot:
    def test_rows_and_index_map(self):
        src = EvidenceSource(np.array([2, MISSING, 0]), 3,
                             np.array([True, False, True]))
        mat, idx = one_hot(src)
        np.testing.assert_array_equal(idx, [0, 2])
        np.testing.assert_array_equal(mat, [[0, 0, 1], [1, 0, 0]])
        assert mat.dtype == np.float32

    def test_rows_are_stochastic(self):
        src = mod_evidence(np.arange(30), 4)
        mat, _ = one_hot(src)
        np.testing.assert_array_equal(mat.sum(axis=1), 1.0)


class TestDropPercent:
    def test_exact_count(self):
        src = mod_evidence(np.arange(200), 4)
        for p in (0.1, 0.3, 0.55):
            kept = drop_percent(src, p, seed=0)
            assert kept.m == round(p * 200)
            assert kept.n == 200 and kept.width == 4

    def test_values_preserved_where_kept(self):
        src = mod_evidence(np.arange(100), 3)
        kept = drop_percent(src, 0.4, seed=1)
        idx = kept.available_indices()
        np.testing.assert_array_equal(kept.values[idx], src.values[idx])
        assert (kept.values[~kept.mask] == MISSING).all()

    def test_deterministic_by_seed(self):
        src = mod_evidence(np.arange(100), 3)
        a = drop_percent(src, 0.3, seed=5)
        b = drop_percent(src, 0.3, seed=5)
        np.testing.assert_array_equal(a.mask, b.mask)

    def test_full_fraction_is_identity(self):
        src = mod_evidence(np.arange(50), 5)
        kept = drop_percent(src, 1.0, seed=0)
        assert kept.mask.all()

    def test_class_coverage_when_feasible(self):
        # kept count 10x width: every class must survive in each draw
        src = mod_evidence(np.arange(400), 4)
        for seed in range(30):
            kept = drop_percent(src, 0.1, seed=seed)
            assert len(kept.observed_classes()) == 4

    def test_tiny_draws_skip_coverage(self):
        src = mod_evidence(np.arange(40), 4)
        kept = drop_percent(src, 0.1, seed=0)  # 4 samples < 10x width
        assert kept.m == 4

    def test_fraction_bounds(self):
        src = mod_evidence(np.arange(10), 2)
        for bad in (0.0, -0.2, 1.5):
            with pytest.raises(EvidenceError):
                drop_percent(src, bad, seed=0)

    def test_requires_complete_source(self):
        src = drop_percent(mod_evidence(np.arange(100), 4), 0.5, seed=0)
        with pytest.raises(EvidenceError):
            drop_percent(src, 0.5, seed=0)


class TestDropClasses:
    def test_masks_only_named_classes(self):
        src = mod_evidence(np.arange(30), 3)
        out = drop_classes(src, {1})
        assert out.width == 3
        assert (out.values[out.mask] != 1).all()
        np.testing.assert_array_equal(out.mask, np.arange(30) % 3 != 1)
        np.testing.assert_array_equal(out.observed_classes(), [0, 2])

    def test_width_metadata_unchanged(self):
        src = labelset_evidence(np.repeat(np.arange(10), 5))
        out = drop_classes(src, {8, 9})
        assert out.width == 10
        mat, _ = one_hot(out)
        assert mat.shape[1] == 10
        assert mat[:, 8:].sum() == 0

    def test_unknown_class_rejected(self):
        src = mod_evidence(np.arange(9), 3)
        with pytest.raises(EvidenceError):
            drop_classes(src, {7})

    def test_cannot_remove_everything(self):
        src = mod_evidence(np.arange(9), 3)
        with pytest.raises(EvidenceError):
            drop_classes(src, {0, 1, 2})

    def test_empty_removal_is_identity(self):
        src = mod_evidence(np.arange(9), 3)
        out = drop_classes(src, set())
        np.testing.assert_array_equal(out.mask, src.mask)


class TestSpecDispatch:
    def test_make_source_kinds(self):
        labels = np.arange(20)
        assert make_source(labels, ("mod", 4)).width == 4
        assert make_source(labels, ("hash", 3)).width == 3
        assert make_source(labels, ("labels",)).width == 20
        grp = tuple(v // 10 for v in range(20))
        assert make_source(labels, ("superset", grp)).width == 2
        r = make_source(labels, ("random", 5), seed=3)
        np.testing.assert_array_equal(r.values, random_evidence(20, 5, 3).values)

    def test_make_source_unknown_kind(self):
        with pytest.raises(EvidenceError):
            make_source([0, 1], ("oracle", 2))

    def test_apply_incompleteness_modes(self):
        src = mod_evidence(np.arange(100), 4)
        assert apply_incompleteness(src, ("none",)).mask.all()
        assert apply_incompleteness(src, ("percent", 0.5), seed=1).m == 50
        out = apply_incompleteness(src, ("classes", (0,)))
        assert 0 not in out.observed_classes()
        with pytest.raises(EvidenceError):
            apply_incompleteness(src, ("half",))

    def test_apply_incompleteness_returns_copy(self):
        src = mod_evidence(np.arange(10), 2)
        out = apply_incompleteness(src, ("none",))
        assert out is not src
        out.mask[0] = False
        out.values[0] = MISSING
        assert src.mask.all()
