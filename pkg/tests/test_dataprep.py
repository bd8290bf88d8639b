from collections import Counter

import pytest

from cmrqa.dataprep import (
    BatchManifest,
    FoldSplit,
    ScanRecord,
    balanced_batches,
    class_tally,
    make_folds,
)
from cmrqa.decision import ArtefactLevel
from cmrqa.errors import InfeasibleSplitError, ValidationError

M, I, S = ArtefactLevel.MILD, ArtefactLevel.INTERMEDIATE, ArtefactLevel.SEVERE


def subject_records(subject: str, levels) -> list[ScanRecord]:
    return [
        ScanRecord(scan_id=f"{subject}-{i:02d}", subject_id=subject, level=lv)
        for i, lv in enumerate(levels)
    ]


def skewed_roster() -> list[ScanRecord]:
    """20 subjects, 8 scans each; class totals (70, 69, 21)."""
    records = []
    for n in range(10):
        records += subject_records(f"P{n:03d}", [M, M, M, I, I, I, S, S])
    records += subject_records("P010", [M, M, M, M, I, I, I, S])
    for n in range(11, 20):
        records += subject_records(f"P{n:03d}", [M, M, M, M, I, I, I, I])
    return records


class TestScanRecord:
    def test_coerces_level(self):
        rec = ScanRecord("s1", "p1", 3)
        assert rec.level is ArtefactLevel.SEVERE

    def test_rejects_empty_ids(self):
        with pytest.raises(ValidationError):
            ScanRecord("", "p1", 1)

    def test_rejects_bad_level(self):
        with pytest.raises(ValueError):
            ScanRecord("s1", "p1", 4)


class TestMakeFolds:
    def test_skewed_roster_splits_evenly(self):
        records = skewed_roster()
        assert class_tally(records) == (70, 69, 21)
        split = make_folds(records, k=5, seed=0)
        assert split.k == 5
        for scans in split.fold_scans:
            assert len(scans) == 32
        for subs in split.fold_subjects:
            assert len(subs) == 4

    def test_each_fold_has_enough_severe(self):
        records = skewed_roster()
        by_id = {r.scan_id: r for r in records}
        split = make_folds(records, k=5, seed=0)
        for scans in split.fold_scans:
            tally = class_tally(by_id[s] for s in scans)
            assert tally[2] >= 3

    def test_folds_partition_the_scans(self):
        records = skewed_roster()
        split = make_folds(records, k=5, seed=2)
        seen = [s for fold in split.fold_scans for s in fold]
        assert sorted(seen) == sorted(r.scan_id for r in records)
        assert len(set(seen)) == len(seen)

    def test_subjects_are_atomic(self):
        records = skewed_roster()
        split = make_folds(records, k=5, seed=3)
        fold_of = {}
        for i, scans in enumerate(split.fold_scans):
            for s in scans:
                fold_of[s] = i
        for rec in records:
            subject_folds = {fold_of[r.scan_id] for r in records if r.subject_id == rec.subject_id}
            assert len(subject_folds) == 1

    def test_uneven_subjects_respect_scan_tolerance(self):
        # subject sizes 1..6: scans can only balance up to the largest subject
        records = []
        for n in range(12):
            size = 1 + n % 6
            levels = [M, I, S] * 2
            records += subject_records(f"Q{n:02d}", levels[:size])
        split = make_folds(records, k=3, seed=1, min_severe=1)
        counts = [len(scans) for scans in split.fold_scans]
        assert max(counts) - min(counts) <= 6
        sub_counts = [len(s) for s in split.fold_subjects]
        assert max(sub_counts) - min(sub_counts) <= 1

    def test_deterministic_per_seed(self):
        records = skewed_roster()
        assert make_folds(records, k=5, seed=7) == make_folds(records, k=5, seed=7)
        assert make_folds(records, k=5, seed=7) != make_folds(records, k=5, seed=8)

    def test_retries_until_severe_constraint_holds(self):
        # severe scans live in only five subjects; a uniform shuffle rarely
        # lands one in every fold on the first try
        records = []
        for n in range(5):
            records += subject_records(f"R{n}", [S, S, S, M])
        for n in range(5, 10):
            records += subject_records(f"R{n}", [M, M, I, I])
        by_id = {r.scan_id: r for r in records}
        split = make_folds(records, k=5, seed=0, min_severe=3)
        for scans in split.fold_scans:
            assert class_tally(by_id[s] for s in scans)[2] >= 3

    def test_infeasible_raises_with_tallies(self):
        # all severe scans in one subject: half the folds can never comply
        records = subject_records("A", [S, S, S]) + subject_records("B", [M, M, M])
        records += subject_records("C", [I, I]) + subject_records("D", [M, I])
        with pytest.raises(InfeasibleSplitError) as err:
            make_folds(records, k=2, seed=0, min_severe=3, max_tries=50)
        assert len(err.value.tallies) == 2
        assert all(len(t) == 3 for t in err.value.tallies)

    def test_validates_k(self):
        records = skewed_roster()
        with pytest.raises(ValidationError):
            make_folds(records, k=1)
        with pytest.raises(ValidationError):
            make_folds(records[:8], k=5)  # one subject, five folds

    def test_duplicate_scan_ids_rejected(self):
        records = skewed_roster()
        with pytest.raises(ValidationError, match="duplicate"):
            make_folds(records + [records[0]], k=5)

    def test_dict_round_trip(self):
        split = make_folds(skewed_roster(), k=5, seed=4)
        assert FoldSplit.from_dict(split.to_dict()) == split


def flat_roster(n_mild, n_inter, n_severe):
    records = []
    for i in range(n_mild):
        records.append(ScanRecord(f"m{i:03d}", f"sm{i:03d}", M))
    for i in range(n_inter):
        records.append(ScanRecord(f"i{i:03d}", f"si{i:03d}", I))
    for i in range(n_severe):
        records.append(ScanRecord(f"s{i:03d}", f"ss{i:03d}", S))
    return records


class TestBalancedBatches:
    def test_batch_composition(self):
        manifest = balanced_batches(flat_roster(90, 60, 30), batch_size=30, seed=0)
        assert len(manifest.batches) == 9
        for batch in manifest.batches:
            assert len(batch) == 30
            tally = Counter(manifest.levels[s] for s in batch)
            assert tally == {1: 10, 2: 10, 3: 10}

    def test_largest_class_used_exactly_once(self):
        manifest = balanced_batches(flat_roster(90, 60, 30), batch_size=30, seed=0)
        drawn = [s for b in manifest.batches for s in b if manifest.levels[s] == 1]
        assert sorted(drawn) == sorted(set(drawn))
        assert len(drawn) == 90

    def test_smaller_classes_recycle_evenly(self):
        manifest = balanced_batches(flat_roster(90, 60, 30), batch_size=30, seed=1)
        inter = Counter(s for b in manifest.batches for s in b if manifest.levels[s] == 2)
        severe = Counter(s for b in manifest.batches for s in b if manifest.levels[s] == 3)
        assert len(inter) == 60 and sum(inter.values()) == 90
        assert set(inter.values()) <= {1, 2}
        assert len(severe) == 30 and sum(severe.values()) == 90
        assert set(severe.values()) == {3}

    def test_recycling_passes_are_reshuffled(self):
        manifest = balanced_batches(flat_roster(90, 60, 30), batch_size=30, seed=2)
        severe_seq = [s for b in manifest.batches for s in b if manifest.levels[s] == 3]
        passes = [severe_seq[i : i + 30] for i in range(0, 90, 30)]
        assert all(sorted(p) == sorted(passes[0]) for p in passes)
        assert not (passes[0] == passes[1] == passes[2])

    def test_deterministic_per_seed(self):
        roster = flat_roster(20, 12, 6)
        a = balanced_batches(roster, batch_size=6, seed=9)
        b = balanced_batches(roster, batch_size=6, seed=9)
        c = balanced_batches(roster, batch_size=6, seed=10)
        assert a == b
        assert a.batches != c.batches

    def test_class_smaller_than_quota_repeats_within_batch(self):
        manifest = balanced_batches(flat_roster(12, 12, 2), batch_size=12, seed=0)
        for batch in manifest.batches:
            tally = Counter(manifest.levels[s] for s in batch)
            assert tally == {1: 4, 2: 4, 3: 4}

    def test_batch_size_validated(self):
        roster = flat_roster(6, 6, 6)
        with pytest.raises(ValidationError):
            balanced_batches(roster, batch_size=10)
        with pytest.raises(ValidationError):
            balanced_batches(roster, batch_size=0)

    def test_empty_class_rejected(self):
        with pytest.raises(ValidationError, match="severe"):
            balanced_batches(flat_roster(6, 6, 0), batch_size=6)

    def test_json_round_trip(self):
        manifest = balanced_batches(flat_roster(9, 6, 3), batch_size=9, seed=5)
        assert BatchManifest.from_json(manifest.to_json()) == manifest
