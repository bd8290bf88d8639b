"""Subject-atomic cross-validation folds and class-balanced batches.

Two data-preparation rules guard training integrity. First, all eight scans
of a volunteer (2 cardiac phases x 4 breathing conditions) must land in the
same fold, or validation would leak a subject's anatomy into training.
Second, severity classes are wildly imbalanced, so each training batch draws
an equal quota from every class, recycling the smaller classes as needed.
"""

from collections import Counter

from cmrqa import ScanRecord, balanced_batches, class_tally, make_folds


def roster():
    records = []
    profiles = [(1, 1, 1, 2, 2, 2, 3, 3)] * 10 \
        + [(1, 1, 1, 1, 2, 2, 2, 3)] \
        + [(1, 1, 1, 1, 2, 2, 2, 2)] * 9
    for i, levels in enumerate(profiles):
        for j, level in enumerate(levels):
            records.append(ScanRecord(f"P{i:03d}-{j}", f"P{i:03d}", level))
    return records


def main():
    records = roster()
    tally = class_tally(records)
    print(f"{len(records)} scans from 20 subjects, class totals "
          f"mild/intermediate/severe = {tally}")

    split = make_folds(records, k=5, seed=0)
    subject_of = {r.scan_id: r.subject_id for r in records}
    level_of = {r.scan_id: r.level for r in records}
    print()
    print("5 folds, subjects atomic, each fold with enough severe scans:")
    for i, scans in enumerate(split.fold_scans):
        severe = sum(1 for s in scans if level_of[s] == 3)
        subjects = len({subject_of[s] for s in scans})
        print(f"  fold {i}: {len(scans)} scans from {subjects} subjects, {severe} severe")

    print()
    print("Balanced batches from a (90, 60, 30) class split, batch size 30:")
    flat = ([ScanRecord(f"M{i}", f"M{i}", 1) for i in range(90)]
            + [ScanRecord(f"I{i}", f"I{i}", 2) for i in range(60)]
            + [ScanRecord(f"S{i}", f"S{i}", 3) for i in range(30)])
    manifest = balanced_batches(flat, batch_size=30, seed=0)
    uses = Counter(s for batch in manifest.batches for s in batch)
    per_class = {
        1: [uses[f"M{i}"] for i in range(90)],
        2: [uses[f"I{i}"] for i in range(60)],
        3: [uses[f"S{i}"] for i in range(30)],
    }
    print(f"  {len(manifest.batches)} batches of 10+10+10 (largest class sets the epoch)")
    print(f"  mild scans used once each: {set(per_class[1])}")
    print(f"  intermediate recycled within the epoch: uses {sorted(set(per_class[2]))}")
    print(f"  severe recycled twice: uses {set(per_class[3])}")


if __name__ == "__main__":
    main()
