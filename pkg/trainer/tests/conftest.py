"""Shared fixture: synthetic scans turned into training artifacts.

Everything the trainer consumes is produced here the same way a user
would produce it: a small synthetic scan set, per-subject patch dumps
from `cmrqa sample --png`, and a balanced batch manifest from
`cmrqa balance`.
"""

import csv

import pytest

from cmrqa import SynthConfig, generate_dataset, read_truth
from cmrqa.cli import main as cmrqa_main


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    root = tmp_path_factory.mktemp("trainfix")
    bench = root / "bench"
    generate_dataset(
        bench, SynthConfig(per_class=7, calibration_per_class=1, n_slices=1, seed=0)
    )
    rows = [r for r in read_truth(bench) if r["split"] == "eval"]

    patches = root / "patches"
    for row in rows:
        sid = row["scan_id"]
        rc = cmrqa_main(
            [
                "sample",
                "--volume", str(bench / "volumes" / f"{sid}.nii.gz"),
                "--mask", str(bench / "masks" / f"{sid}.nii.gz"),
                "--png", "--count", "1", "--seed", "0",
                "--out", str(patches / sid),
            ]
        )
        assert rc == 0

    labels = root / "labels.csv"
    with open(labels, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scan_id", "subject_id", "level"])
        for row in rows:
            writer.writerow([row["scan_id"], row["subject_id"], row["level"]])
    rc = cmrqa_main(
        [
            "balance",
            "--labels", str(labels),
            "--batch-size", "3",
            "--seed", "0",
            "--out", str(root / "batches"),
        ]
    )
    assert rc == 0

    return {
        "root": root,
        "bench": bench,
        "patches": patches,
        "manifest": root / "batches" / "batches.json",
        "scan_ids": [row["scan_id"] for row in rows],
    }
