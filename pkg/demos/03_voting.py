"""From slice calls to a subject call: biased voting, then an ensemble vote.

A scan is only as good as its worst slices: radiologists discard a scan for
a few badly ghosted slices even when most are clean. The subject-level rule
is therefore biased toward severity: if more than r1 = 40% of slices are
non-mild the subject is non-mild, and if severe slices are more than
r2 = 25% of that non-mild block, the subject is severe. Six classifiers
each produce a subject call this way; a majority vote with ties broken
toward severity makes the final decision.
"""

from cmrqa import ArtefactLevel, SliceCounts, biased_vote, ensemble_vote


def show(n1, n2, n3, note=""):
    level = biased_vote(SliceCounts(n1, n2, n3))
    print(f"  mild={n1} intermediate={n2} severe={n3}  ->  {level.name.lower():<12} {note}")
    return level


def main():
    print("Biased voting over one scan's slice calls (r1=0.4, r2=0.25):")
    show(10, 0, 0)
    show(6, 4, 0, "(exactly 40% non-mild is not enough)")
    show(5, 4, 1, "(now 50% non-mild, severe share 20%)")
    show(5, 3, 2, "(severe share 40% of the non-mild block)")
    show(0, 0, 1, "(a single slice rules the scan)")

    print()
    print("The rule is deliberately not monotone in a naive sense:")
    a = show(1, 2, 1, "(1 of 3 non-mild slices is severe: 33% > 25%)")
    b = show(0, 3, 1, "(worsening the mild slice DILUTES severe to 25%)")
    assert a == ArtefactLevel.SEVERE and b == ArtefactLevel.INTERMEDIATE
    print("  Worsening a slice to severe never lowers the call, but worsening a")
    print("  mild slice to intermediate can, because it shrinks the severe share")
    print("  of the non-mild block. That is the documented, tested behaviour.")

    print()
    print("Ensemble majority with ties resolved toward severity:")
    members = [ArtefactLevel.MILD] * 3 + [ArtefactLevel.SEVERE] * 3
    print(f"  3 mild vs 3 severe          -> {ensemble_vote(members).name.lower()}")
    members = [ArtefactLevel.MILD, ArtefactLevel.MILD, ArtefactLevel.INTERMEDIATE,
               ArtefactLevel.INTERMEDIATE, ArtefactLevel.SEVERE, ArtefactLevel.SEVERE]
    print(f"  three-way 2/2/2 tie         -> {ensemble_vote(members).name.lower()}")
    members = [ArtefactLevel.MILD] * 4 + [ArtefactLevel.SEVERE] * 2
    print(f"  clear mild majority         -> {ensemble_vote(members).name.lower()}")


if __name__ == "__main__":
    main()
