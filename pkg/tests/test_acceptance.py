"""Full-size acceptance runs, one test per criterion.

Each test runs the criterion's presets at factor 1 and prints a single
``Cn PASS|FAIL`` line; the lines are repeated in the terminal summary.
"""

import pytest

from epicrit import presets

CRITERIA = {
    "C1": ["sis-threshold"],
    "C2": ["sir-threshold"],
    "C3": ["feller-extinction"],
    "C4": ["coupling-domination", "coupling-marginals"],
    "C5": ["graph-oracle"],
    "C6": ["spatial-envelope"],
    "C7": ["spatial-attrition"],
    "C8": ["watanabe-moments"],
    "C9": ["spde-particle"],
    "C10": ["determinism"],
}

RESULTS: dict[str, str] = {}


def test_criteria_cover_every_preset():
    assert sorted(sum(CRITERIA.values(), [])) == sorted(presets.PRESETS)
    for crit, names in CRITERIA.items():
        assert all(presets.PRESETS[n][0] == crit for n in names)


@pytest.mark.acceptance
@pytest.mark.slow
@pytest.mark.parametrize("criterion", list(CRITERIA))
def test_acceptance(criterion, tmp_path_factory, capsys):
    root = tmp_path_factory.mktemp(criterion)
    results = [presets.run_preset(name, root=root, echo=False) for name in CRITERIA[criterion]]
    passed = all(r.passed for r in results)
    detail = "; ".join(line.strip() for r in results for line in r.lines)
    line = f"{criterion} {'PASS' if passed else 'FAIL'} [{', '.join(CRITERIA[criterion])}] {detail}"
    RESULTS[criterion] = line
    with capsys.disabled():
        print(f"\n{line}")
    assert passed, line
