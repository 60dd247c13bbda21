"""Smoke test for the tmle extension module.

Build and install first:  pip install --no-build-isolation -e crates/py
"""

import math
import pathlib
import random
import tempfile

import tmle

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main():
    assert tmle.ks_distance([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert tmle.ks_distance([0.0], [1.0]) == 1.0

    assert tmle.calibrate_score(0.37, 0.3, 0.3) == 0.37
    assert abs(tmle.calibrate_score(0.5, 0.5, 0.0022) - 0.0022) < 1e-15
    assert round(tmle.bias_metric(2991, 69, 30000), 3) == 0.097
    assert tmle.estimate_positive_total([0.2, 0.6, 0.9], "threshold", 0.5) == 2
    assert math.isclose(tmle.estimate_positive_total([0.2, 0.6, 0.9]), 1.7)
    assert tmle.one_hot(1, 3) == [0.0, 1.0, 0.0]

    t = tmle.TransformationMatrix([[0.9, 0.2], [0.1, 0.8]])
    assert t.classes == 2
    assert t.apply([1.0, 0.0]) == [0.9, 0.1]
    truth = [i % 2 for i in range(20000)]
    observed = t.misclassify(truth, 7)
    est = tmle.TransformationMatrix.empirical(truth, observed, 2)
    assert abs(est.rows()[1][0] - 0.1) < 0.02

    rng = random.Random(1)
    x = [[rng.uniform(0, 1)] for _ in range(400)]
    y = [3.0 if row[0] < 0.5 else -1.0 for row in x]
    tree = tmle.Tree.fit(x, y, max_depth=1, min_leaf=5)
    assert tree.leaf_count == 2
    assert tree.predict([[0.1], [0.9]]) == [3.0, -1.0]
    assert tmle.Tree.from_text(tree.to_text()).predict([[0.2]]) == [3.0]

    try:
        tmle.Scenario.from_toml("schema_version = 1\nbogus = 1\n")
    except ValueError:
        pass
    else:
        raise AssertionError("invalid scenario accepted")

    scenario = tmle.Scenario.load(str(ROOT / "scenarios" / "drift.toml"))
    report = scenario.run(replicates=2, threads=1)
    assert report.failures == []
    assert report.configurations[0] == "baseline"
    rows = report.decomposition()
    assert any(r["configuration"] == "all_on" for r in rows)
    gap = {r["configuration"]: r["gap"] for r in report.validity() if r["metric"] == "accuracy"}
    assert gap["all_on"] > gap["baseline"] - 1e-9
    with tempfile.TemporaryDirectory() as out:
        paths = report.emit(out)
        assert len(paths) == 7
    print("smoke test ok:", scenario.name, scenario.config_hash[:12])


if __name__ == "__main__":
    main()
