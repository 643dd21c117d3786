"""Builds the extension with cargo, imports it and exercises each entry point.

Usage: python3 python/smoke_test.py [--no-build]
"""

import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load():
    if "--no-build" not in sys.argv:
        subprocess.run(
            ["cargo", "build", "--release", "-p", "cardmso-py", "--features", "extension-module"],
            cwd=ROOT,
            check=True,
        )
    built = ROOT / "target" / "release" / "libcardmso.so"
    target = Path(tempfile.mkdtemp()) / "cardmso.so"
    shutil.copy(built, target)
    sys.path.insert(0, str(target.parent))
    import cardmso

    return cardmso


def main():
    cm = load()

    c4 = cm.Graph.cycle(4)
    p3 = cm.Graph.parse("p 3 2\nv 1 a\nv 2 b\nv 3 c\ne 1 2\ne 2 3\n")
    assert (c4.n, c4.m, len(p3)) == (4, 4, 3)
    assert p3.names() == ["a", "b", "c"]

    bipartite = cm.Formula(cm.corpus("bipartite_equal"))
    assert bipartite.prefix == ["X1", "X2"]
    assert bipartite.stats()["small_threshold"] == 2

    report = cm.check(c4, bipartite)
    assert report["holds"]
    assert sorted(len(s) for s in report["witness"].values()) == [2, 2]
    assert cm.brute_check(c4, bipartite)
    assert not cm.check(p3, bipartite, mode="nd")["holds"]
    assert not cm.brute_check(p3, bipartite)

    ids = cm.Formula(cm.corpus("ids_k"))
    assert ids.params() == ["k"]
    report = cm.check(p3, ids.with_params({"k": 1}))
    assert report["witness"] == {"X": [1]}

    independence = cm.Formula(cm.corpus("independence"))
    c5 = cm.Graph.cycle(5)
    assert cm.partition(c5, independence, 2) is None
    parts = cm.partition(c5, independence, 3)
    assert sorted(v for p in parts for v in p) == list(range(5))
    assert cm.brute_partition(c5, independence, 3)

    assert cm.cbalance(cm.Graph.path(4), 2)[0] == 1
    assert cm.cbalance(cm.Graph.complete(4), 2)[0] == 4
    assert cm.brute_cbalanced(cm.Graph.cycle(6), 2) == 2

    for bad in (lambda: cm.Formula("exists X. ["), lambda: cm.check(c4, ids), lambda: cm.Graph(2, [(0, 5)])):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
