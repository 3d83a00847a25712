#!/usr/bin/env python3
"""Build the f2s_py extension module and exercise it end to end.

Compiles the cdylib with cargo, copies it next to a temporary directory
under the import name Python expects, then checks a handful of values
with known closed forms. Exits nonzero on the first failure.

Usage: python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[1]


def build_module(workdir: Path) -> None:
    subprocess.run(
        ["cargo", "build", "-p", "f2s-py", "--release"],
        cwd=REPO_ROOT,
        check=True,
    )
    built = None
    for name in ("libf2s_py.so", "libf2s_py.dylib", "f2s_py.dll"):
        candidate = REPO_ROOT / "target" / "release" / name
        if candidate.exists():
            built = candidate
            break
    if built is None:
        sys.exit("error: cargo built no extension library under target/release")
    suffix = ".pyd" if built.suffix == ".dll" else ".so"
    shutil.copy2(built, workdir / f"f2s_py{suffix}")


def approx(actual: float, expected: float, tol: float = 1e-9) -> None:
    if abs(actual - expected) > tol:
        sys.exit(f"error: got {actual!r}, expected {expected!r} (tol {tol})")


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        build_module(Path(tmp))
        sys.path.insert(0, tmp)
        import f2s_py

        print(f"loaded f2s_py {f2s_py.__version__}")

        assert f2s_py.languages() == ["c", "cpp", "go", "java", "python"]

        # Judge scoring: uniform logits sit at the middle label; all the
        # mass on an extreme label approaches that label's value.
        approx(f2s_py.judge_score([0.0] * 5), 3.0)
        approx(f2s_py.judge_score([math.log(9), 0.0, 0.0, 0.0, 0.0]), 23 / 13)
        approx(f2s_py.judge_score([0.0, 0.0, 0.0, 0.0, math.log(9)]), 55 / 13)
        probs = f2s_py.judge_probs([0.0] * 4)
        approx(sum(probs), 1.0)
        approx(probs[0], 0.25)

        # List-wise loss: one positive against n equal-scored negatives
        # collapses to ln(1 + n), and the gradient sums to zero.
        approx(f2s_py.list_loss(-0.5, [-0.5] * 10), math.log(11))
        grad = f2s_py.list_loss_grad(1.0, [0.5, -0.25])
        approx(sum(grad), 0.0)
        assert grad[0] < 0 < min(grad[1:])

        report = f2s_py.loss_report(
            [-0.5, -0.5],
            [[-0.5, -0.5]] * 10,
            beta=1.0,
        )
        approx(report.l_sty, report.l_list, tol=0.0)
        approx(report.l_list, math.log(11))
        print(f"losses: {report!r}")

        # Style similarity: identity is exact, and a rename alone moves
        # only the naming component.
        python_a = "def scale(values):\n    acc = 0\n    for v in values:\n        acc += v * 3\n    return acc\n"
        python_b = python_a.replace("acc", "running_total").replace("values", "items")
        identical = f2s_py.style_similarity(python_a, "python", python_a, "python")
        approx(identical.cssim, 1.0, tol=0.0)
        renamed = f2s_py.style_similarity(python_a, "python", python_b, "python")
        assert renamed.dis_var > 0.0
        approx(renamed.dis_stru, 0.0, tol=0.0)
        assert 0.0 <= renamed.cssim < 1.0
        print(f"style: {renamed!r}")

        # Cross-language comparison parses each side with its own grammar.
        c_code = "int scale(int v) {\n    return v * 3;\n}\n"
        cross = f2s_py.style_similarity(c_code, "c", python_a, "python")
        assert 0.0 <= cross.cssim < 1.0

        assert f2s_py.tree_edit_distance(python_a, "python", python_a, "python") == 0
        assert f2s_py.tree_edit_distance(python_a, "python", c_code, "c") > 0

        approx(f2s_py.norm_edit_distance("kitten", "sitting"), 3 / 7)
        approx(f2s_py.norm_edit_distance("", ""), 0.0, tol=0.0)

        # Consensus: the middle candidate is closest to both others.
        matrix = [
            [0.0, 0.9, 0.2],
            [0.9, 0.0, 0.8],
            [0.2, 0.8, 0.0],
        ]
        assert f2s_py.consensus_index(matrix) == 1

        # Errors surface as ValueError, not panics.
        for bad in (
            lambda: f2s_py.style_similarity("def broken(:", "python", "x = 1", "python"),
            lambda: f2s_py.style_similarity("x = 1", "rust", "x = 1", "python"),
            lambda: f2s_py.consensus_index([[0.0, 1.0]]),
            lambda: f2s_py.loss_report([-0.5], [[-0.5]], score_mode="bogus"),
        ):
            try:
                bad()
            except ValueError:
                pass
            else:
                sys.exit("error: expected ValueError")

        print("smoke test passed")


if __name__ == "__main__":
    main()
