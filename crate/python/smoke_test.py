"""Smoke test for the `adaptsel` extension module.

Build and run from the repository root:

    cargo build --offline -p adaptsel-py
    cp target/debug/libadaptsel_py.so python/adaptsel.so
    python3 python/smoke_test.py
"""

import json
import math
import pathlib
import sys

HERE = pathlib.Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

import adaptsel  # noqa: E402

FIXTURES = HERE.parent / "crates" / "cli" / "fixtures"


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    params, residual = adaptsel.fit_saturation([(1, 0.526), (2, 0.591), (8, 0.620)])
    assert residual < 1e-6
    close(params.predict(8), 0.620, 1e-3)
    assert params.predict(16) >= params.predict(8)

    two = adaptsel.two_point_fit((1, 0.5), (8, 0.6), 0.3)
    close(two.predict(1), 0.5, 1e-9)
    close(two.predict(8), 0.6, 1e-9)

    a, b = adaptsel.calibrate([(0.6, 0.85), (0.8, 0.91)])
    close(a * 0.6 + b, 0.85, 1e-12)

    assert adaptsel.pack_concat(1025, 512) == 3
    assert adaptsel.pack_ffd([3, 3, 2, 2, 2, 2], 7) == 3
    assert adaptsel.pack_exact([3, 3, 2, 2, 2, 2], 7) == 2

    compute = (FIXTURES / "compute.json").read_text()
    one = adaptsel.ft_compute_cost(1, 2_400_000, 512, compute)
    assert adaptsel.ft_compute_cost(2, 2_400_000, 512, compute) > one > 0
    assert adaptsel.icl_query_cost(8, 120, 140, 5) > adaptsel.icl_query_cost(1, 120, 140, 5)
    assert adaptsel.ft_token_cost(1e6, 1) > 0

    efficient, ratio = adaptsel.efficiency_check(1.0, 1.0, 10.0)
    assert efficient and math.isclose(ratio, 0.2)

    report = json.loads(adaptsel.select((FIXTURES / "hellaswag_estimates.json").read_text()))
    assert len(report["bands"]) == 3
    assert all(b["chosen"] is not None for b in report["bands"])

    front = adaptsel.pareto_frontier([(1, 0.5), (2, 0.4), (3, 0.7)])
    assert front == [(1, 0.5), (3, 0.7)]
    close(adaptsel.adaptation_gain([(1, 0.5)], [(1, 0.5), (2, 0.6)], 1, 3), 0.1, 1e-12)

    close(adaptsel.crr(0.287, 0.083), 71.08, 0.01)
    close(adaptsel.mae([0.9, 0.8], [0.85, 0.8]), 0.025, 1e-12)

    try:
        adaptsel.crr(0.0, 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("crr with zero full cost should raise")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
