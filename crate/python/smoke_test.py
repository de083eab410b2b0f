"""Smoke test for the pyelastowave extension module.

Build and install first:
    pip install --no-build-isolation -e crates/python
then run:
    python python/smoke_test.py
"""

import math
import os
import sys
import tempfile

import pyelastowave as ew


def main() -> int:
    names = ew.preset_names()
    assert "strip2d" in names and "loh1" in names, names

    rows = ew.check_operators(6)
    worst = max(max(r[2], r[3], r[4]) for r in rows)
    assert worst < 1e-10, f"operator residual {worst}"
    print(f"check_operators: {len(rows)} rows, worst residual {worst:.3e}")

    text = ew.preset_text("strip2d", elements=4, degree=2, t_end=1.0)
    assert ew.parse_config_text(text) == text

    try:
        ew.parse_config_text("this is not a configuration")
    except ValueError as e:
        print(f"parse error raised as expected: {str(e).splitlines()[0]}")
    else:
        raise AssertionError("malformed configuration was accepted")

    try:
        ew.run_preset("no_such_preset")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown preset was accepted")

    with tempfile.TemporaryDirectory() as out:
        summary = ew.run_preset("strip2d", elements=4, degree=2, t_end=1.0, output_dir=out)
        assert summary["steps"] > 0
        assert all(math.isfinite(v) for _, v in summary["energy"])
        for name, (times, samples) in summary["receivers"].items():
            assert len(times) == len(samples) > 0
            assert os.path.exists(os.path.join(out, "seismograms", f"{name}.csv"))
        assert os.path.exists(os.path.join(out, "energy.csv"))
        print(
            f"run_preset: {summary['steps']} steps, dt = {summary['dt']:.4e} s, "
            f"{len(summary['receivers'])} receivers"
        )

        again = ew.run_config(text)
        assert again["steps"] == summary["steps"]
        assert again["receivers"] == summary["receivers"], "runs are not deterministic"

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
