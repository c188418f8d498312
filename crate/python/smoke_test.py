#!/usr/bin/env python3
"""Smoke test of the Python bindings.

Builds nothing itself — expects `cargo build -p harmlab-py` (or --release) to
have produced the cdylib; copies it next to a temp directory under the import
name and runs a few end-to-end checks at tiny sizes.

Usage: python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def locate_cdylib() -> Path:
    candidates = [
        ROOT / "target" / "release" / "libharmlab_py.so",
        ROOT / "target" / "debug" / "libharmlab_py.so",
        ROOT / "target" / "release" / "libharmlab_py.dylib",
        ROOT / "target" / "debug" / "libharmlab_py.dylib",
    ]
    for c in candidates:
        if c.exists():
            return c
    raise SystemExit(
        "cdylib not found; run `cargo build -p harmlab-py` first"
    )


def main() -> None:
    lib = locate_cdylib()
    workdir = Path(tempfile.mkdtemp(prefix="harmlab_py_"))
    target = workdir / ("harmlab_py" + (".so" if lib.suffix == ".so" else ".so"))
    shutil.copyfile(lib, target)
    sys.path.insert(0, str(workdir))

    import harmlab_py as hl

    # Counting the first-order unknowns.
    assert hl.unknown_count(3) == 50
    assert hl.unknown_count(2) == 24
    assert hl.unknown_count(1) == 9

    # Grid and mollifier basics.
    grid = hl.Grid(2, 32)
    assert abs(grid.spacing - 2.0 / 32.0) < 1e-15
    assert hl.bump(0.0, 0.4, 0.8) == 1.0
    assert hl.bump(0.9, 0.4, 0.8) == 0.0

    # Profile values.
    profile = hl.Profile()
    assert profile.value(0.0) == 1.0
    expected = 1.0 + 0.001 * math.cos(10.0 ** 0.75)
    assert abs(profile.value(0.1) - expected) < 1e-14
    try:
        profile.second_derivative(0.0)
        raise AssertionError("second derivative at 0 should be undefined")
    except ValueError:
        pass

    # Sobolev norm of the sampled profile is finite and stable-ish.
    n64 = hl.profile_sobolev_norm(profile, 64, 2.0)
    n128 = hl.profile_sobolev_norm(profile, 128, 2.0)
    assert math.isfinite(n64) and math.isfinite(n128)
    assert abs(n128 - n64) / n64 < 0.1

    # Admissible data and a quick flat evolution (fixed point at l = 1).
    flat = hl.build_data(grid, profile, 0.0)
    report = flat.admissibility()
    assert report["passed"] is True
    assert abs(report["lorentz"]["margin"] - 1.0) < 1e-12
    out = hl.evolve(flat, horizon=0.05, steps=4, viscosity=0.02, tol_fix=1e-12)
    assert out["record"]["converged"] is True
    assert out["record"]["iterations"] == 1
    assert out["residual"]["combined"] < 1e-12
    assert all(abs(m - 1.0) < 1e-12 for m in out["signature"]["margins"])

    # Singular data: margin still unit, curvature present.
    data = hl.build_data(grid, profile, 0.05)
    assert data.admissibility()["passed"] is True
    curv = data.scalar_curvature()
    assert max(abs(v) for v in curv) > 1e-3

    # Kernel bound table: collapsed norms are viscosity-uniform.
    table = hl.kernel_bounds([1e-1, 1e-2, 1e-3], 0.1)
    collapsed = [row["deriv_l1_collapsed"] for row in table["rows"]]
    assert max(collapsed) / min(collapsed) < 1.05
    assert table["within_cap"] is True

    # Finite g.a.p. length into the origin-adjacent cell, both conventions.
    gap = hl.gap_length_to_origin(data, horizon=0.05, steps=4, viscosity=0.02)
    assert gap["finite"] is True
    assert gap["root_squares"] > 0.0

    print("smoke test passed:")
    print(f"  grid {grid!r}")
    print(f"  profile H2 norm at N=64: {n64:.4f}")
    print(f"  flat evolution converged at l = {out['record']['iterations']}")
    print(f"  kernel collapsed norms: {[round(c, 4) for c in collapsed]}")
    print(f"  gap lengths: as written {gap['as_written']:.4f}, "
          f"root-of-squares {gap['root_squares']:.4f}")


if __name__ == "__main__":
    main()
