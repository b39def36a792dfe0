"""Builds the extension, imports it and checks it against NumPy.

Run from the repository root: python3 python/smoke_test.py
"""

import importlib.util
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    subprocess.run(["cargo", "build", "--release", "-p", "rasdi-py"], cwd=ROOT, check=True)
    built = ROOT / "target" / "release" / "libpyrasdi.so"
    tmp = pathlib.Path(tempfile.mkdtemp())
    target = tmp / "pyrasdi.so"
    shutil.copy(built, target)
    spec = importlib.util.spec_from_file_location("pyrasdi", target)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def main():
    m = load()
    assert "ex1" in m.circuits()
    names = m.variables("ex1")
    assert names[:2] == ["i1", "i3"], names

    # Analytic operator against its closed-form radius and a NumPy spectrum.
    op = m.interface_operator("ex1", 1e-3)
    p = np.array(op["matrix"])
    rho_np = max(abs(np.linalg.eigvals(p)))
    assert math.isclose(op["rho"], rho_np, rel_tol=1e-12)
    assert math.isclose(op["rho"], m.closed_form_rho(1e-3, 0.4, 1e-6, 2e-3), rel_tol=1e-10)
    assert op["classification"] == "converges"
    dt0 = m.threshold_dt(0.4, 1e-6, 2e-3)
    assert math.isclose(m.closed_form_rho(dt0, 0.4, 1e-6, 2e-3), 1.0, rel_tol=1e-12)
    assert m.threshold_dt(0.5, 1e-6, 2e-3, l2=0.7) is None

    # A divergent splitting still reproduces the reference solve.
    run = m.accelerated("ex2", 4.5e-4, 0.02)
    t, ref = m.monolithic("ex2", 4.5e-4, 0.02)
    assert len(run["times"]) == len(t)
    diff = np.max(np.abs(np.array(run["states"]) - np.array(ref)))
    assert diff < 1e-8 and math.isclose(diff, run["max_error_vs_monolithic"], rel_tol=1e-9, abs_tol=1e-15)
    piped = m.accelerated("ex2", 4.5e-4, 0.02, strategy="pipelined", window=4)
    assert piped["max_error_vs_monolithic"] < 1e-8

    for bad in (lambda: m.monolithic("nosuch", 1e-3, 0.01), lambda: m.accelerated("ex1", 1e-3, 0.01, strategy="x")):
        try:
            bad()
        except (m.RasdiError, ValueError):
            pass
        else:
            raise AssertionError("expected an error")

    print(f"pyrasdi smoke test ok: rho(ex1, 1ms) = {op['rho']:.6f}, ex2 accelerated error = {diff:.2e}")


if __name__ == "__main__":
    sys.exit(main())
