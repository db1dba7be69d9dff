#!/usr/bin/env python3
"""Smoke test for the jdfe Python extension.

Build the module first:

    cargo build -p jdfe-py --release

then run this script from anywhere inside the repository:

    python3 python/smoke_test.py
"""

import pathlib
import shutil
import sys
import tempfile

REPO = pathlib.Path(__file__).resolve().parent.parent


def import_jdfe():
    candidates = [
        REPO / "target" / "release" / "libjdfe.so",
        REPO / "target" / "debug" / "libjdfe.so",
    ]
    lib = next((p for p in candidates if p.exists()), None)
    if lib is None:
        sys.exit("libjdfe.so not found; run `cargo build -p jdfe-py --release` first")
    stage = pathlib.Path(tempfile.mkdtemp(prefix="jdfe_py_"))
    shutil.copy2(lib, stage / "jdfe.so")
    sys.path.insert(0, str(stage))
    import jdfe

    return jdfe


def main():
    jdfe = import_jdfe()

    # pattern algebra
    assert jdfe.mra_pattern(4) == [0, 1, 4, 6]
    assert jdfe.validate_pattern([0, 1, 4, 6]) == 7
    lags = jdfe.difference_coarray([0, 1, 4, 6])
    assert lags[0] == 4 and sum(lags.values()) == 16
    assert sorted(lags) == list(range(-6, 7))
    try:
        jdfe.validate_pattern([0, 1, 2, 6])
    except ValueError as e:
        assert "lag 3" in str(e)
    else:
        sys.exit("expected ValueError for the non-contiguous pattern")

    # scenario loading and derived quantities
    sc = jdfe.Scenario.from_file(str(REPO / "configs" / "sim1.json"))
    assert sc.k == 6 and sc.m == 4 and sc.l == 400
    assert sc.q() == 7
    assert abs(sc.f_sub_hz - 25e6) < 1e-6
    assert abs(sc.sigma2 - 0.6) < 1e-12
    rate_ok, margin, dof, dof_ok = sc.check_rate("etm")
    assert rate_ok and abs(margin) < 1e-6 and dof == 7 and dof_ok
    omega, phi = sc.unit_phases()[0]
    assert 0 <= omega < 6.2832 and abs(phi) < 3.1416

    # exact-covariance recovery of all six sources
    trial = jdfe.run(sc, mode="etm", analytic=True)
    assert trial.success, (trial.pairs, trial.truth)
    truth_f = [1.22e9, 2.77e9, 4.32e9, 6.54e9, 7.64e9, 8.48e9]
    truth_th = [45.0, 20.0, 0.0, -30.0, 10.0, -20.0]
    for (f_hat, th_hat), f, th in zip(trial.pairs, truth_f, truth_th):
        assert abs(f_hat - f) <= 10e9 / 4096, (f_hat, f)
        assert abs(th_hat - th) <= 0.25, (th_hat, th)

    # plain mode is capped at M-1 sources
    try:
        jdfe.run(sc, mode="plain", analytic=True)
    except RuntimeError as e:
        assert "too large" in str(e)
    else:
        sys.exit("expected RuntimeError for K = 6 in plain mode")

    # pseudo-spectra for plotting: 2 frequency scans, one DOA scan per source
    freq_specs, doa_specs = jdfe.pseudo_spectra(sc, analytic=True)
    assert len(freq_specs) == 2 and len(doa_specs) == 6
    grid, values = freq_specs[0]
    assert len(grid) == len(values) == 4096
    peak_f = grid[max(range(len(values)), key=values.__getitem__)]
    assert any(abs(peak_f - f) < 25e6 for f in truth_f)
    f_hats = [d[0] for d in doa_specs]
    assert f_hats == sorted(f_hats)

    # a small deterministic sweep
    small = jdfe.Scenario.from_json(
        """
        {
          "array": { "f_nyq_hz": 1.0e9 },
          "pattern": [0, 1, 3],
          "L": 8,
          "sources": [
            { "f_hz": 2.2e8, "theta_deg": -15.0, "kind": "complex-sinusoid" },
            { "f_hz": 6.1e8, "theta_deg": 40.0, "kind": "complex-sinusoid" }
          ],
          "snr_db": 20.0,
          "n_snapshots": 512
        }
        """
    )
    rows_a = jdfe.sweep(small, [0.0, 15.0], trials=4, seed=7)
    rows_b = jdfe.sweep(small, [0.0, 15.0], trials=4, seed=7)
    assert rows_a == rows_b
    assert len(rows_a) == 2 and rows_a[0][3] == 4

    print("smoke test ok")


if __name__ == "__main__":
    main()
