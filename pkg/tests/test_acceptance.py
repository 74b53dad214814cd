"""Acceptance criteria, one test each, at their stated tolerances.

Every test prints a single PASS/FAIL line (bypassing output capture) before
asserting. Run just this file with::

    pytest tests/test_acceptance.py -v

The disk, five-ball and tube runs take several minutes in total.
"""

import itertools
import time
from functools import lru_cache

import numpy as np
import pytest

from chspectral import cli
from chspectral.config import BLOB_BALLS, config_from_dict, get_preset
from chspectral.diagnostics import (
    component_volumes,
    connected_components,
    energy,
    interface_radius,
    order_estimate,
    overshoot,
    volume6G,
)
from chspectral.init import Ball, Blob, phase_from_shape
from chspectral.io import read_csv
from chspectral.models import ModelParams, initial_state, make_stepper
from chspectral.spectral import GridSpec, forward, gradient, laplacian

import oracles


def report(capsys, ident, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'}  criterion {ident}: {detail}")
    assert ok, detail


def _run_preset(name, out, schedule=None):
    doc = get_preset(name).document()
    doc["output"] = {"dir": str(out), "formats": ["csv"]}
    if schedule is not None:
        doc["schedule"] = schedule
    res = cli.run(config_from_dict(doc))
    return res, read_csv(out / "diagnostics.csv")


# -- 1 ---------------------------------------------------------------------

def test_c01_constants(capsys):
    t0 = time.perf_counter()
    rc = cli.main(["-q", "constants", "--mobility", "quartic"])
    elapsed = time.perf_counter() - t0
    table = dict(line.split() for line in capsys.readouterr().out.strip().splitlines())
    c_w, c_m = float(table["c_W"]), float(table["c_M"])
    ok = rc == 0 and abs(c_w - 1 / 6) <= 1e-8 and abs(c_m - 1 / 6) <= 1e-8 and elapsed < 1.0
    report(capsys, 1, ok, f"c_W={c_w:.15g} c_M={c_m:.15g} (target 1/6, tol 1e-8), {elapsed:.3f} s (< 1 s)")


# -- 2 ---------------------------------------------------------------------

def test_c02_spectral_oracle(capsys):
    t0 = time.perf_counter()
    sizes = range(4, 17, 2)
    worst = 0.0
    count = 0
    rng = np.random.default_rng(0)
    for shape in itertools.chain(itertools.product(sizes, repeat=2), itertools.product(sizes, repeat=3)):
        lengths = tuple(1.0 + 0.25 * i for i in range(len(shape)))
        g = GridSpec(shape, lengths)
        f = rng.standard_normal(shape)
        pairs = [(forward(g, f), oracles.direct_dft(f)), (laplacian(g, f), oracles.direct_laplacian(f, lengths))]
        pairs += list(zip(gradient(g, f), oracles.direct_gradient(f, lengths)))
        for got, ref in pairs:
            worst = max(worst, np.abs(got - ref).max() / max(1.0, np.abs(ref).max()))
        count += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 10
    report(capsys, 2, ok, f"{count} grids, worst scaled error {worst:.2e} (tol 1e-12), {elapsed:.2f} s (< 10 s)")


# -- 3 and 4 ---------------------------------------------------------------

@lru_cache(maxsize=None)
def _blob_run(model):
    n = 128
    g = GridSpec.cube(n)
    eps = 2 / n
    p = ModelParams(model, epsilon=eps, dt=eps ** 4)
    blob = Blob(tuple(Ball(c, r) for c, r in BLOB_BALLS), 0.05)
    state = initial_state(g, phase_from_shape(blob, g, eps), p)
    stepper = make_stepper(p, g)
    t0 = time.perf_counter()
    energies = [energy(g, state.u, eps)]
    means = [state.u.mean()]
    for _ in range(500):
        state = stepper(state)
        energies.append(energy(g, state.u, eps))
        means.append(state.u.mean())
    return np.array(energies), np.array(means), time.perf_counter() - t0


@pytest.mark.parametrize("model", ["cch", "mch", "nmn"])
def test_c03_energy_dissipation(capsys, model):
    e, _, elapsed = _blob_run(model)
    rel = np.max(np.diff(e) / np.abs(e[:-1]))
    ok = rel <= 1e-10 and elapsed < 120
    report(capsys, f"3 ({model})", ok,
           f"max relative energy increase {rel:.3e} over 500 steps (tol 1e-10), E {e[0]:.6g} -> {e[-1]:.6g}, "
           f"{elapsed:.1f} s (< 120 s)")


@pytest.mark.parametrize("model", ["cch", "mch"])
def test_c04_mean_conservation(capsys, model):
    _, means, _ = _blob_run(model)
    drift = np.abs(means - means[0]).max()
    report(capsys, f"4 ({model})", drift <= 1e-12, f"max mean drift {drift:.3e} over 500 steps (tol 1e-12)")


# -- 5 and 6 ---------------------------------------------------------------

# end time in units of coarse steps: the overshoot only settles after a few hundred
COARSE_STEPS = 600
T_END = COARSE_STEPS * (2 / 128) ** 4


@lru_cache(maxsize=None)
def _disk_run(model, n):
    g = GridSpec.cube(n)
    eps = 2 / n
    p = ModelParams(model, epsilon=eps, dt=eps ** 4)
    state = initial_state(g, phase_from_shape(Ball((0.5, 0.5), 0.2), g, eps), p)
    v0 = volume6G(g, state.u)
    t0 = time.perf_counter()
    state = make_stepper(p, g).run(state, int(round(T_END / p.dt)))
    return overshoot(state.u), abs(volume6G(g, state.u) - v0), time.perf_counter() - t0


@pytest.mark.parametrize("model, lo, hi", [("nmn", 2.8, 5.7), ("mch", 1.4, 2.8)])
def test_c05_profile_order(capsys, model, lo, hi):
    coarse, _, t1 = _disk_run(model, 128)
    fine, _, t2 = _disk_run(model, 256)
    ratio = coarse / fine
    report(capsys, f"5 ({model})", lo <= ratio <= hi,
           f"overshoot {coarse:.4e} (eps=2/128) / {fine:.4e} (eps=1/128) = {ratio:.3f}, "
           f"target [{lo}, {hi}]; runs took {t1 + t2:.0f} s")


def test_c06_volume_order(capsys):
    _, dv_nmn_c, _ = _disk_run("nmn", 128)
    _, dv_nmn_f, _ = _disk_run("nmn", 256)
    _, dv_mch_c, _ = _disk_run("mch", 128)
    _, dv_mch_f, _ = _disk_run("mch", 256)
    p_nmn = order_estimate(dv_nmn_c, dv_nmn_f, 2 / 128, 1 / 128)
    p_mch = order_estimate(dv_mch_c, dv_mch_f, 2 / 128, 1 / 128)
    total = sum(_disk_run(m, n)[2] for m in ("nmn", "mch") for n in (128, 256))
    ok = 1.5 <= p_nmn <= 2.5 and p_mch < 1.5 and total < 600
    report(capsys, 6, ok, f"volume drift order NMN {p_nmn:.3f} (target [1.5, 2.5]), M-CH {p_mch:.3f} "
                          f"(target < 1.5); all disk runs {total:.0f} s (< 600 s)")


# -- 7 ---------------------------------------------------------------------

def test_c07_stationary_disk(capsys):
    n = 256
    g = GridSpec.cube(n)
    eps = 2 / n
    p = ModelParams("nmn", epsilon=eps, dt=eps ** 4)
    state = initial_state(g, phase_from_shape(Ball((0.5, 0.5), 0.2), g, eps), p)
    r0 = interface_radius(g, state.u)
    stepper = make_stepper(p, g)
    worst = 0.0
    for _ in range(20):
        state = stepper.run(state, 100)
        worst = max(worst, abs(interface_radius(g, state.u) - r0) / r0)
    report(capsys, 7, worst < 0.01, f"max relative radius drift {worst:.3e} over 2000 steps (tol 1e-2), r0={r0:.5f}")


# -- 8 ---------------------------------------------------------------------

def test_c08_local_mass(capsys, tmp_path):
    res_n, _ = _run_preset("fiveballs2d-nmn", tmp_path / "nmn")
    res_c, _ = _run_preset("fiveballs2d-cch", tmp_path / "cch")
    cfg = config_from_dict(get_preset("fiveballs2d-nmn").document())
    u0 = phase_from_shape(cfg.init.shape, cfg.grid, cfg.params.epsilon)
    v0 = component_volumes(cfg.grid, u0)
    v1 = component_volumes(cfg.grid, res_n.state.u)
    n_nmn = len(v1)
    n_cch = connected_components(res_c.state.u)
    ratios = v1 / v0 if n_nmn == len(v0) else np.array([np.nan])
    ok = res_n.status == 0 and res_c.status == 0 and n_nmn == 5 and np.all(np.abs(ratios - 1) <= 0.1) and n_cch < 5
    report(capsys, 8, ok,
           f"NMN components {n_nmn} (want 5), volume ratios {np.round(ratios, 3).tolist()} (within 10%); "
           f"C-CH components {n_cch} (want < 5); step {res_n.state.step}")


# -- 9 ---------------------------------------------------------------------

def test_c09_thin_tube(capsys, tmp_path):
    t0 = time.perf_counter()
    res_c, rows_c = _run_preset("tube3d-cch", tmp_path / "cch")
    res_n, rows_n = _run_preset("tube3d-nmn", tmp_path / "nmn")
    elapsed = time.perf_counter() - t0
    frac_c = rows_c[-1]["volume"] / rows_c[0]["volume"]
    frac_n = rows_n[-1]["volume"] / rows_n[0]["volume"]
    comps = connected_components(res_n.state.u)
    ok = res_c.status == 0 and res_n.status == 0 and frac_c < 0.1 and frac_n > 0.6 and comps >= 1 \
        and elapsed < 1800
    report(capsys, 9, ok,
           f"C-CH volume fraction {frac_c:.4f} (< 0.1), NMN {frac_n:.4f} (> 0.6) with {comps} component(s), "
           f"128^3, {res_n.state.step} steps, {elapsed:.0f} s (< 1800 s)")


# -- 10 --------------------------------------------------------------------

def test_c10_determinism(capsys, tmp_path):
    blobs = []
    for tag in ("a", "b"):
        res, _ = _run_preset("blob2d-nmn", tmp_path / tag, schedule={"steps": 300, "diag_every": 10})
        assert res.status == 0
        blobs.append((tmp_path / tag / "diagnostics.csv").read_bytes())
    report(capsys, 10, blobs[0] == blobs[1], f"two identical blob2d-nmn runs, CSV of {len(blobs[0])} bytes identical")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
