"""Acceptance suite: one PASS/FAIL line per criterion (shown in the pytest summary)."""

import math
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from qdmsim.cli import main
from qdmsim.config import FIG3_R, PARASITIC_HZ, SCIENCE_HZ, preset
from qdmsim.gaussian import homodyne_variance, quadrature_vector
from qdmsim.network import (
    QdmConfig,
    SignalSpec,
    arthurs_kelly_product,
    build_output_state,
    qdm_product,
    readout_variances,
    single_mode_bound,
    threshold_r,
)
from qdmsim.synth import AcquisitionConfig, amplitude_for_excess, estimate_psd, synthesize
from qdmsim.veto import Classification, bin_variance, classify_peaks, excess_db, expected_projection

R_GRID = np.round(np.arange(0.0, 2.0 + 1e-9, 0.01), 10)
THETA_GRID = np.linspace(0.0, math.pi, 13)[:-1]


def _spectra(cfg):
    a, b = synthesize(cfg.qdm, list(cfg.signals), cfg.acquisition)
    return estimate_psd(a), estimate_psd(b)


def _lin(db):
    return 10.0 ** (db / 10.0)


def test_criterion_1_threshold(criterion):
    t0 = time.perf_counter()
    t = threshold_r()
    dt = time.perf_counter() - t0
    ok = f"{t:.4f}" == "0.3466" and dt < 1.0
    assert criterion(1, ok, f"threshold_r = {t:.6f} (rounds to {t:.4f}), {dt * 1e3:.3f} ms")


def test_criterion_2_arthurs_kelly(criterion):
    ratio = arthurs_kelly_product(0, 1, 1) / single_mode_bound(1, 1)
    vals = np.array([arthurs_kelly_product(r, 1, 1) for r in R_GRID])
    argmin = R_GRID[int(np.argmin(vals))]
    ok = ratio == 4.0 and argmin == 0.0 and np.all(vals[1:] > vals[0])
    assert criterion(2, ok, f"ratio = {ratio!r}, argmin over [0, 2] at r = {argmin}")


def test_criterion_3_qdm_product(criterion):
    err = max(abs(qdm_product(QdmConfig(r, r, math.pi / 2), 1, 1) - math.exp(-4 * r)) for r in R_GRID)
    assert criterion(3, err <= 1e-12, f"max |qdm_product - e^(-4r)| = {err:.2e} over {R_GRID.size} r values")


def test_criterion_4_structural_oracle(criterion):
    coarse = np.round(np.arange(0.0, 2.0 + 1e-9, 0.1), 10)
    worst = 0.0
    n = 0
    for r_a in coarse:
        for r_b in coarse:
            for theta in THETA_GRID:
                va, vb = readout_variances(QdmConfig(r_a, r_b, theta))
                worst = max(worst, abs(va - math.exp(-2 * r_a) / 2), abs(vb - math.exp(-2 * r_b) / 2))
                n += 1
    assert criterion(4, worst <= 1e-10, f"max deviation {worst:.2e} over {n} (r_a, r_b, theta) points")


def test_criterion_5_monte_carlo(criterion):
    t0 = time.perf_counter()
    n = 1_000_000
    rng = np.random.default_rng(2024)
    configs = [
        QdmConfig(FIG3_R, FIG3_R, math.pi / 2),
        QdmConfig(0.3, 1.0, 1.1, eta_meter=0.8, eta_reference=0.9),
    ]
    worst, checks = 0.0, 0
    for cfg in configs:
        state = build_output_state(cfg)
        samples = state.sample(n, rng)
        for mode in (0, 1):
            for angle in THETA_GRID:
                u = quadrature_vector(2, mode, angle)
                emp = np.var(samples @ u, ddof=1)
                ana = homodyne_variance(state, mode, angle)
                worst = max(worst, abs(emp - ana) / (ana * math.sqrt(2.0 / (n - 1))))
                checks += 1
    dt = time.perf_counter() - t0
    ok = worst < 3.0 and dt < 30.0
    assert criterion(5, ok, f"{checks} projections, worst |z| = {worst:.2f} standard errors, {dt:.1f} s")


def test_criterion_6_fig3(criterion):
    t0 = time.perf_counter()
    cfg = preset("fig3")
    sa, sb = _spectra(cfg)
    rep = classify_peaks(sa, sb, cfg.qdm.theta, cfg.detection)
    dt = time.perf_counter() - t0
    # floor: mean over the analysis band with 25 bins either side of every peak masked
    n_bins = sa.frequencies.size
    keep = np.zeros(n_bins, bool)
    keep[int(0.05 * n_bins) : int(0.95 * n_bins)] = True
    for p in rep.peaks:
        i = sa.index_of(p.frequency)
        keep[max(i - 25, 0) : i + 26] = False
    floor_a = 10 * math.log10(np.mean(sa.power_linear[keep]))
    floor_b = 10 * math.log10(np.mean(sb.power_linear[keep]))

    sci = rep.nearest(SCIENCE_HZ)
    fb = _lin(sci.floor_b_db)
    # conservative: B's excess is bounded above by its observed value plus two standard errors
    b_upper = max(_lin(sci.power_b_db) - fb, 0.0) + 2.0 * math.sqrt(bin_variance(fb, fb, sb.effective_averages))
    suppression = excess_db(sci.power_a_db, sci.floor_a_db) - 10 * math.log10(b_upper)

    par = rep.nearest(PARASITIC_HZ)
    ratio = excess_db(par.power_b_db, par.floor_b_db) - excess_db(par.power_a_db, par.floor_a_db)
    target = 20 * math.log10(math.cos(math.radians(30)) / math.cos(math.radians(60)))

    ok = (
        abs(floor_a + 6) <= 0.3 and abs(floor_b + 6) <= 0.3
        and suppression >= 20.0
        and abs(ratio - target) <= 0.5
        and sa.n_averages >= 300
        and dt < 60.0
    )
    detail = (
        f"floors {floor_a:+.2f}/{floor_b:+.2f} dB, science suppression >= {suppression:.1f} dB, "
        f"parasitic B/A {ratio:.2f} dB (target {target:.2f}), {sa.n_averages} averages, {dt:.1f} s"
    )
    assert criterion(6, ok, detail)


def test_criterion_7_detuned(criterion):
    cfg = preset("fig3-detuned")
    assert abs(math.degrees(cfg.qdm.theta) - 75.0) < 1e-9
    sa, sb = _spectra(cfg)
    rep = classify_peaks(sa, sb, cfg.qdm.theta, cfg.detection)
    sci = rep.nearest(SCIENCE_HZ)
    exp_b = expected_projection(sci.power_a_db, sci.floor_a_db, sci.floor_b_db, cfg.qdm.theta)
    dev = excess_db(sci.power_b_db, sci.floor_b_db) - excess_db(exp_b, sci.floor_b_db)
    par = rep.nearest(PARASITIC_HZ)
    ok = abs(dev) <= 0.5 and abs(par.significance) > 3.0 and par.classification == Classification.PARASITIC
    detail = f"science B excess off projection by {dev:+.2f} dB, parasitic residual {par.significance:.1f} sigma"
    assert criterion(7, ok, detail)


def _roc_trial(i: int) -> tuple[bool, bool]:
    rng = np.random.default_rng(10_000 + i)
    phi = math.radians(10 * (1 + i % 17))
    acq = AcquisitionConfig(seed=20_000 + i)
    qdm = QdmConfig(FIG3_R, FIG3_R, math.pi / 2)
    floor = math.exp(-2 * FIG3_R)

    def amp(snr_db):
        # SNR_A: excess at A, in floor units, for a signal aligned with A's quadrature
        return amplitude_for_excess(10 ** (snr_db / 10) * floor, acq) * math.sqrt(2.0)

    signals = [
        SignalSpec(SCIENCE_HZ, amp(rng.uniform(10, 20)), 0.0, "science", rng.uniform(0, 2 * math.pi)),
        SignalSpec(PARASITIC_HZ, amp(rng.uniform(10, 20)), phi, "parasitic", rng.uniform(0, 2 * math.pi)),
    ]
    a, b = synthesize(qdm, signals, acq)
    rep = classify_peaks(estimate_psd(a), estimate_psd(b), qdm.theta)

    def hit(f, cls):
        p = rep.nearest(f)
        return p is not None and abs(p.frequency - f) < 1.0 and p.classification == cls

    return hit(PARASITIC_HZ, Classification.PARASITIC), hit(SCIENCE_HZ, Classification.SCIENCE)


def test_criterion_8_roc(criterion):
    t0 = time.perf_counter()
    n = 200
    with ProcessPoolExecutor() as pool:
        results = list(pool.map(_roc_trial, range(n)))
    dt = time.perf_counter() - t0
    detect = sum(r[0] for r in results) / n
    passthrough = sum(r[1] for r in results) / n
    ok = detect >= 0.99 and passthrough >= 0.99 and dt < 300
    detail = (
        f"{n} trials at theta = 90 deg, phi 10..170 deg: parasitic detection {detect:.1%}, "
        f"science pass-through {passthrough:.1%}, {dt:.1f} s"
    )
    assert criterion(8, ok, detail)


def test_criterion_9_determinism(criterion, tmp_path):
    runs = []
    for name in ("run1", "run2"):
        out = tmp_path / name
        assert main(["simulate", "--preset", "fig3", "--no-records", "--out", str(out)]) == 0
        runs.append({f: (out / f).read_bytes() for f in ("spectrum_a.csv", "spectrum_b.csv")})
    ok = runs[0] == runs[1]
    size = sum(len(v) for v in runs[0].values())
    assert criterion(9, ok, f"two runs, {size} CSV bytes, identical: {ok}")
