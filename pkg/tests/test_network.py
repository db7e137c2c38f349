import dataclasses
import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdmsim.gaussian import homodyne_variance
from qdmsim.network import (
    QdmConfig,
    SignalKind,
    SignalSpec,
    analytic_report,
    arthurs_kelly_product,
    build_output_state,
    pipeline_signal_transfer,
    qdm_product,
    qdm_product_from_state,
    readout_covariance,
    readout_variances,
    signal_transfer,
    single_mode_bound,
    threshold_r,
)

R6 = 0.6908
VAR_6DB = math.exp(-2 * R6) / 2


def test_vacuum_inputs_give_vacuum_readouts():
    va, vb = readout_variances(QdmConfig(0.0, 0.0, math.pi / 2))
    assert va == pytest.approx(0.5, abs=1e-15)
    assert vb == pytest.approx(0.5, abs=1e-15)


def test_both_detectors_six_db_below_vacuum():
    va, vb = readout_variances(QdmConfig(R6, R6, math.pi / 2))
    assert va == pytest.approx(0.12559, abs=1e-5)
    assert vb == pytest.approx(0.12559, abs=1e-5)
    assert 10 * math.log10(va / 0.5) == pytest.approx(-6.0, abs=1e-3)


def test_equal_path_loss_closed_form():
    # equal loss in both arms commutes with the beam splitters
    cfg = QdmConfig(R6, R6, math.pi / 2, eta_meter=0.9, eta_reference=0.9)
    va, vb = readout_variances(cfg)
    assert va == pytest.approx(0.9 * VAR_6DB + 0.05, rel=1e-12)
    assert va == pytest.approx(0.16303, abs=1e-5)
    assert vb == pytest.approx(va, rel=1e-12)


def test_meter_only_loss_mixes_reference_noise():
    # oracle: A = a(1+s)/2 + b(1-s)/2 + sqrt((1-eta)/2) v with s = sqrt(eta)
    eta = 0.9
    cfg = QdmConfig(R6, R6, math.pi / 2, eta_meter=eta)
    s = math.sqrt(eta)
    var_bx = math.exp(2 * R6) / 2
    expected = (1 + s) ** 2 / 4 * VAR_6DB + (1 - s) ** 2 / 4 * var_bx + (1 - eta) / 4
    assert readout_variances(cfg)[0] == pytest.approx(expected, rel=1e-12)
    # unequal losses correlate the two detectors at generic theta
    assert abs(readout_covariance(QdmConfig(R6, R6, 1.0, eta_meter=eta))[0, 1]) > 1e-3


def test_lossless_readouts_uncorrelated():
    c = readout_covariance(QdmConfig(0.8, 0.4, 1.0))
    assert abs(c[0, 1]) < 1e-14


@pytest.mark.parametrize(
    "r_a,r_b,theta",
    list(itertools.product([0, 0.25, 0.5, 1.0], [0, 0.25, 0.5, 1.0], [0, math.pi / 6, math.pi / 4, math.pi / 2])),
)
def test_structural_equivalence_grid(r_a, r_b, theta):
    va, vb = readout_variances(QdmConfig(r_a, r_b, theta))
    assert abs(va - math.exp(-2 * r_a) / 2) < 1e-10
    assert abs(vb - math.exp(-2 * r_b) / 2) < 1e-10


def test_output_state_is_physical():
    for eta in (1.0, 0.7):
        st_ = build_output_state(QdmConfig(1.0, 0.3, 0.9, eta, 0.8 if eta < 1 else 1.0))
        assert st_.is_physical()


@pytest.mark.parametrize("bad", [
    dict(r_a=-0.1), dict(r_b=math.nan), dict(theta=math.pi), dict(theta=-0.1),
    dict(eta_meter=0.0), dict(eta_reference=1.5),
])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        QdmConfig(**bad)


def test_signal_validation():
    with pytest.raises(ValueError):
        SignalSpec(0.0, 1.0)
    with pytest.raises(ValueError):
        SignalSpec(1e6, -1.0)
    with pytest.raises(ValueError):
        SignalSpec(1e6, 1.0, kind="noise")


def test_science_vanishes_at_orthogonal_readout():
    ga, gb = signal_transfer(QdmConfig(R6, R6, math.pi / 2), SignalSpec(5.55e6, 1.0, 0.0))
    assert ga == pytest.approx(1 / math.sqrt(2))
    assert gb == pytest.approx(0.0, abs=1e-16)


def test_parasitic_grows_at_b():
    ga, gb = signal_transfer(QdmConfig(R6, R6, math.pi / 2), SignalSpec(5.17e6, 1.0, math.pi / 3, "parasitic"))
    assert ga * math.sqrt(2) == pytest.approx(0.5)
    assert gb * math.sqrt(2) == pytest.approx(math.cos(-math.pi / 6))
    assert abs(gb) > abs(ga)


@pytest.mark.parametrize("phi", [0.0, 0.4, 1.2, 2.9])
def test_theta_zero_full_coverage(phi):
    ga, gb = signal_transfer(QdmConfig(0.5, 0.5, 0.0), SignalSpec(1e6, 0.8, phi))
    assert ga == gb


@pytest.mark.parametrize("eta", [1.0, 0.6])
@pytest.mark.parametrize("phi", [0.0, 0.7, math.pi / 2, 2.0])
@pytest.mark.parametrize("theta", [0.0, 0.5, math.pi / 2, 2.5])
def test_signal_transfer_matches_pipeline(phi, theta, eta):
    cfg = QdmConfig(0.4, 0.9, theta, eta_meter=eta)
    sig = SignalSpec(1e6, 1.3, phi)
    ga, gb = signal_transfer(cfg, sig)
    pa, pb = pipeline_signal_transfer(cfg, sig)
    assert pa == pytest.approx(ga, abs=1e-12)
    assert pb == pytest.approx(-gb, abs=1e-12)


@given(st.floats(0, 50), st.floats(-7, 7), st.floats(0, 3.14))
def test_signal_conservation(amp, phi, theta):
    cfg = QdmConfig(0.3, 0.3, theta)
    ga, gb = signal_transfer(cfg, SignalSpec(1e6, amp, phi))
    expected = amp**2 * (math.cos(phi) ** 2 + math.cos(phi - theta) ** 2) / 2
    assert ga**2 + gb**2 == pytest.approx(expected, rel=1e-9, abs=1e-12)


@given(st.floats(0, 50), st.floats(-7, 7))
def test_orthogonal_readout_halves_power(amp, phi):
    ga, gb = signal_transfer(QdmConfig(0.3, 0.3, math.pi / 2), SignalSpec(1e6, amp, phi))
    assert ga**2 + gb**2 == pytest.approx(amp**2 / 2, rel=1e-9, abs=1e-12)


@given(st.floats(0.1, 10), st.floats(-3, 3), st.floats(0, 3.1))
def test_kind_blindness(amp, phi, theta):
    cfg = QdmConfig(0.5, 0.2, theta)
    s = SignalSpec(2e6, amp, phi, SignalKind.SCIENCE)
    p = dataclasses.replace(s, kind=SignalKind.PARASITIC)
    assert signal_transfer(cfg, s) == signal_transfer(cfg, p)
    assert analytic_report(cfg, [s]).signals[0].gain_b == analytic_report(cfg, [p]).signals[0].gain_b


def test_single_mode_bound_values():
    assert single_mode_bound(1, 1) == 0.25
    assert single_mode_bound(2, 1) == 0.0625
    assert single_mode_bound(math.sqrt(2), math.sqrt(2)) == pytest.approx(1 / 16, rel=1e-15)


def test_arthurs_kelly_values():
    assert arthurs_kelly_product(0, 1, 1) == 1.0
    assert arthurs_kelly_product(0, 1, 1) / single_mode_bound(1, 1) == 4.0
    assert arthurs_kelly_product(R6, 1, 1) == pytest.approx((1 + math.cosh(2 * R6)) / 2, rel=1e-15)
    assert arthurs_kelly_product(R6, 1, 1) == pytest.approx(1.5581, abs=1e-4)


def test_arthurs_kelly_minimum_at_vacuum():
    rs = np.arange(0, 2.0001, 0.01)
    vals = [arthurs_kelly_product(r, 1, 1) for r in rs]
    assert int(np.argmin(vals)) == 0


@given(st.floats(0, 5), st.floats(0.1, 10), st.floats(0.1, 10))
def test_arthurs_kelly_ordering(r, X, P):
    assert arthurs_kelly_product(r, X, P) >= arthurs_kelly_product(0, X, P) * (1 - 1e-15)
    assert arthurs_kelly_product(0, X, P) == pytest.approx(4 * single_mode_bound(X, P), rel=1e-14)


def test_qdm_product_values():
    assert qdm_product(QdmConfig(0, 0), 1, 1) == 1.0
    t = threshold_r()
    assert qdm_product(QdmConfig(t, t, math.pi / 2), 1, 1) == pytest.approx(0.25, rel=1e-14)
    assert qdm_product(QdmConfig(0.34657, 0.34657, math.pi / 2), 1, 1) == pytest.approx(0.25, abs=1e-5)
    q = qdm_product(QdmConfig(R6, R6), 1, 1)
    assert q == pytest.approx(math.exp(-2.7632), rel=1e-12)
    assert q == pytest.approx(0.0631, abs=1e-4)
    assert arthurs_kelly_product(0, 1, 1) / q == pytest.approx(15.85, abs=0.01)


@given(st.floats(0, 3), st.floats(0, 3), st.floats(0.01, 1.0))
def test_qdm_product_strictly_decreasing(r_a, r_b, dr):
    base = qdm_product(QdmConfig(r_a, r_b), 1, 1)
    assert qdm_product(QdmConfig(r_a + dr, r_b), 1, 1) < base
    assert qdm_product(QdmConfig(r_a, r_b + dr), 1, 1) < base


@pytest.mark.parametrize("r_a,r_b,theta", [(0.0, 0.0, 0.3), (0.3, 0.7, 1.0), (1.0, 0.25, math.pi / 2)])
def test_qdm_product_from_state_matches_closed_form(r_a, r_b, theta):
    cfg = QdmConfig(r_a, r_b, theta)
    assert qdm_product_from_state(cfg, 0.8, 1.7) == pytest.approx(qdm_product(cfg, 0.8, 1.7), rel=1e-12)


def test_threshold():
    t = threshold_r()
    assert round(t, 4) == 0.3466
    assert t == math.log(2) / 2
    assert math.exp(-4 * t) == pytest.approx(0.25, rel=1e-15)
    assert 10 * math.log10(math.exp(2 * t)) == pytest.approx(3.0103, abs=1e-4)


def test_analytic_report_labels():
    rep = analytic_report(QdmConfig(R6, R6, math.pi / 2))
    assert rep.bound_label == "below_heisenberg"
    assert rep.signal_x_theta == pytest.approx(1.0)
    assert analytic_report(QdmConfig(0.2, 0.2, math.pi / 2)).bound_label == "below_arthurs_kelly"
    assert analytic_report(QdmConfig(0, 0, math.pi / 2)).bound_label == "classical"


def test_readout_mode_b_variance_at_theta():
    cfg = QdmConfig(0.2, 0.9, 0.6)
    st_ = build_output_state(cfg)
    assert homodyne_variance(st_, 1, 0.6) == pytest.approx(math.exp(-1.8) / 2, rel=1e-12)
    assert homodyne_variance(st_, 0, 0.0) == pytest.approx(math.exp(-0.4) / 2, rel=1e-12)
