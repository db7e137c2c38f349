"""Simulation and analysis toolkit for quantum-dense metrology."""

from .gaussian import (
    GaussianState,
    SymplecticOp,
    beamsplitter,
    compose,
    displace,
    homodyne_mean,
    homodyne_variance,
    loss_channel,
    phase_rotation,
    squeezer,
    vacuum,
)
from .network import (
    AnalyticReport,
    QdmConfig,
    SignalKind,
    SignalSpec,
    arthurs_kelly_product,
    build_output_state,
    qdm_product,
    signal_transfer,
    single_mode_bound,
    threshold_r,
)
from .synth import AcquisitionConfig, DetectorRecord, Spectrum, estimate_psd, sample_joint_noise, synthesize
from .veto import (
    Classification,
    DetectionParams,
    VetoReport,
    classify_peaks,
    expected_projection,
    infer_parasitic_angle,
)

__version__ = "0.1.0"
