"""Signal and PA-distortion radiation patterns of LoS distributed MIMO downlinks.

The analytic engine predicts the received PSD (useful signal plus polynomial PA
distortion) anywhere around matched-filter precoded arrays. A time-domain Monte
Carlo simulator checks it independently.
"""
from .engine import (
    ObserverPsd,
    Scenario,
    directivity_distortion3,
    directivity_signal,
    distortion3_psd_multi,
    enumerate_im_directions,
    expected_im_count,
    psd_at_frequency,
    received_psd_general,
    received_psd_single_user,
    signal_psd_multi,
    spatial_gain_single_user,
)
from .errors import (
    AliasingError,
    BeamspotError,
    DegenerateGeometryError,
    DomainError,
    GridError,
    ModelConsistencyError,
    UnsupportedOrderError,
)
from .geometry import ArrayDescriptor, CarrierConfig, LinkParams, Location, compute_link, compute_links
from .gridsweep import CellSpec, FocusingMap, peak_report, sweep, uniformity_metric
from .pa import PaPolynomial, map_correlation, output_corr_coeffs
from .precoder import User, UserSet, mf_weights
from .signals import PulseSpec, raised_cosine_spectrum

__version__ = "0.1.0"
