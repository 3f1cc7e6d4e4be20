"""sanlab: operator norms of cyclic convolution layers, loose Fourier-peak
normalization of GAN critics, and a desk-scale experiment harness."""

from .compensation import (
    SubsetPlan,
    compensation_factor,
    harmonic_expected_max,
    mc_expected_max,
    sample_filter_subset,
)
from .normalizer import NormalizationPolicy, apply_normalization, layer_norm_constant
from .operator_norms import (
    NormEstimate,
    SizeGuardError,
    dense_spectral_norm,
    exact_conv_spectral_norm,
    kernel_fourier_max,
    reshape_spectral_norm,
    san_norm,
    san_subset_norm,
)
from .tensor_core import (
    ComplexSpectrum,
    DimensionError,
    KernelBank,
    MultiChannelSignal,
    channel_norms,
    channel_sup_norm,
    channel_support_count,
    cyclic_conv2,
    fft2,
    ifft2,
    load_sant,
    mimo_conv,
    naive_dft2,
    save_sant,
)

__version__ = "0.1.0"
