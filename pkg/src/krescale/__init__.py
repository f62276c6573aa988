"""krescale: training-free rescaling of convolution kernels and network
weights for larger inputs, with exact spectral verification tooling.

The core fact: supersampling a band-limited grid by integer factors (a, b)
scales every matched DFT bin by a*b, so a kernel interpolated to the finer
grid must be attenuated by 1/(a*b) to reproduce the base network's responses
(dilation needs no attenuation; its zeros already discard that share).  The
library grows kernels and whole models accordingly and verifies the
underlying identities by brute force at small sizes.
"""

from ._backend import backend_name
from .convolve import (
    ConvConfig,
    CosineField,
    EquivReport,
    build_field_tensor,
    circular_conv3d,
    circular_conv3d_spectral,
    conv3d_direct,
    conv3d_scaled,
    supersample_field,
    verify_conv_equivalence,
)
from .errors import KrescaleError
from .resample import (
    INTERP_METHODS,
    METHODS,
    KernelStack,
    Scale,
    dilate2d,
    interp2d,
    padding_for,
    rescale_kernel,
    resample_matrix,
    target_size,
)
from .spectral import (
    CosineSpec,
    SpectrumReport,
    VerifyReport,
    amplitude_at,
    average_spectrum_report,
    cosine_wave,
    dft3,
    export_spectrum,
    matched_bin_value,
    spectrum_report,
    verify_attenuation,
    verify_ratio,
)
from .suites import (
    CONV_CONFIGS,
    SuiteResult,
    run_attenuation_suite,
    run_conv_suite,
    run_ratio_suite,
)
from .surgery import (
    AgreementReport,
    LayerSpec,
    ModelSpec,
    SurgeryPlan,
    forward,
    format_manifest,
    logit_agreement,
    parse_manifest,
    supersample_model,
    synth_dataset,
    upsample_input,
    validate_model,
)
from .tensor import (
    ComplexGrid,
    Tensor,
    archive_read,
    archive_read_path,
    archive_write,
    archive_write_path,
    tensor_new,
)

__version__ = "0.1.0"
