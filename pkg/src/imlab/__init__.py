"""Numerical laboratory for the resource theory of imaginarity."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    ImlabError,
    InvalidInputError,
    InvalidStateError,
    ResourceLimitError,
    ShapeError,
)
from .imaginarity import (  # noqa: E402
    imag_distance,
    is_covariant_unitary,
    is_real_operation,
    is_real_state,
    re_im_parts,
    rei,
    rei_sequence,
    skew_canonical_form,
    theta,
    transpose_ref,
)
from .matcore import (  # noqa: E402
    Seed,
    haar_orthogonal,
    partial_trace,
    purify,
    random_density,
    relative_entropy,
    tensor_power,
    trace_norm,
    von_neumann_entropy,
)
