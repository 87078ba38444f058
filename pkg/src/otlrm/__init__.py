"""Low-rank tensor recovery with learnable Householder-orthogonal transforms."""
from .errors import (DegenerateParameterError, DimensionError, FormatError, IngestionError,
                     NumericError, PreconditionError, UnsupportedOpError)
from .kernels import backend
from .model import OtlrmModel, fit, init_model, init_params, reconstruct
from .ortho import OrthoTransform, build_matrix, decompose_orthogonal

__version__ = "0.1.0"
