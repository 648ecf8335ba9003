"""Export masked-diffusion model denoising runs into the stdec trace format."""

from .errors import SessionError
from .export import (
    ExportSession,
    argmax_confidence,
    export_prompt_file,
    export_trace,
    tokenize_prompt,
)
from .model import ToyMaskedLM, load_model, parse_model_id

__version__ = "0.1.0"

__all__ = [
    "ExportSession",
    "SessionError",
    "ToyMaskedLM",
    "argmax_confidence",
    "export_prompt_file",
    "export_trace",
    "load_model",
    "parse_model_id",
    "tokenize_prompt",
    "__version__",
]
