"""Mixed Gaussian and impulse noise removal for grayscale images."""

__version__ = "0.1.0"

from .image_core import load_pgm, psnr, save_pgm  # noqa: E402
from .noise_synth import NoiseKind, NoiseSpec, corrupt  # noqa: E402
from .solver import SolverConfig, denoise, denoise_full  # noqa: E402

__all__ = [
    "NoiseKind",
    "NoiseSpec",
    "SolverConfig",
    "corrupt",
    "denoise",
    "denoise_full",
    "load_pgm",
    "psnr",
    "save_pgm",
    "__version__",
]
