"""animforge: turns a short narrative into a validated director's script,
scene images, and a spliced animation by coordinating pluggable
generative providers with metric-driven curation and self-reflection."""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
__all__ = ["KERNEL_BACKEND", "__version__"]
