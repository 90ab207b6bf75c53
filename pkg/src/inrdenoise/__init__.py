"""Single-image denoising with coordinate networks and supervision substitution."""

__version__ = "0.1.0"
