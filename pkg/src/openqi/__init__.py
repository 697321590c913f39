"""Open two-mode interferometer: Lindblad dynamics, QFI scaling, extensivity."""

__version__ = "0.1.0"
