"""Long-range disordered Hubbard ring: spectra, quench dynamics and fidelity."""

__version__ = "0.1.0"
