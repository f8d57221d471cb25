"""Figure scripts for the committor/TPT pipeline's CSV/JSON artifacts."""

__version__ = "0.1.0"
