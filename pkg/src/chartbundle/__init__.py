"""Multi-chart autoencoder atlases and sign-cocycle orientability detection."""

__version__ = "0.1.0"
