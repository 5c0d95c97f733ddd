"""Content-based image retrieval with directional binary codes, Haar
sub-bands and oriented-gradient histograms."""

__version__ = "0.1.0"
