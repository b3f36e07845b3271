"""Portrait relighting toolkit: lat-long environments, prefiltered light maps,
coarse relighting, OLAT checks, SH lighting recovery and evaluation metrics."""

__version__ = "0.1.0"
