"""Radiomics feature stability under segmentation variability."""

__version__ = "0.1.0"
