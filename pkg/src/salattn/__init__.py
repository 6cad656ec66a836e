"""Recurrent-attention salient object segmentation at desk scale."""

__version__ = "0.1.0"
