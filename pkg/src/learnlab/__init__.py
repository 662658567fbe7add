"""Desk-scale learning-analytics pipeline.

Ingests student marks and free-text feedback, keeps them in a raw row store
and columnar frame files, scores feedback sentiment on a 0-4 scale and trains
random-forest regressors with and without the sentiment feature.
"""

__version__ = "0.1.0"
