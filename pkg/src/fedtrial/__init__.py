"""Federated versus single-site training of treatment-failure classifiers on synthetic EHR cohorts."""

__version__ = "0.1.0"
