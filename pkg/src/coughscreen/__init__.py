"""Cough + context screening pipeline.

Core stages: WAV ingest and log-mel featurization, training-time
augmentation, cohort splitting and context encoding, desk-scale neural
classifiers, individual-level inference and ensembling, AUC evaluation
with symptomatic/asymptomatic breakdown, saliency and local surrogate
explanations, and an HTTP scoring service.
"""

__version__ = "0.1.0"
