"""Intrusion detection for indoor positioning telemetry with quantum-classical models.

Modules:
    qlinalg      density-matrix primitives
    dqnn         dissipative quantum perceptron networks
    vqc          variational circuit classifier
    mlp          feed-forward classifiers
    fusion       hybrid VQC + MLP model
    telemetry    simulation, windowing and feature extraction
    privacy      feature and sample sanitization
    metrics      confusion matrices and F1 aggregates
    experiments  dataset preparation and benchmark sweeps
    cli          command-line entry point
"""

__version__ = "0.1.0"
