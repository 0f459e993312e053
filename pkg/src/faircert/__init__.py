"""faircert: parallel causal-fairness certification of ReLU classifiers."""

__version__ = "0.1.0"
