"""Group-fairness auditing, explanation, and ensemble-based resolution for
entity matching."""

__version__ = "0.1.0"
