"""Two-party sparse logistic regression mixing additive HE and secret sharing."""

__version__ = "0.1.0"
