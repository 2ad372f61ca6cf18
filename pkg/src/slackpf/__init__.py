"""Phase-field fracture with slack-variable irreversibility."""

__version__ = "0.1.0"
