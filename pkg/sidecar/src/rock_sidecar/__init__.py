"""Reference model server implementing the rock wire protocol with real language models."""

__version__ = "0.1.0"
