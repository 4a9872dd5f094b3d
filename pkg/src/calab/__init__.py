"""Laboratory for one-dimensional cellular automata under the uniform measure."""

__version__ = "0.1.0"
