"""mecshield: deterministic simulator for edge-based cooperative DDoS
filtering with self-organizing-map traffic classifiers."""

__version__ = "0.1.0"
