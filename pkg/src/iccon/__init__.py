"""Information-centric WiFi AP selection: workload, caches, matching,
churn/per-request simulation and Che's-approximation analysis."""

__version__ = "0.1.0"
