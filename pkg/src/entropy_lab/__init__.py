"""entropy-lab: heat-flow entropy, sharp log-Sobolev, and volume comparison
checks on model manifolds with exact metric data."""

__version__ = "0.1.0"
