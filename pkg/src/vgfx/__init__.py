"""Monte Carlo pricing of FX options under a Heston-CIR model with variance-gamma noise."""
__version__ = "0.1.0"
