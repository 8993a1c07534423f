"""quelab: p-adic local integrals and quaternionic graph experiments."""

__version__ = "0.1.0"
