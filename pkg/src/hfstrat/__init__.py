"""Domain-segregated stacking ensemble for heart-failure risk stratification."""

__version__ = "0.1.0"
