"""Left-invariant metrics on the pseudo-homothetic Lie group: normal forms,
geodesic fields, completeness verdicts and Kundt structures."""

__version__ = "0.1.0"
