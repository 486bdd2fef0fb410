"""Statistical and analytic verification of both protocols."""
