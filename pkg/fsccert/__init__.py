"""Certified finite-horizon directed-information values for rational unifilar channels."""
