"""Loewner evolution on the unit ball of C^n and Pontryagin-type necessary conditions."""
