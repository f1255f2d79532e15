"""Collaborative cosmic-ray e-lab.

A self-contained platform for student cosmic-ray investigations: a virtual
data workflow core (recipes, catalog, provenance, local planner/executor),
the shipped analyses (muon lifetime, flux, shower coincidence), and an HTTP
collaboration service with a browser portal.
"""

__version__ = "0.1.0"
