"""Cosmic-ray detector data handling and the shipped analyses."""
