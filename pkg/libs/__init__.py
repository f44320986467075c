# libs/__init__.py
"""Epistemic structures, bisimulation, Cayley coverings, dual hypergraphs and the upgrading game."""
