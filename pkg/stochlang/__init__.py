"""
Stochlang Package
Stochastic regular expressions, cost register automata and identity testing of string distributions.
"""

__version__ = "1.0.0"
