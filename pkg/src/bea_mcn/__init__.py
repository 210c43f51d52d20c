"""Coalitional relaying game for multihop cellular networks.

Exact analytics of the BEA channel-sharing rule (partition function, payoffs,
fair-division values, stability) plus a Monte Carlo simulator of random cells.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"
