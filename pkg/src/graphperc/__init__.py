"""Percolation on dense weighted graphs and their step-graphon limits."""

from graphperc.graphon import StepKernel
from graphperc.weighted_graph import BlockWeightedGraph, WeightedGraph
from graphperc.percolation import ComponentStats, PercolationSample
from graphperc.trees import RootedTree

__all__ = [
    "StepKernel",
    "WeightedGraph",
    "BlockWeightedGraph",
    "PercolationSample",
    "ComponentStats",
    "RootedTree",
]

__version__ = "0.1.0"
