"""Vector balancing with prefix constraints: exact oracles, a block-LP
pipeline for smoothed inputs, DAG-to-tree reduction, instance generators and
factorization-norm bounds."""

__version__ = "0.1.0"
