"""Exact checks of Q-operator and transfer-matrix identities for twisted gl(K|M) spin chains."""

__version__ = "0.1.0"
