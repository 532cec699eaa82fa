"""Anonymity-preserving broadcast, consensus and elections over traceable
ring signatures and threshold encryption, with a deterministic network
simulator for exercising them against scripted Byzantine adversaries."""

from . import avcp, bincons, broadcast, election, groups, tenc, trs

__version__ = "0.1.0"

__all__ = ["avcp", "bincons", "broadcast", "election", "groups", "tenc", "trs"]
