"""Reaction attacks on QC-LDPC/QC-MDPC McEliece-type systems, at desk scale."""

__version__ = "0.1.0"
