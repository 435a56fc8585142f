"""Single-individual haplotyping as rank-one binary matrix completion."""

__version__ = "0.1.0"
