"""tforge: homogenize smooth torsion surfaces by flat cone complexes with dislocations."""

__version__ = "0.1.0"
