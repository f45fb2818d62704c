"""fuseforge: BSP agent computations compiled into specialized partition programs.

Generic per-agent behavioral equations are partially evaluated against a
graph partitioning into per-partition programs (message caches, staged local
reads, merged execution, aggregation pushdown), with a pi-calculus reduction
engine as the semantic oracle for tiny instances and a benchmark CLI.
"""

__version__ = "0.1.0"
