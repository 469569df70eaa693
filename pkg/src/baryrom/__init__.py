"""Barycentric model reduction of parametrized 1D porous-media flow.

Snapshots from a finite-volume two-phase flow solver are normalized into
probability densities, mapped to inverse cdfs, and approximated by convex
combinations of greedily selected atoms. A linear POD baseline and
landscape/conditioning diagnostics round out the toolbox.
"""

from . import diagnostics, flow, greedy, online, pod, simplexqp, transport

__version__ = "0.1.0"

__all__ = [
    "diagnostics",
    "flow",
    "greedy",
    "online",
    "pod",
    "simplexqp",
    "transport",
    "__version__",
]
