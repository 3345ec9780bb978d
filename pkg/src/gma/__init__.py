"""Numerics for degenerate Monge-Ampere equations on simple polytopes.

The package solves det D2u = h / prod_i l_i on a bounded polytope
{l_i > 0} with the boundary behavior u - sum_i l_i log l_i smooth up to
the boundary, together with the machinery the analysis rests on: face
restriction of the data, a Newton solver on affine charts, the partial
Legendre transform, and a verification suite for the barrier and
asymptotic estimates.
"""

__version__ = "0.1.0"

from .errors import GmaError  # noqa: F401
