class LebError(Exception):
    """Base class for tetrahedral grid errors."""


class MaxLevelExceeded(LebError):
    """Bisection would exceed the refinement cap."""


class NotALeaf(LebError):
    """Operation requires a leaf tetrahedron."""


class OutsideGrid(LebError):
    """Point lies outside the closed control cube."""
