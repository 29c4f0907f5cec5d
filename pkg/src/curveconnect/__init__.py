"""Non-neural core of a segment-based curved text detector.

Anchor/label generation, reference losses, segment-mask merging, principal
curve polygon generation and polygon-level evaluation.
"""

__version__ = "0.1.0"
