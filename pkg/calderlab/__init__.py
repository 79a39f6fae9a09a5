"""calderlab: constructive objects behind L^p bounds for the first Calderon commutator."""

__version__ = "1.0.0"
