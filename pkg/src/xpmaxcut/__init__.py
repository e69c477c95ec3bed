"""Extended-precision interior point solver for the Max-Cut SDP."""

__version__ = "0.1.0"
