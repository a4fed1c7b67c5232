"""Entropy, coding and rate-distortion bounds for rectifiable random variables.

Modules:

- ``geometry``: Lipschitz charts, Hausdorff integrals, tangential Jacobians, fibers.
- ``sources``: rectifiable sources with exact Hausdorff densities and a catalog.
- ``entropy``: m-dimensional entropy, marginals, chain rule, mutual information.
- ``aep``: typical-set probabilities and measures.
- ``coding``: (m, delta)-partitions, Huffman codes and codeword-length bounds.
- ``ratedistortion``: Shannon lower bound and the arc-quantizer upper bound.
- ``cli``: the ``rectent`` command.
"""
from .entropy import (EntropyEstimate, entropy_monte_carlo, entropy_quadrature,
                      joint_decomposition, marginal_entropy, mutual_information)
from .geometry import LipschitzChart, SupportAtlas, hausdorff_integral
from .sources import RectifiableSource, from_catalog, sample

__version__ = "0.1.0"

__all__ = [
    "EntropyEstimate",
    "LipschitzChart",
    "RectifiableSource",
    "SupportAtlas",
    "entropy_monte_carlo",
    "entropy_quadrature",
    "from_catalog",
    "hausdorff_integral",
    "joint_decomposition",
    "marginal_entropy",
    "mutual_information",
    "sample",
]
