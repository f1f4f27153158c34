"""Concatenated codes for repeat channels and biased Dobrushin channels.

Modules: ``core`` (bit strings), ``channels`` (channel models, sampling and
likelihoods), ``info_rate`` (exact small-n mutual information), ``inner_code``
and ``outer_code`` (the two code layers), ``concat_codec`` (the full
construction) and ``harness`` (experiments).
"""

__version__ = "0.1.0"
