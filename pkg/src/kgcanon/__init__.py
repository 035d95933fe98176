"""Open knowledge graph canonicalization.

Jointly learns mention embeddings and Gaussian-mixture cluster assignments
with twin variational autoencoders coupled through a holographic
triple-scoring loss and side-information constraints, and evaluates the
resulting clusterings against gold clusters.
"""

__version__ = "0.1.0"
