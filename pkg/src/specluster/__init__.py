"""Fast spectral graph clustering.

Embeds graph vertices into a small number of dimensions using power-method
iterates of the signless normalized Laplacian, then clusters the embedded
points with k-means. Includes baseline variants (eigenvector embeddings,
orthonormalized power-method vectors), an SBM generator, a kNN-graph
builder, and clustering-quality metrics.
"""

__version__ = "0.1.0"

from specluster.graph import Graph, conductance, cut_weight, volume
from specluster.kmeans import Partition, kmeans_cost, lloyd
from specluster.pipeline import SpectralParams, fast_spectral_cluster

__all__ = [
    "Graph",
    "Partition",
    "SpectralParams",
    "conductance",
    "cut_weight",
    "fast_spectral_cluster",
    "kmeans_cost",
    "lloyd",
    "volume",
    "__version__",
]
