"""perclaw: percolation-rooted scaling-law toolkit.

Simulates critical percolation datasets (Bethe-lattice trees with
branching-random-walk targets), fits them with a Bayesian nearest-neighbor
graph regressor, and evaluates the matching closed-form scaling laws.
"""

__version__ = "0.1.0"

from .bethe import Cluster, Dataset, SimConfig, generate_cluster, generate_dataset
from .theory import TheoryParams

__all__ = [
    "Cluster",
    "Dataset",
    "SimConfig",
    "TheoryParams",
    "generate_cluster",
    "generate_dataset",
    "__version__",
]
