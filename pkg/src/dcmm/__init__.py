"""Mixed-membership estimation under the degree-corrected mixed membership model."""

from dcmm.errors import DcmmError
from dcmm.estimator import MembershipEstimate, NodeFlag, mixed_score_laplacian, orthodox_mixed_score
from dcmm.metrics import UNWEIGHTED, WEIGHTED, LossSpec, loss
from dcmm.model import DcmmParams, build_omega, generate_membership, mixing_matrix, sample_adjacency
from dcmm.profiles import DegreeProfile, sample_degrees
from dcmm.rng import RandomSeed

__version__ = "0.1.0"

__all__ = [
    "DcmmError",
    "DcmmParams",
    "DegreeProfile",
    "LossSpec",
    "MembershipEstimate",
    "NodeFlag",
    "RandomSeed",
    "UNWEIGHTED",
    "WEIGHTED",
    "build_omega",
    "generate_membership",
    "loss",
    "mixed_score_laplacian",
    "mixing_matrix",
    "orthodox_mixed_score",
    "sample_adjacency",
    "sample_degrees",
]
