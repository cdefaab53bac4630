"""Pruned trees, finite (beta) moduli, tree embeddings into l_p, the
self-improvement engine and coarse/quotient map checks."""

__version__ = "0.1.0"

from .coarse import (QuotientConstants, SampledMap, check_covering, colip_d, compose_cle, lift_quotient,
                     lip_d, omega, projection_sample)
from .config import RunConfig
from .embeddings import (Embedding, EmbeddingCertificate, certify, indicator_embedding, james_embedding,
                         verify_characterization_iii)
from .errors import (BetaForgeError, BudgetError, InfeasibleConfigError, LiftingError, MissingPointsError,
                     PreconditionError, ValidationError, VacuousRangeError)
from .modulus import BetaConfig, ModulusEstimate, beta_finite, config_value, grid_refine
from .pruned import GreedyTree, greedy_pruned, greedy_restriction, inductive_refine, verify_pruned
from .selfimprove import (ContractionTrace, ModulusProvider, improve_step, materialize_support,
                          random_walk_embedding, run)
from .spaces import SeqSpace, midpoint, norm
from .tree import PrunedTree, enumerate_truncation, gca, make_vertex, tree_distance
