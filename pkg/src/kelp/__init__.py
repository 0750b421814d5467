"""Knowledge-embedded latent projection for high-dimensional binary matrices."""
from .evaluation import (MetricsReport, auroc, completion_eval, procrustes_error,
                         relative_theta_error)
from .kernel import (DEFAULT_CANDIDATES, KernelSpec, KpcaBasis, build_basis, double_center,
                     gram, kpca, nystrom_features)
from .matrix_io import (BinaryMatrix, EmbeddingTable, EntryMask, load_binary_matrix,
                        load_embeddings, sample_holdout_mask)
from .model import (FitConfig, ModelParams, balance_penalty, extend_embedding, gradients,
                    logits, nll, regularized_objective)
from .optimizer import (FitDivergedError, FitResult, basis_for_config, initialize, pgd_fit,
                        project_centering, project_subspace)
from .selection import SelectionReport, select_kernel
from .simulation import (GroundTruth, SimConfig, gen_ground_truth, gen_semantic_embeddings,
                         sample_matrix, simulate)

__version__ = "0.1.0"
