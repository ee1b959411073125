"""Cross-lingual word embedding alignment with Iterative Normalization."""

__version__ = "0.1.0"

from .align import (  # noqa: E402
    LinearMap,
    RcslsConfig,
    RefineConfig,
    build_synthetic_dictionary,
    objective_value,
    procrustes_fit,
    rcsls_loss,
    rcsls_train,
    refine,
)
from .embeddings import (  # noqa: E402
    EmbeddingSpace,
    MultiDictionary,
    SeedDictionary,
    load_dictionary,
    load_vec,
    parse_vec,
    write_vec,
)
from .normalize import (  # noqa: E402
    NormalizationMethod,
    NormalizationReport,
    center_then_length,
    constraint_residuals,
    iterative_normalize,
    length_normalize,
    mean_center,
    mean_vector_length,
)
from .retrieval import (  # noqa: E402
    Csls,
    EvaluationReport,
    NearestNeighbor,
    csls_scores,
    evaluate_p1,
    knn_mean_similarity,
    neighborhood_report,
    spearman_wordsim,
    translate_topk,
)
