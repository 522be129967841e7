"""trisim: siamese CNN metric learning with the triangular loss.

The library trains a shared-parameter convolutional embedding with the
triangular pair loss, accelerates full-dataset training with a 4-stage hybrid
schedule (tiny-scale pair training, class-center transplanting, large-scale
MSE training, inference-time length normalization), unfolds the resulting
unit-hypersphere embeddings into angular coordinates, and evaluates both
views with a deterministic kNN classifier.
"""

from .arrays import (
    DegenerateVectorError,
    cosine_similarity,
    finite_difference_gradient,
    l2_norm,
    max_relative_error,
    triangular_similarity,
)
from .data import Dataset, IdxFormatError, load_idx, save_idx, select_subset
from .evaluation import EmbeddingSet, accuracy, knn_predict, knn_predict_batch
from .losses import (
    DegeneratePairError,
    PairCost,
    contrastive_loss,
    mse_loss,
    triangular_loss,
    triangular_loss_batch,
    triangular_loss_twopart,
)
from .manifold import fold, length_normalize, unfold
from .model import (
    CheckpointError,
    NetworkState,
    build_gradcheck_network,
    build_network,
    embed_dataset,
    load_params,
    save_params,
)
from .trainer import (
    RunLog,
    TrainConfig,
    TrainingPair,
    compute_class_centers,
    exhaustive_pair_count,
    generate_pairs,
    hybrid_train,
    sgd_step,
    train_siamese,
    train_siamese_stream,
    train_supervised,
)

__version__ = "0.1.0"
