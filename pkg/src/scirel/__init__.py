"""Relation classification for scientific abstracts with a piecewise CNN.

The pipeline: entity-annotated corpus parsing (`corpus`), token/position
instance building (`preprocess`), embedding tables (`embeddings`), a minimal
differentiable tensor core (`diffcore`), the PCNN model (`pcnn`), training
and grid search (`trainer`), scoring (`scoring`), and a CLI (`cli`).
"""

from .corpus import (Corpus, Document, EntitySpan, LABELS, RelationRecord,
                     class_histogram, load_corpus, parse_documents,
                     parse_relations, resolve)
from .embeddings import (EmbeddingTable, Vocabulary, direction_table,
                         load_pretrained, position_table)
from .errors import ConfigError, DataError, NumericError, ScirelError
from .pcnn import (ModelConfig, ModelParams, forward, init_params, load_model,
                   loss_and_grads, predict, save_model)
from .preprocess import (PreprocessConfig, RelationInstance, build_instance,
                         build_instances, clean, tokenize)
from .scoring import ScoreReport, emit_predictions, report_table, score
from .trainer import (GridSpec, TrainConfig, TrialResult, augment, final_fit,
                      grid_search, train)

__version__ = "0.1.0"
