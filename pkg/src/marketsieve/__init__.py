"""Product-mention extraction for underground-market forum posts."""

from .agreement import corpus_agreement, fleiss_kappa, merge_majority
from .corpus import (
    AnnotatedPost,
    AnnotationLayer,
    Document,
    RawPost,
    attach_syntax,
    parse_annotated,
    read_canonical,
    read_conll,
    tokenize,
    write_canonical,
)
from .adaptation import ClusterHierarchy, Gazetteer, brown_cluster, build_gazetteer, mix_corpora
from .evaluation import EvalReport, bootstrap_test, evaluate, post_accuracy, token_prf, type_prf, types_match
from .features import FeatureConfig, Featurizer, Vocabulary
from .learning import LinearModel, TrainConfig, predict_binary, predict_post, train_binary, train_post_latent
from .projection import Span, project

__version__ = "0.1.0"
