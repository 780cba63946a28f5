"""Discrete prompt search over embedding classifiers with certified
uniform-convergence and PAC-Bayes generalization bounds."""

__version__ = "0.1.0"

from .bounds import (
    BoundReport,
    PromptEvaluation,
    evaluate_prompts,
    mcallester_bound,
    prompt_pac_bayes_bound,
    prompt_uc_bound,
    uc_bound,
)
from .core import (
    EmbeddingDataset,
    PromptSet,
    SplitSpec,
    Vocabulary,
    load_embeddings,
    load_labels,
    load_prompt_set,
    load_vocabulary,
    save_prompt_set,
    split_dataset,
    tokenize,
)
from .encoder import (
    CachedEncoder,
    TextEncoder,
    ToyEncoder,
    class_embeddings,
    classify,
    empirical_risk,
    encode_text,
)
from .prior import (
    KlPolicy,
    NGramPrior,
    OracleBridgePrior,
    PriorModel,
    UniformPrior,
    candidate_set_lm,
    point_mass_kl,
    prune_vocab_ksigma,
    sequence_logprob,
    train_ngram,
)
from .search import SearchConfig, SearchTrace, sequential_search
from .synth import (
    SyntheticSpec,
    flip_labels,
    generate_synthetic,
    subsample_data,
    subsample_vocab,
)

__all__ = [
    "BoundReport",
    "CachedEncoder",
    "EmbeddingDataset",
    "KlPolicy",
    "NGramPrior",
    "OracleBridgePrior",
    "PriorModel",
    "PromptEvaluation",
    "PromptSet",
    "SearchConfig",
    "SearchTrace",
    "SplitSpec",
    "SyntheticSpec",
    "TextEncoder",
    "ToyEncoder",
    "UniformPrior",
    "Vocabulary",
    "candidate_set_lm",
    "class_embeddings",
    "classify",
    "empirical_risk",
    "encode_text",
    "evaluate_prompts",
    "flip_labels",
    "generate_synthetic",
    "load_embeddings",
    "load_labels",
    "load_prompt_set",
    "load_vocabulary",
    "mcallester_bound",
    "point_mass_kl",
    "prompt_pac_bayes_bound",
    "prompt_uc_bound",
    "prune_vocab_ksigma",
    "save_prompt_set",
    "sequence_logprob",
    "sequential_search",
    "split_dataset",
    "subsample_data",
    "subsample_vocab",
    "tokenize",
    "train_ngram",
    "uc_bound",
]
