"""Chain-of-thought correctness signals.

Thin Python surface over the C++ core: corpus ingestion, text features,
relative-accuracy lexicons, the feed-forward correctness classifier, the
baseline heuristics and the evaluation metrics.
"""

from ._core import (
    ConfusionMatrix,
    Corpus,
    CotRecord,
    DataError,
    Grade,
    LoadResult,
    MlpModel,
    SentimentTriple,
    SplitPlan,
    TrainConfig,
    binned_accuracy,
    build_lexicon,
    build_sentiment_prompt,
    calibration_error,
    class_weights,
    cohen_kappa,
    confidence_coinflip,
    confusion,
    cot_length,
    filter_agreement,
    format_sentiment_trailer,
    forward,
    group_accuracy,
    harmful_word_rule,
    hedging_rate,
    lemmatize,
    length_slope,
    load_corpus,
    load_model,
    mcc,
    parse_record_line,
    parse_sentiment_response,
    pointbiserial,
    predict_label,
    relative_accuracy,
    roc_auc,
    run_pipeline,
    save_corpus,
    save_model,
    split_sentences,
    split_train_balanced_test,
    subset,
    tokenize,
    train_mlp,
    volatility,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
