"""Generalized relational topic models with collapsed Gibbs sampling."""

import math

from ._grtm import (
    ArgumentError,
    Corpus,
    Error,
    FormatError,
    Hyperparams,
    IntegrityError,
    LinkOrientation,
    Loss,
    NumericalError,
    auc,
    build_train_pairs,
    evaluate_fold,
    load_linqs,
    load_model_posterior,
    make_training_set,
    predict_link,
    sample_inverse_gaussian,
    sample_polya_gamma,
    split_folds,
    suggest_links,
    synthetic,
    train,
)

__all__ = [
    "ArgumentError", "Corpus", "Error", "FormatError", "Hyperparams", "IntegrityError",
    "LinkOrientation", "Loss", "NumericalError", "auc", "build_train_pairs", "cross_validate",
    "evaluate_fold", "fit_fold", "load_linqs", "load_model_posterior", "make_training_set",
    "predict_link", "sample_inverse_gaussian", "sample_polya_gamma", "split_folds",
    "suggest_links", "synthetic", "train",
]


def fit_fold(corpus, fold, hyperparams, neg_ratio=0.01, seed=0, approx=False, samples=1):
    """Train on the fold's training documents, mapping the model back to corpus indices."""
    pairs = build_train_pairs(corpus, fold.train_docs, neg_ratio,
                              hyperparams.c_pos, hyperparams.c_neg, seed + fold.fold_index)
    ts = make_training_set(corpus, fold.train_docs, pairs)
    result = train(ts.corpus, ts.pairs, hyperparams, approx=approx, samples=samples,
                   rng_seed=seed * 1000003 + fold.fold_index)
    post = result.posterior
    post.train_docs = ts.doc_ids
    return post


def cross_validate(corpus, hyperparams, n_folds=5, neg_ratio=0.01, seed=0, approx=False,
                   word_burn_in=50, word_samples=50):
    """Per-fold metrics plus their means (NaN-aware) over n_folds folds."""
    folds = split_folds(corpus, n_folds, seed)
    rows = []
    for fold in folds:
        post = fit_fold(corpus, fold, hyperparams, neg_ratio, seed, approx)
        rows.append(evaluate_fold(corpus, fold, post, seed=seed,
                                  word_burn_in=word_burn_in, word_samples=word_samples))
    means = {}
    for key in ("link_rank", "word_rank", "auc"):
        vals = [r[key] for r in rows if not math.isnan(r[key])]
        means[key] = sum(vals) / len(vals) if vals else math.nan
    return rows, means
