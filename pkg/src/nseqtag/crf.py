"""Sentence-level structured scoring over tag sequences: the summed
emission + transition score, its log-normalizer via the forward dynamic
program, exact marginals via forward-backward, and Viterbi decoding.

The transition matrix A has shape (K+1, K): row 0 holds the scores for
starting with each tag, row 1+i the scores for jumping from tag i.
"""

from __future__ import annotations

import numpy as np

from .nncore import logsumexp


def sequence_score(f: np.ndarray, A: np.ndarray, tags) -> float:
    """S = sum_t (A[prev_t, tags_t] + f[t, tags_t]), prev_0 = start row."""
    T, K = f.shape
    if len(tags) != T:
        raise ValueError(f"tag sequence length {len(tags)} != {T}")
    s = 0.0
    prev = 0
    for t in range(T):
        j = int(tags[t])
        s += A[prev, j] + f[t, j]
        prev = j + 1
    return s


def forward_logz(f: np.ndarray, A: np.ndarray):
    """Forward recursion in log space. Returns (logZ, alpha[T,K])."""
    T, K = f.shape
    alpha = np.empty((T, K))
    alpha[0] = A[0] + f[0]
    for t in range(1, T):
        # alpha[t, j] = f[t, j] + lse_i(alpha[t-1, i] + A[1+i, j])
        alpha[t] = f[t] + logsumexp(alpha[t - 1][:, None] + A[1:], axis=0)
    return logsumexp(alpha[T - 1]), alpha


def backward_pass(f: np.ndarray, A: np.ndarray):
    """Backward recursion: beta[t, i] = lse_j(A[1+i,j] + f[t+1,j] + beta[t+1,j])."""
    T, K = f.shape
    beta = np.zeros((T, K))
    for t in range(T - 2, -1, -1):
        beta[t] = logsumexp(A[1:] + f[t + 1][None, :] + beta[t + 1][None, :], axis=1)
    return beta


def log_likelihood(f: np.ndarray, A: np.ndarray, gold):
    """log P(gold | f, A) plus gradients of -logP w.r.t. f and A.

    The gradients are marginal expectations minus gold indicators,
    computed exactly by forward-backward.
    """
    T, K = f.shape
    gold = np.asarray(gold, dtype=np.intp)
    logz, alpha = forward_logz(f, A)
    beta = backward_pass(f, A)
    logp = sequence_score(f, A, gold) - logz

    marg = np.exp(alpha + beta - logz)  # marg[t, j] = P(y_t = j)
    grad_f = marg.copy()
    grad_f[np.arange(T), gold] -= 1.0

    grad_A = np.zeros_like(A)
    grad_A[0] = marg[0]
    grad_A[0, gold[0]] -= 1.0
    for t in range(1, T):
        pair = np.exp(alpha[t - 1][:, None] + A[1:] + f[t][None, :]
                      + beta[t][None, :] - logz)
        grad_A[1:] += pair
        grad_A[1 + gold[t - 1], gold[t]] -= 1.0
    return logp, grad_f, grad_A


def viterbi(f: np.ndarray, A: np.ndarray, constraint=None) -> np.ndarray:
    """Highest-scoring tag sequence; ties resolve to the smallest tag id.

    `constraint`, when given, is (start_ok, trans_ok, end_ok) boolean
    masks; disallowed moves score -inf before decoding.
    """
    T, K = f.shape
    neg = -np.inf
    delta = A[0] + f[0]
    if constraint is not None:
        start_ok, trans_ok, end_ok = constraint
        delta = np.where(start_ok, delta, neg)
    back = np.zeros((T, K), dtype=np.intp)
    for t in range(1, T):
        scores = delta[:, None] + A[1:]
        if constraint is not None:
            scores = np.where(trans_ok, scores, neg)
        back[t] = np.argmax(scores, axis=0)  # first max = smallest prev id
        delta = scores[back[t], np.arange(K)] + f[t]
    if constraint is not None:
        delta = np.where(end_ok, delta, neg)
    last = int(np.argmax(delta))
    assert np.isfinite(delta[last]), "no structurally valid sequence (O path must exist)"
    path = np.empty(T, dtype=np.intp)
    path[T - 1] = last
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path
