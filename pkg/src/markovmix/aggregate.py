"""Aggregate Markov models: bigrams factored through soft word classes.

The model represents P(w2|w1) as sum_c P(w2|c) P(c|w1) with C classes, and
is trained by EM on the sparse bigram count table.  Both factor matrices are
row stochastic; the E-step visits only observed bigrams, never all V^2
pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import NgramCounts
from .errors import DataError, ParameterError

# Entries processed per E-step chunk are capped so the dense (entries x C)
# posterior block stays small even when C approaches V.
_CHUNK_CELLS = 4_000_000


@dataclass
class TrainingTrace:
    """Per-iteration log-likelihood (nats) and perplexity exp(-ll/events)."""

    log_likelihoods: list[float] = field(default_factory=list)
    perplexities: list[float] = field(default_factory=list)

    def append(self, loglik: float, events: int) -> None:
        self.log_likelihoods.append(loglik)
        self.perplexities.append(math.exp(-loglik / events) if events else float("inf"))

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iteration,loglik,perplexity\n")
            for i, (ll, pp) in enumerate(
                zip(self.log_likelihoods, self.perplexities), start=1
            ):
                fh.write("%d,%r,%r\n" % (i, ll, pp))


class AggregateModel:
    """Class-based bigram model with probabilistic word membership.

    Attributes:
        class_given_word: (V, C) row-stochastic membership matrix.
        word_given_class: (C, V) row-stochastic emission matrix.
    """

    context_size = 1

    def __init__(self, class_given_word: np.ndarray, word_given_class: np.ndarray):
        class_given_word = np.asarray(class_given_word, dtype=np.float64)
        word_given_class = np.asarray(word_given_class, dtype=np.float64)
        if class_given_word.shape[1] != word_given_class.shape[0]:
            raise ParameterError("factor matrices disagree on the class count")
        if class_given_word.shape[0] != word_given_class.shape[1]:
            raise ParameterError("factor matrices disagree on the vocabulary size")
        self.class_given_word = class_given_word
        self.word_given_class = word_given_class

    @property
    def vocab_size(self) -> int:
        return self.class_given_word.shape[0]

    @property
    def n_classes(self) -> int:
        return self.class_given_word.shape[1]

    @classmethod
    def random_init(cls, vocab_size: int, n_classes: int, seed: int) -> "AggregateModel":
        """Seeded init: rows are uniform(0.5, 1.5) draws, normalized to sum 1."""
        if not 1 <= n_classes <= vocab_size:
            raise ParameterError(
                "class count must satisfy 1 <= C <= V, got C=%d V=%d"
                % (n_classes, vocab_size)
            )
        rng = np.random.default_rng(seed)
        cgw = rng.uniform(0.5, 1.5, size=(vocab_size, n_classes))
        cgw /= cgw.sum(axis=1, keepdims=True)
        wgc = rng.uniform(0.5, 1.5, size=(n_classes, vocab_size))
        wgc /= wgc.sum(axis=1, keepdims=True)
        return cls(cgw, wgc)

    @classmethod
    def identity_init(cls, vocab_size: int) -> "AggregateModel":
        """C=V init with P(c|w) = 1 iff c == w and uniform emissions.

        One EM step from here reproduces the ML bigram model.
        """
        cgw = np.eye(vocab_size)
        wgc = np.full((vocab_size, vocab_size), 1.0 / vocab_size)
        return cls(cgw, wgc)

    def _check_id(self, wid: int) -> None:
        if not 0 <= wid < self.vocab_size:
            raise ParameterError("word id %d out of range [0, %d)" % (wid, self.vocab_size))

    def pair_prob(self, w1: int, w2: int) -> float:
        """P(w2|w1) = sum_c P(w2|c) P(c|w1)."""
        self._check_id(w1)
        self._check_id(w2)
        return float(self.class_given_word[w1] @ self.word_given_class[:, w2])

    def prob(self, context: tuple[int, ...], word: int) -> float:
        if len(context) != 1:
            raise ParameterError("aggregate model conditions on exactly one word")
        return self.pair_prob(context[0], word)

    def pair_prob_many(self, w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
        """Vectorized pair_prob over parallel id arrays."""
        return np.einsum(
            "ec,ec->e", self.class_given_word[w1], self.word_given_class[:, w2].T
        )

    def row(self, w1: int) -> np.ndarray:
        """Full conditional distribution over successors of w1."""
        self._check_id(w1)
        return self.class_given_word[w1] @ self.word_given_class

    def class_assignments(self) -> list[tuple[int, int, float]]:
        """Per word: (word id, most probable class, its probability).

        Ties break toward the lowest class index.
        """
        winners = np.argmax(self.class_given_word, axis=1)
        peaks = self.class_given_word[np.arange(self.vocab_size), winners]
        return [
            (w, int(winners[w]), float(peaks[w])) for w in range(self.vocab_size)
        ]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("AGG-MODEL v1 V=%d C=%d\n" % (self.vocab_size, self.n_classes))
            for row in self.class_given_word:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")
            for row in self.word_given_class:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")

    @classmethod
    def load(cls, path) -> "AggregateModel":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if header[:2] != ["AGG-MODEL", "v1"]:
                raise DataError("not an aggregate model file: %s" % path)
            fields = dict(part.split("=", 1) for part in header[2:])
            v, c = int(fields["V"]), int(fields["C"])
            cgw = np.array(
                [[float(x) for x in fh.readline().split()] for _ in range(v)]
            )
            wgc = np.array(
                [[float(x) for x in fh.readline().split()] for _ in range(c)]
            )
        if cgw.shape != (v, c) or wgc.shape != (c, v):
            raise DataError("aggregate model file has malformed rows: %s" % path)
        return cls(cgw, wgc)


class _BigramTable:
    """Bigram entries in row-sorted and column-sorted order for the E-step.

    Grouped segment boundaries let each chunk reduce into whole rows/columns,
    so chunked accumulation matches sequential accumulation exactly up to
    float addition order.
    """

    def __init__(self, counts: NgramCounts):
        if not counts.bigrams:
            raise DataError("no bigram events")
        items = sorted(counts.bigrams.items())
        self.rows = np.array([w1 for (w1, _), _ in items], dtype=np.int64)
        self.cols = np.array([w2 for (_, w2), _ in items], dtype=np.int64)
        self.vals = np.array([n for _, n in items], dtype=np.float64)
        self.total = float(self.vals.sum())
        # Column-sorted permutation for the emission-matrix pass.
        self.col_order = np.argsort(self.cols, kind="stable")

    def chunk_slices(self, n_classes: int):
        step = max(256, _CHUNK_CELLS // max(1, n_classes))
        return [
            slice(i, min(i + step, len(self.rows)))
            for i in range(0, len(self.rows), step)
        ]


def _posterior_chunk(cgw, wgc_t, rows, cols, vals):
    """Joint P(c, w2 | w1) per entry, its sum (= model bigram prob), and the
    count-weighted normalized posterior.  `wgc_t` is the emission matrix
    transposed once per pass so the per-entry gather is contiguous."""
    joint = cgw[rows] * wgc_t[cols]
    denom = joint.sum(axis=1)
    pos = denom > 0.0
    weighted = np.zeros_like(joint)
    if pos.any():
        weighted[pos] = joint[pos] * (vals[pos] / denom[pos])[:, None]
    return denom, pos, weighted


def log_likelihood(model: AggregateModel, counts: NgramCounts) -> float:
    """Count-weighted log-likelihood of the bigram table under the model."""
    table = _BigramTable(counts)
    return _log_likelihood_table(model, table)


def _log_likelihood_table(model: AggregateModel, table: _BigramTable) -> float:
    wgc_t = np.ascontiguousarray(model.word_given_class.T)
    ll = 0.0
    for sl in table.chunk_slices(model.n_classes):
        denom, pos, _ = _posterior_chunk(
            model.class_given_word, wgc_t, table.rows[sl], table.cols[sl], table.vals[sl]
        )
        ll += float(table.vals[sl][pos] @ np.log(denom[pos]))
    return ll


def em_step(
    model: AggregateModel, counts: NgramCounts
) -> tuple[AggregateModel, float]:
    """One EM update over the sparse bigram table.

    Returns the updated model and the log-likelihood of the *input* model.
    Conditioning words with no outgoing counts and classes that accumulate no
    mass keep their previous rows.
    """
    table = _BigramTable(counts)
    return _em_step_table(model, table)


def _em_step_table(
    model: AggregateModel, table: _BigramTable
) -> tuple[AggregateModel, float]:
    V, C = model.class_given_word.shape
    cgw = model.class_given_word
    wgc_t = np.ascontiguousarray(model.word_given_class.T)
    num_cgw = np.zeros((V, C))
    num_wgc = np.zeros((C, V))
    ll = 0.0

    # Row pass: membership numerators and the log-likelihood.
    for sl in table.chunk_slices(C):
        rows, vals = table.rows[sl], table.vals[sl]
        denom, pos, weighted = _posterior_chunk(cgw, wgc_t, rows, table.cols[sl], vals)
        ll += float(vals[pos] @ np.log(denom[pos]))
        uniq, starts = np.unique(rows, return_index=True)
        num_cgw[uniq] += np.add.reduceat(weighted, starts, axis=0)

    # Column pass: emission numerators, over the column-sorted permutation.
    order = table.col_order
    rows_o, cols_o, vals_o = table.rows[order], table.cols[order], table.vals[order]
    for sl in table.chunk_slices(C):
        _, _, weighted = _posterior_chunk(cgw, wgc_t, rows_o[sl], cols_o[sl], vals_o[sl])
        uniq, starts = np.unique(cols_o[sl], return_index=True)
        num_wgc[:, uniq] += np.add.reduceat(weighted, starts, axis=0).T

    new_cgw = model.class_given_word.copy()
    row_mass = num_cgw.sum(axis=1)
    touched = row_mass > 0.0
    new_cgw[touched] = num_cgw[touched] / row_mass[touched, None]

    new_wgc = model.word_given_class.copy()
    class_mass = num_wgc.sum(axis=1)
    alive = class_mass > 0.0
    new_wgc[alive] = num_wgc[alive] / class_mass[alive, None]

    return AggregateModel(new_cgw, new_wgc), ll


def train_aggregate(
    counts: NgramCounts,
    n_classes: int,
    iterations: int = 32,
    seed: int = 0,
    initial: AggregateModel | None = None,
) -> tuple[AggregateModel, TrainingTrace]:
    """Run EM from a seeded random (or provided) start.

    The trace row for iteration i reports the log-likelihood and training
    perplexity of the model after i updates.
    """
    if iterations < 1:
        raise ParameterError("iterations must be >= 1")
    table = _BigramTable(counts)
    if initial is not None:
        model = initial
        if model.vocab_size != counts.vocab_size:
            raise ParameterError("initial model does not match the vocabulary size")
    else:
        model = AggregateModel.random_init(counts.vocab_size, n_classes, seed)
    events = int(table.total)
    trace = TrainingTrace()
    for i in range(iterations):
        model, ll_before = _em_step_table(model, table)
        if i > 0:
            trace.append(ll_before, events)
    trace.append(_log_likelihood_table(model, table), events)
    return model, trace
