"""Mixed-order Markov models: convex mixtures of skip-k bigram predictions.

The prediction for word w_t combines skip-k transition matrices M_k, one per
distance k = 1..m, with context-dependent mixing weights: component k fires
with probability lambda_k(w_{t-k}) times the probability that every closer
component declined, prod_{j<k} (1 - lambda_j(w_{t-j})).  The last mixing
column is pinned to one so the model never looks back further than m words.

Training is EM over prediction events with the component identity hidden.
Transition entries start from normalized skip-k counts; entries that start
at zero stay zero, so unseen word combinations keep zero probability (these
models are smoothed by the cascade layer, not here).
"""

from __future__ import annotations

import numpy as np

from .aggregate import TrainingTrace
from .corpus import END_ID, START_ID, NgramCounts, TokenSentence
from .errors import DataError, NumericError, ParameterError

MAX_COMPONENTS = 8  # model size grows as m * V^2

SkipMatrix = dict[int, dict[int, float]]


class MixedOrderModel:
    """Mixture of skip-k transition matrices with per-word mixing weights.

    Attributes:
        lambdas: (V, m) matrix; column k-1 holds lambda_k(w), last column 1.
        matrices: per-k sparse row-stochastic transitions, rows absent when
            the word was never seen k positions before a prediction.
    """

    def __init__(self, lambdas: np.ndarray, matrices: list[SkipMatrix]):
        lambdas = np.asarray(lambdas, dtype=np.float64)
        if lambdas.ndim != 2 or lambdas.shape[1] != len(matrices):
            raise ParameterError("mixing matrix shape does not match component count")
        self.lambdas = lambdas
        self.matrices = matrices

    @property
    def vocab_size(self) -> int:
        return self.lambdas.shape[0]

    @property
    def order(self) -> int:
        return self.lambdas.shape[1]

    @property
    def context_size(self) -> int:
        return self.order

    @classmethod
    def from_counts(cls, counts: NgramCounts, order: int) -> "MixedOrderModel":
        """Initialize from raw skip-k counts.

        Transition rows are ML-normalized counts; lambda_k(w) starts at
        1/(m-k+1) so the first E-step spreads posterior mass evenly over the
        remaining components.
        """
        if not 1 <= order <= MAX_COMPONENTS:
            raise ParameterError(
                "component count must be in 1..%d, got %d" % (MAX_COMPONENTS, order)
            )
        missing = [k for k in range(1, order + 1) if k not in counts.skips]
        if missing:
            raise ParameterError("counts lack skip tables for k=%r" % missing)
        matrices: list[SkipMatrix] = []
        for k in range(1, order + 1):
            rows: SkipMatrix = {}
            for (w1, w2), n in counts.skips[k].items():
                rows.setdefault(w1, {})[w2] = float(n)
            for w1, row in rows.items():
                norm = sum(row.values())
                for w2 in row:
                    row[w2] /= norm
            matrices.append(rows)
        lambdas = np.empty((counts.vocab_size, order))
        for k in range(1, order + 1):
            lambdas[:, k - 1] = 1.0 / (order - k + 1)
        return cls(lambdas, matrices)

    def prob(self, context: tuple[int, ...], word: int) -> float:
        """Mixture probability of `word` after `context` (sentence order,
        most recent word last, exactly m entries)."""
        m = self.order
        if len(context) != m:
            raise ParameterError(
                "context must hold exactly %d ids, got %d" % (m, len(context))
            )
        total = 0.0
        declined = 1.0
        for k in range(1, m + 1):
            w_ctx = context[m - k]
            lam = self.lambdas[w_ctx, k - 1]
            row = self.matrices[k - 1].get(w_ctx)
            if row:
                total += declined * lam * row.get(word, 0.0)
            declined *= 1.0 - lam
        return total

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("MIX-MODEL v1 V=%d m=%d\n" % (self.vocab_size, self.order))
            for row in self.lambdas:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")
            for k, rows in enumerate(self.matrices, start=1):
                for w1 in sorted(rows):
                    for w2 in sorted(rows[w1]):
                        fh.write("%d %d %d %r\n" % (k, w1, w2, rows[w1][w2]))

    @classmethod
    def load(cls, path) -> "MixedOrderModel":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if header[:2] != ["MIX-MODEL", "v1"]:
                raise DataError("not a mixed-order model file: %s" % path)
            fields = dict(part.split("=", 1) for part in header[2:])
            v, m = int(fields["V"]), int(fields["m"])
            lambdas = np.array(
                [[float(x) for x in fh.readline().split()] for _ in range(v)]
            )
            matrices: list[SkipMatrix] = [{} for _ in range(m)]
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                k, w1, w2 = int(parts[0]), int(parts[1]), int(parts[2])
                matrices[k - 1].setdefault(w1, {})[w2] = float(parts[3])
        if lambdas.shape != (v, m):
            raise DataError("mixed-order model file has malformed rows: %s" % path)
        return cls(lambdas, matrices)


class _EventTable:
    """Flattened prediction events against a fixed transition sparsity.

    For event t and component k the table records the conditioning id
    w_{t-k} and the position of the pair (w_{t-k}, w_t) inside the per-k
    value arrays (-1 when the pair is not stored, contributing zero).
    """

    def __init__(self, model: MixedOrderModel, sentences: list[TokenSentence]):
        m = model.order
        self.pairs: list[list[tuple[int, int]]] = []
        self.pair_rows: list[np.ndarray] = []
        index: list[dict[tuple[int, int], int]] = []
        for rows in model.matrices:
            pairs = [
                (w1, w2) for w1 in sorted(rows) for w2 in sorted(rows[w1])
            ]
            self.pairs.append(pairs)
            self.pair_rows.append(np.array([p[0] for p in pairs], dtype=np.int64))
            index.append({p: i for i, p in enumerate(pairs)})

        ctx_rows: list[list[int]] = []
        idx_rows: list[list[int]] = []
        for sentence in sentences:
            padded = [START_ID] * m + list(sentence) + [END_ID]
            for i in range(m, len(padded)):
                w = padded[i]
                ctx = [padded[i - k] for k in range(1, m + 1)]
                ctx_rows.append(ctx)
                idx_rows.append(
                    [index[k - 1].get((ctx[k - 1], w), -1) for k in range(1, m + 1)]
                )
        self.ctx = np.array(ctx_rows, dtype=np.int64).reshape(-1, m)
        self.pair_idx = np.array(idx_rows, dtype=np.int64).reshape(-1, m)
        self.n_events = self.ctx.shape[0]

    def values_from(self, model: MixedOrderModel) -> list[np.ndarray]:
        vals = []
        for k, pairs in enumerate(self.pairs):
            rows = model.matrices[k]
            vals.append(
                np.array([rows[w1][w2] for (w1, w2) in pairs], dtype=np.float64)
            )
        return vals


def _event_probs(model: MixedOrderModel, table: _EventTable):
    """Per-event mixture probability and per-component contributions."""
    m = model.order
    lam = model.lambdas[table.ctx, np.arange(m)[None, :]]
    declined = np.cumprod(1.0 - lam, axis=1)
    prefix = np.hstack([np.ones((table.n_events, 1)), declined[:, :-1]])
    weight = lam * prefix
    vals = table.values_from(model)
    mv = np.zeros_like(weight)
    for k in range(m):
        hit = table.pair_idx[:, k] >= 0
        mv[hit, k] = vals[k][table.pair_idx[hit, k]]
    contrib = weight * mv
    return contrib.sum(axis=1), contrib


def _event_log_likelihood(model: MixedOrderModel, table: _EventTable):
    total, _ = _event_probs(model, table)
    scored = total > 0.0
    ll = float(np.log(total[scored]).sum())
    return ll, int(scored.sum()), int(table.n_events - scored.sum())


def _em_step_table(model: MixedOrderModel, table: _EventTable):
    m = model.order
    V = model.vocab_size
    total, contrib = _event_probs(model, table)
    scored = total > 0.0
    n_skipped = int(table.n_events - scored.sum())
    if not scored.any():
        raise NumericError("model assigns zero mass everywhere")
    ll = float(np.log(total[scored]).sum())

    phi = contrib[scored] / total[scored, None]
    ctx = table.ctx[scored]
    pair_idx = table.pair_idx[scored]
    # tail[:, k-1] = sum of phi over components k..m, for the mixing update.
    tail = np.cumsum(phi[:, ::-1], axis=1)[:, ::-1]

    new_lambdas = model.lambdas.copy()
    new_matrices: list[SkipMatrix] = []
    old_vals = table.values_from(model)
    for k in range(m):
        num = np.bincount(ctx[:, k], weights=phi[:, k], minlength=V)
        den = np.bincount(ctx[:, k], weights=tail[:, k], minlength=V)
        seen = den > 0.0
        new_lambdas[seen, k] = num[seen] / den[seen]

        hit = pair_idx[:, k] >= 0
        pair_num = np.bincount(
            pair_idx[hit, k], weights=phi[hit, k], minlength=len(table.pairs[k])
        )
        row_mass = num[table.pair_rows[k]]
        touched = row_mass > 0.0
        new_vals = np.where(
            touched, pair_num / np.where(touched, row_mass, 1.0), old_vals[k]
        )
        rows: SkipMatrix = {}
        for i, (w1, w2) in enumerate(table.pairs[k]):
            rows.setdefault(w1, {})[w2] = float(new_vals[i])
        new_matrices.append(rows)
    new_lambdas[:, m - 1] = 1.0

    return MixedOrderModel(new_lambdas, new_matrices), ll, n_skipped


def em_step(
    model: MixedOrderModel, sentences: list[TokenSentence]
) -> tuple[MixedOrderModel, float, int]:
    """One EM pass over the corpus.

    Returns (updated model, log-likelihood of the input model over scored
    events, number of zero-probability events skipped).  Words never seen at
    some distance keep their previous mixing weight and transition row.
    """
    sentences = list(sentences)
    if not sentences:
        raise DataError("empty corpus")
    table = _EventTable(model, sentences)
    return _em_step_table(model, table)


def train_mixed(
    sentences: list[TokenSentence],
    order: int,
    vocab_size: int,
    iterations: int = 4,
) -> tuple[MixedOrderModel, TrainingTrace]:
    """Count skip-k pairs, initialize, and run EM.

    Trace row i holds the training log-likelihood and perplexity of the
    model after i updates.
    """
    if iterations < 1:
        raise ParameterError("iterations must be >= 1")
    sentences = list(sentences)
    if not sentences:
        raise DataError("empty corpus")
    counts = NgramCounts(vocab_size, 1, tuple(range(1, order + 1)))
    for s in sentences:
        counts.add_sentence(s)
    model = MixedOrderModel.from_counts(counts, order)
    table = _EventTable(model, sentences)
    trace = TrainingTrace()
    for i in range(iterations):
        model, ll_before, n_skipped = _em_step_table(model, table)
        if i > 0:
            trace.append(ll_before, table.n_events - n_skipped)
    ll_final, scored, _ = _event_log_likelihood(model, table)
    trace.append(ll_final, scored)
    return model, trace


def missing_fraction(
    model: MixedOrderModel, sentences: list[TokenSentence]
) -> float:
    """Fraction of prediction events assigned exactly zero probability."""
    if not sentences:
        return 0.0
    table = _EventTable(model, sentences)
    if table.n_events == 0:
        return 0.0
    total, _ = _event_probs(model, table)
    return float((total == 0.0).sum() / table.n_events)


def lambda_report(
    model: MixedOrderModel,
    top_n: int,
    unigram_counts,
    list_size: int = 50,
) -> tuple[list[tuple[int, float]], list[tuple[int, float]]]:
    """Rank the top_n most frequent words by their skip-1 mixing weight.

    Returns (lowest, highest) lists of (word id, lambda_1) pairs; boundary
    markers are excluded since they never occur as interior context.  Ties
    break toward the lower word id in both lists.
    """
    if model.order < 2:
        raise ParameterError("lambda ranking needs at least two components")
    ranked = sorted(
        (
            (w, n)
            for w, n in unigram_counts.items()
            if w not in (START_ID, END_ID)
        ),
        key=lambda kv: (-kv[1], kv[0]),
    )
    chosen = [w for w, _ in ranked[:top_n]]
    lam1 = [(w, float(model.lambdas[w, 0])) for w in chosen]
    low = sorted(lam1, key=lambda wl: (wl[1], wl[0]))[:list_size]
    high = sorted(lam1, key=lambda wl: (-wl[1], wl[0]))[:list_size]
    return low, high
