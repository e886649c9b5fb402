"""Smoothing cascades over trained models.

Three layers are provided, composable bottom-up:

  * a bigram level: ML bigram rows interpolated with an always-positive base
    model (an aggregate Markov model), one interpolation weight per row,
    fit on held-out data;
  * mixed-order levels: the order-m mixture discounted per skip-k row by
    sigma_k(w), with the discounted mass filled in by the order-(m-1) level;
  * an optional trigram level: Good-Turing discounted ML trigrams backing
    off, Katz style, either to the classic bigram/unigram chain or to a
    smoothed order-2 cascade.

Parameter files use the "SIGMA v1" format (one "k w sigma" triple per line,
w = -1 holding the per-k fallback) and "GT v1" for discount coefficients.
"""

from __future__ import annotations

import os
import warnings
from collections import Counter

import numpy as np

from .aggregate import AggregateModel
from .corpus import NgramCounts, TokenSentence, iter_events
from .errors import DataError, ParameterError
from .mixedorder import MixedOrderModel

_FIT_TOL = 1e-6
_FIT_MAX_ITERS = 50
DEFAULT_GT_THRESHOLD = 5


class MLUnigram:
    """Maximum-likelihood unigram distribution over predicted tokens."""

    context_size = 0

    def __init__(self, unigrams: Counter, total: int):
        if total <= 0:
            raise DataError("no unigram events")
        self.probs = {w: n / total for w, n in unigrams.items()}

    @classmethod
    def from_counts(cls, counts: NgramCounts) -> "MLUnigram":
        return cls(counts.unigrams, counts.total)

    def prob(self, context: tuple[int, ...], word: int) -> float:
        return self.probs.get(word, 0.0)


class MLBigram:
    """Maximum-likelihood bigram rows; unseen pairs and rows yield zero."""

    context_size = 1

    def __init__(self, bigrams: Counter):
        self.rows: dict[int, dict[int, float]] = {}
        for (w1, w2), n in bigrams.items():
            self.rows.setdefault(w1, {})[w2] = float(n)
        self.row_totals = {w1: sum(row.values()) for w1, row in self.rows.items()}
        for w1, row in self.rows.items():
            norm = self.row_totals[w1]
            for w2 in row:
                row[w2] /= norm

    @classmethod
    def from_counts(cls, counts: NgramCounts) -> "MLBigram":
        if not counts.bigrams:
            raise DataError("no bigram events")
        return cls(counts.bigrams)

    def pair_prob(self, w1: int, w2: int) -> float:
        row = self.rows.get(w1)
        return row.get(w2, 0.0) if row else 0.0

    def prob(self, context: tuple[int, ...], word: int) -> float:
        return self.pair_prob(context[-1], word)


def _write_sigma_file(path, fallbacks: dict[int, float], values) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("SIGMA v1\n")
        for k in sorted(fallbacks):
            fh.write("%d -1 %r\n" % (k, fallbacks[k]))
        for (k, w) in sorted(values):
            fh.write("%d %d %r\n" % (k, w, values[(k, w)]))


def _read_sigma_file(path):
    fallbacks: dict[int, float] = {}
    values: dict[tuple[int, int], float] = {}
    with open(path, encoding="utf-8") as fh:
        if fh.readline().split() != ["SIGMA", "v1"]:
            raise DataError("not a sigma parameter file: %s" % path)
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            k, w, s = int(parts[0]), int(parts[1]), float(parts[2])
            if w < 0:
                fallbacks[k] = s
            else:
                values[(k, w)] = s
    return fallbacks, values


class InterpolationParams:
    """Per-row interpolation weights sigma(w) with a pooled fallback."""

    def __init__(self, sigma: dict[int, float], sigma0: float):
        self.sigma = sigma
        self.sigma0 = sigma0

    def sigma_for(self, w: int) -> float:
        return self.sigma.get(w, self.sigma0)

    def save(self, path) -> None:
        _write_sigma_file(path, {1: self.sigma0}, {(1, w): s for w, s in self.sigma.items()})

    @classmethod
    def load(cls, path) -> "InterpolationParams":
        fallbacks, values = _read_sigma_file(path)
        if set(fallbacks) != {1}:
            raise DataError("interpolation file must hold exactly the k=1 fallback")
        return cls({w: s for (_, w), s in values.items()}, fallbacks[1])


class MixedSmoothingParams:
    """Per-(k, w) discount weights with per-k fallbacks for unseen rows."""

    def __init__(self, values: dict[tuple[int, int], float], fallbacks: dict[int, float]):
        self.values = values
        self.fallbacks = fallbacks

    def sigma_for(self, k: int, w: int) -> float:
        return self.values.get((k, w), self.fallbacks[k])

    def save(self, path) -> None:
        _write_sigma_file(path, self.fallbacks, self.values)

    @classmethod
    def load(cls, path) -> "MixedSmoothingParams":
        fallbacks, values = _read_sigma_file(path)
        return cls(values, fallbacks)


def _sigma_em(a: np.ndarray, b: np.ndarray, n: np.ndarray, groups, n_groups: int):
    """Shared 1-D mixture-weight EM, one independent weight per group.

    Maximizes sum n * log((1-s) a + s b) over s per group, from s = 0.5.
    Events with a = b = 0 must be filtered out beforehand.  EM converges
    only sublinearly when the optimum sits at an endpoint, so after the
    capped iteration the endpoints are compared exactly and win on strict
    improvement; the fitted weight therefore never loses to s = 0 or s = 1.
    Returns the per-group weights and a mask of groups that had any data.
    """
    den = np.bincount(groups, weights=n, minlength=n_groups)
    seen = den > 0.0
    s = np.full(n_groups, 0.5)
    for _ in range(_FIT_MAX_ITERS):
        se = s[groups]
        mix = (1.0 - se) * a + se * b
        r = np.zeros_like(mix)
        ok = mix > 0.0
        r[ok] = se[ok] * b[ok] / mix[ok]
        num = np.bincount(groups, weights=n * r, minlength=n_groups)
        new_s = np.where(seen, num / np.where(seen, den, 1.0), s)
        delta = float(np.max(np.abs(new_s - s))) if n_groups else 0.0
        s = new_s
        if delta < _FIT_TOL:
            break

    def group_loglik(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        se = values[groups]
        mix = (1.0 - se) * a + se * b
        ok = mix > 0.0
        terms = np.where(ok, n * np.log(np.where(ok, mix, 1.0)), 0.0)
        ll = np.bincount(groups, weights=terms, minlength=n_groups)
        dead = np.bincount(groups, weights=(~ok).astype(float), minlength=n_groups)
        return ll, dead == 0.0

    ll_fit, _ = group_loglik(s)
    for endpoint in (0.0, 1.0):
        ll_end, valid = group_loglik(np.full(n_groups, endpoint))
        better = seen & valid & (ll_end > ll_fit)
        s = np.where(better, endpoint, s)
        ll_fit = np.where(better, ll_end, ll_fit)
    return s, seen


def fit_interpolation(
    ml: MLBigram,
    base,
    validation: list[TokenSentence],
    tied: bool = False,
) -> InterpolationParams:
    """Fit per-row weights for mixing ML bigram rows with the base model.

    Each row's weight maximizes the held-out likelihood of events
    conditioned on that row; the pooled fallback is fit on all events.
    Rows with no ML mass at all are pinned to 1 so queries against them
    reduce to the base model.  With `tied` a single pooled weight is shared
    by every row instead.
    """
    events: Counter[tuple[int, int]] = Counter()
    for ctx, w in iter_events(validation, 1):
        events[(ctx[0], w)] += 1
    if not events:
        raise DataError("empty validation corpus")
    pairs = sorted(events)
    w1 = np.array([p[0] for p in pairs], dtype=np.int64)
    n = np.array([events[p] for p in pairs], dtype=np.float64)
    a = np.array([ml.pair_prob(u, v) for u, v in pairs])
    b = np.array([base.prob((u,), v) for u, v in pairs])
    keep = (a > 0.0) | (b > 0.0)
    w1, n, a, b = w1[keep], n[keep], a[keep], b[keep]

    s0, _ = _sigma_em(a, b, n, np.zeros(len(w1), dtype=np.int64), 1)
    if tied:
        return InterpolationParams({}, float(s0[0]))
    n_groups = int(w1.max()) + 1 if len(w1) else 1
    s, seen = _sigma_em(a, b, n, w1, n_groups)
    sigma = {int(w): float(s[w]) for w in np.nonzero(seen)[0]}
    # Rows without ML mass delegate entirely to the base (interp_prob also
    # enforces this at query time for rows never fit).
    for w in sigma:
        if ml.row_totals.get(w, 0.0) == 0.0:
            sigma[w] = 1.0
    return InterpolationParams(sigma, float(s0[0]))


def interp_prob(ml: MLBigram, base, params: InterpolationParams, w1: int, w2: int) -> float:
    """(1 - sigma(w1)) * P_ML(w2|w1) + sigma(w1) * P_base(w2|w1)."""
    s = params.sigma_for(w1)
    if ml.row_totals.get(w1, 0.0) == 0.0:
        s = 1.0
    return (1.0 - s) * ml.pair_prob(w1, w2) + s * base.prob((w1,), w2)


class InterpolatedBigram:
    """Bigram rows mixed with a base model; the cascade's bottom level."""

    context_size = 1

    def __init__(self, ml: MLBigram, base, params: InterpolationParams):
        self.ml = ml
        self.base = base
        self.params = params

    def prob(self, context: tuple[int, ...], word: int) -> float:
        return interp_prob(self.ml, self.base, self.params, context[-1], word)


class SmoothedMixedLevel:
    """A mixed-order level with discounted skip weights over a lower level.

    Each skip-k prediction keeps (1 - sigma_k(w_{t-k})) of its mixture
    weight; the discounted mass delegates to the lower level's prediction
    for the context truncated by one word.  Words with no stored skip-k row
    delegate that component entirely.
    """

    def __init__(self, model: MixedOrderModel, params: MixedSmoothingParams, lower):
        if getattr(lower, "context_size", None) != model.order - 1:
            raise ParameterError(
                "lower level must condition on %d words" % (model.order - 1)
            )
        self.model = model
        self.params = params
        self.lower = lower
        self.context_size = model.order

    def prob(self, context: tuple[int, ...], word: int) -> float:
        m = self.model.order
        if len(context) != m:
            raise ParameterError(
                "context must hold exactly %d ids, got %d" % (m, len(context))
            )
        direct = 0.0
        leftover = 0.0
        declined = 1.0
        for k in range(1, m + 1):
            w_ctx = context[m - k]
            lam = self.model.lambdas[w_ctx, k - 1]
            weight = declined * lam
            row = self.model.matrices[k - 1].get(w_ctx)
            if row:
                sigma = self.params.sigma_for(k, w_ctx)
                direct += (1.0 - sigma) * weight * row.get(word, 0.0)
                leftover += sigma * weight
            else:
                leftover += weight
            declined *= 1.0 - lam
        return direct + leftover * self.lower.prob(context[1:], word)


def fit_mixed_smoothing(
    model: MixedOrderModel,
    lower,
    validation: list[TokenSentence],
    tied: bool = False,
) -> MixedSmoothingParams:
    """Fit the per-row discount weights of one mixed-order level.

    The hidden outcome per held-out event is which skip component fired and
    whether it predicted directly or delegated; EM runs all (k, w) weights
    jointly, with pooled per-k weights fit alongside as fallbacks for rows
    never exercised by the validation data.  With `tied` only the pooled
    per-k weights are kept.
    """
    m = model.order
    V = model.vocab_size
    ctx_rows, mk_rows, plow_rows = [], [], []
    for ctx, w in iter_events(validation, m):
        ctx_rows.append([ctx[m - k] for k in range(1, m + 1)])
        mk_rows.append(
            [model.matrices[k - 1].get(ctx[m - k], {}).get(w, 0.0) for k in range(1, m + 1)]
        )
        plow_rows.append(lower.prob(ctx[1:], w))
    if not ctx_rows:
        raise DataError("empty validation corpus")
    ctx = np.array(ctx_rows, dtype=np.int64)
    mk = np.array(mk_rows)
    plow = np.array(plow_rows)

    lam = model.lambdas[ctx, np.arange(m)[None, :]]
    declined = np.cumprod(1.0 - lam, axis=1)
    weight = lam * np.hstack([np.ones((len(ctx), 1)), declined[:, :-1]])

    sig = np.full((V, m), 0.5)
    sig0 = np.full(m, 0.5)
    seen = [
        np.bincount(ctx[:, k], minlength=V) > 0 for k in range(m)
    ]

    for _ in range(_FIT_MAX_ITERS):
        se = sig[ctx, np.arange(m)[None, :]]
        direct = (1.0 - se) * weight * mk
        deleg = se * weight * plow[:, None]
        tot = direct.sum(axis=1) + deleg.sum(axis=1)
        ok = tot > 0.0
        rd = np.zeros_like(direct)
        rl = np.zeros_like(deleg)
        rd[ok] = direct[ok] / tot[ok, None]
        rl[ok] = deleg[ok] / tot[ok, None]

        d0 = (1.0 - sig0) * weight * mk
        l0 = sig0 * weight * plow[:, None]
        t0 = d0.sum(axis=1) + l0.sum(axis=1)
        ok0 = t0 > 0.0
        rd0 = np.zeros_like(d0)
        rl0 = np.zeros_like(l0)
        rd0[ok0] = d0[ok0] / t0[ok0, None]
        rl0[ok0] = l0[ok0] / t0[ok0, None]

        delta = 0.0
        for k in range(m):
            num = np.bincount(ctx[:, k], weights=rl[:, k], minlength=V)
            denk = np.bincount(ctx[:, k], weights=(rl + rd)[:, k], minlength=V)
            posk = denk > 0.0
            new_col = np.where(posk, num / np.where(posk, denk, 1.0), sig[:, k])
            delta = max(delta, float(np.max(np.abs(new_col - sig[:, k]))))
            sig[:, k] = new_col

            denk0 = float((rl0[:, k] + rd0[:, k]).sum())
            if denk0 > 0.0:
                new0 = float(rl0[:, k].sum()) / denk0
                delta = max(delta, abs(new0 - sig0[k]))
                sig0[k] = new0
        if delta < _FIT_TOL:
            break

    values: dict[tuple[int, int], float] = {}
    if not tied:
        for k in range(m):
            for w in np.nonzero(seen[k])[0]:
                values[(k + 1, int(w))] = float(sig[w, k])
    for k in range(m):
        # Rows the model never stored delegate their whole component.
        for w in range(V):
            if w not in model.matrices[k]:
                values[(k + 1, w)] = 1.0
    fallbacks = {k + 1: float(sig0[k]) for k in range(m)}
    return MixedSmoothingParams(values, fallbacks)


def good_turing_discounts(table: Counter, k_gt: int = DEFAULT_GT_THRESHOLD) -> dict[int, float]:
    """Good-Turing discount ratios d_r for counts r = 1..k_gt.

    Uses adjusted counts r* = (r+1) n_{r+1} / n_r normalized so that counts
    above the threshold are not discounted.  Whenever a required
    count-of-counts is zero or the ratio leaves (0, 1], that r falls back to
    no discounting with a warning.
    """
    if not table:
        raise DataError("empty count table")
    if k_gt < 1:
        raise ParameterError("discount threshold must be >= 1")
    n_r = Counter(table.values())
    discounts: dict[int, float] = {}
    big_a = None
    if n_r[1] > 0 and n_r[k_gt + 1] > 0:
        big_a = (k_gt + 1) * n_r[k_gt + 1] / n_r[1]
    for r in range(1, k_gt + 1):
        d = 1.0
        if big_a is None or big_a >= 1.0 or n_r[r] == 0 or n_r[r + 1] == 0:
            warnings.warn(
                "count-of-counts too sparse for discounting at r=%d; using d=1" % r
            )
        else:
            r_star = (r + 1) * n_r[r + 1] / n_r[r]
            d = (r_star / r - big_a) / (1.0 - big_a)
            if not 0.0 < d <= 1.0:
                warnings.warn(
                    "discount ratio %.4f at r=%d outside (0, 1]; using d=1" % (d, r)
                )
                d = 1.0
        discounts[r] = d
    return discounts


def save_discounts(path, discounts: dict[int, float]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("GT v1\n")
        for r in sorted(discounts):
            fh.write("%d %r\n" % (r, discounts[r]))


def load_discounts(path) -> dict[int, float]:
    with open(path, encoding="utf-8") as fh:
        if fh.readline().split() != ["GT", "v1"]:
            raise DataError("not a discount file: %s" % path)
        return {int(r): float(d) for r, d in (line.split() for line in fh if line.split())}


class _KatzLevel:
    """Shared discounted-count machinery for Katz backoff levels.

    `totals` may be supplied separately from the stored rows: when low-count
    entries have been dropped, normalizing the survivors by the full event
    totals leaves the dropped mass to the backoff model.

    Contexts whose backoff puts no mass at all outside the seen successors
    have nowhere to send the discounted leftover; they revert to the plain
    ML distribution over their stored successors (`ml_contexts`) so the row
    still sums to one.
    """

    def __init__(
        self,
        grouped: dict,
        discounts: dict[int, float],
        k_gt: int,
        totals: dict | None = None,
    ):
        self.rows = grouped
        if totals is None:
            totals = {ctx: sum(row.values()) for ctx, row in grouped.items()}
        self.totals = totals
        self.stored_totals = {ctx: sum(row.values()) for ctx, row in grouped.items()}
        self.discounts = discounts
        self.k_gt = k_gt
        self.alphas: dict = {}
        self.ml_contexts: set = set()

    def discount(self, r: int) -> float:
        return self.discounts.get(r, 1.0) if r <= self.k_gt else 1.0

    def seen_prob(self, ctx, word) -> float | None:
        row = self.rows.get(ctx)
        if not row:
            return None
        r = row.get(word)
        if r is None:
            return None
        if ctx in self.ml_contexts:
            return r / self.stored_totals[ctx]
        return self.discount(r) * r / self.totals[ctx]

    def compute_alphas(self, backoff_prob) -> None:
        """Per-context normalizer: leftover discounted mass divided by the
        backoff mass outside the seen successor set."""
        for ctx, row in self.rows.items():
            total = self.totals[ctx]
            leftover = 1.0
            seen_backoff = 0.0
            for word, r in row.items():
                leftover -= self.discount(r) * r / total
                seen_backoff += backoff_prob(ctx, word)
            leftover = max(leftover, 0.0)
            unseen_backoff = 1.0 - seen_backoff
            if leftover <= 0.0:
                self.alphas[ctx] = 0.0
            elif unseen_backoff <= 0.0:
                self.ml_contexts.add(ctx)
                self.alphas[ctx] = 0.0
            else:
                self.alphas[ctx] = leftover / unseen_backoff


class KatzBigram:
    """Good-Turing discounted bigrams backing off to ML unigrams."""

    context_size = 1

    def __init__(
        self,
        counts: NgramCounts,
        k_gt: int = DEFAULT_GT_THRESHOLD,
        discounts: dict[int, float] | None = None,
    ):
        if not counts.bigrams:
            raise DataError("no bigram events")
        if discounts is None:
            discounts = good_turing_discounts(counts.bigrams, k_gt)
        grouped: dict[int, dict[int, int]] = {}
        for (w1, w2), n in counts.bigrams.items():
            grouped.setdefault(w1, {})[w2] = n
        self.level = _KatzLevel(grouped, discounts, k_gt)
        self.unigram = MLUnigram.from_counts(counts)
        self.level.compute_alphas(lambda ctx, w: self.unigram.prob((), w))

    def prob(self, context: tuple[int, ...], word: int) -> float:
        v = context[-1]
        p = self.level.seen_prob(v, word)
        if p is not None:
            return p
        alpha = self.level.alphas.get(v, 1.0)
        return alpha * self.unigram.prob((), word)


class KatzTrigram:
    """Discounted ML trigrams delegating unseen predictions to a backoff
    model, either the Katz bigram/unigram chain or a smoothed order-2
    cascade."""

    context_size = 2

    def __init__(
        self,
        trigrams: Counter,
        backoff,
        k_gt: int = DEFAULT_GT_THRESHOLD,
        discounts: dict[int, float] | None = None,
        context_totals: dict[tuple[int, int], int] | None = None,
        vocab_size: int | None = None,
    ):
        if not trigrams:
            raise DataError("empty trigram table")
        if getattr(backoff, "context_size", 99) > 2:
            raise ParameterError("backoff model may condition on at most 2 words")
        if discounts is None:
            discounts = good_turing_discounts(trigrams, k_gt)
        grouped: dict[tuple[int, int], dict[int, int]] = {}
        for (u, v, w), n in trigrams.items():
            grouped.setdefault((u, v), {})[w] = n
        self.level = _KatzLevel(grouped, discounts, k_gt, totals=context_totals)
        self.backoff = backoff
        self.vocab_size = vocab_size
        self.level.compute_alphas(lambda ctx, w: self._backoff_prob(ctx, w))

    def _backoff_prob(self, context: tuple[int, int], word: int) -> float:
        bctx = context[len(context) - self.backoff.context_size :]
        return self.backoff.prob(bctx, word)

    def prob_and_backoff(self, context: tuple[int, ...], word: int) -> tuple[float, bool]:
        ctx = (context[-2], context[-1])
        if self.vocab_size is not None:
            for wid in (*ctx, word):
                if not 0 <= wid < self.vocab_size:
                    raise ParameterError(
                        "word id %d out of range [0, %d)" % (wid, self.vocab_size)
                    )
        p = self.level.seen_prob(ctx, word)
        if p is not None:
            return p, False
        alpha = self.level.alphas.get(ctx, 1.0)
        return alpha * self._backoff_prob(ctx, word), True

    def prob(self, context: tuple[int, ...], word: int) -> float:
        return self.prob_and_backoff(context, word)[0]


def build_katz_trigram(
    counts: NgramCounts,
    backoff,
    k_gt: int = DEFAULT_GT_THRESHOLD,
    truncation: int = 1,
    discounts: dict[int, float] | None = None,
) -> KatzTrigram:
    """Katz trigram level from (optionally truncated) counts.

    Trigrams below the truncation threshold are dropped from the stored
    table, but context totals and the discount statistics come from the full
    table, so the dropped probability mass is redistributed to the backoff
    model rather than inflating the survivors.
    """
    if not counts.trigrams:
        raise DataError("empty trigram table")
    if discounts is None:
        discounts = good_turing_discounts(counts.trigrams, k_gt)
    if truncation > 1:
        table = truncate_counts(counts, truncation).trigrams
        totals = dict(counts.trigram_context_totals())
    else:
        table = counts.trigrams
        totals = None
    return KatzTrigram(
        table,
        backoff,
        k_gt,
        discounts=discounts,
        context_totals=totals,
        vocab_size=counts.vocab_size,
    )


def truncate_counts(counts: NgramCounts, threshold: int) -> NgramCounts:
    """Drop trigram entries occurring fewer than `threshold` times.

    Unigram, bigram, and skip tables are untouched; threshold 1 is the
    identity.
    """
    if threshold < 1:
        raise ParameterError("truncation threshold must be >= 1")
    out = NgramCounts(counts.vocab_size, counts.max_order, counts.skip_ks)
    out.unigrams = Counter(counts.unigrams)
    out.bigrams = Counter(counts.bigrams)
    out.trigrams = Counter(
        {key: n for key, n in counts.trigrams.items() if n >= threshold}
    )
    for k in counts.skip_ks:
        out.skips[k] = Counter(counts.skips[k])
    out.total = counts.total
    return out


class SmoothedCascade:
    """A fitted chain of smoothing levels with an aggregate base.

    Levels from the bottom: aggregate base, interpolated bigram, mixed-order
    levels of increasing order, and optionally a Katz-discounted trigram.
    The `top` attribute is the conditional model implementing the chain.
    """

    def __init__(
        self,
        counts: NgramCounts,
        base: AggregateModel,
        interp: InterpolationParams,
        mixed_levels: list[tuple[MixedOrderModel, MixedSmoothingParams]],
        trigram: KatzTrigram | None = None,
        gt_threshold: int = DEFAULT_GT_THRESHOLD,
        truncation: int = 1,
    ):
        self.counts = counts
        self.base = base
        self.ml_bigram = MLBigram.from_counts(counts)
        self.interp = interp
        self.mixed_levels = mixed_levels
        self.trigram = trigram
        self.gt_threshold = gt_threshold
        self.truncation = truncation

        level = InterpolatedBigram(self.ml_bigram, base, interp)
        self.level_stack = [level]
        for model, params in mixed_levels:
            level = SmoothedMixedLevel(model, params, level)
            self.level_stack.append(level)
        self.top = trigram if trigram is not None else level
        self.context_size = self.top.context_size

    def prob(self, context: tuple[int, ...], word: int) -> float:
        return self.top.prob(context, word)

    def prob_and_backoff(self, context: tuple[int, ...], word: int):
        if self.trigram is not None:
            return self.trigram.prob_and_backoff(context, word)
        return self.top.prob(context, word), False

    @classmethod
    def fit(
        cls,
        counts: NgramCounts,
        base: AggregateModel,
        mixed_models: list[MixedOrderModel],
        validation: list[TokenSentence],
        with_trigram: bool = False,
        gt_threshold: int = DEFAULT_GT_THRESHOLD,
        truncation: int = 1,
        tied: bool = False,
    ) -> "SmoothedCascade":
        """Fit all smoothing parameters bottom-up on the validation corpus.

        `mixed_models` must be trained models of consecutive orders 2..m
        (possibly empty for a bigram-only cascade).
        """
        orders = [mm.order for mm in mixed_models]
        if orders != list(range(2, 2 + len(mixed_models))):
            raise ParameterError(
                "mixed models must have consecutive orders starting at 2, got %r"
                % orders
            )
        ml = MLBigram.from_counts(counts)
        interp = fit_interpolation(ml, base, validation, tied=tied)
        level = InterpolatedBigram(ml, base, interp)
        mixed_levels = []
        for model in mixed_models:
            params = fit_mixed_smoothing(model, level, validation, tied=tied)
            mixed_levels.append((model, params))
            level = SmoothedMixedLevel(model, params, level)
        trigram = None
        if with_trigram:
            if level.context_size > 2:
                raise ParameterError(
                    "trigram level requires a backoff conditioning on at most 2 words"
                )
            trigram = build_katz_trigram(
                counts, level, k_gt=gt_threshold, truncation=truncation
            )
        return cls(counts, base, interp, mixed_levels, trigram, gt_threshold, truncation)


def write_cascade_manifest(
    path,
    counts_path: str,
    base_path: str,
    interp_sigma_path: str,
    mixed_paths: list[tuple[str, str]],
    gt_path: str | None = None,
    gt_threshold: int = DEFAULT_GT_THRESHOLD,
    truncation: int = 1,
) -> None:
    """Write the text manifest tying together the files of a fitted cascade.

    All paths are stored relative to the manifest's directory and must not
    contain whitespace.
    """
    base_dir = os.path.dirname(os.path.abspath(path))

    def rel(p: str) -> str:
        r = os.path.relpath(os.path.abspath(p), base_dir)
        if any(ch.isspace() for ch in r):
            raise ParameterError("manifest paths must not contain whitespace: %r" % r)
        return r

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("CASCADE v1\n")
        fh.write("counts %s\n" % rel(counts_path))
        fh.write("base aggregate %s\n" % rel(base_path))
        fh.write("level 1 bigram %s\n" % rel(interp_sigma_path))
        for order, (model_path, sigma_path) in enumerate(mixed_paths, start=2):
            fh.write("level %d mixed %s %s\n" % (order, rel(model_path), rel(sigma_path)))
        if gt_path is not None:
            fh.write(
                "trigram %s kgt=%d truncate=%d\n" % (rel(gt_path), gt_threshold, truncation)
            )


def load_cascade(path) -> SmoothedCascade:
    """Assemble a fitted cascade from its manifest and referenced files."""
    base_dir = os.path.dirname(os.path.abspath(path))

    def resolve(p: str) -> str:
        return os.path.join(base_dir, p)

    counts = None
    base = None
    interp = None
    mixed_entries: list[tuple[MixedOrderModel, MixedSmoothingParams]] = []
    trigram_entry = None
    with open(path, encoding="utf-8") as fh:
        if fh.readline().split() != ["CASCADE", "v1"]:
            raise DataError("not a cascade manifest: %s" % path)
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "counts":
                counts = NgramCounts.load(resolve(parts[1]))
            elif parts[0] == "base":
                base = AggregateModel.load(resolve(parts[2]))
            elif parts[0] == "level" and parts[2] == "bigram":
                interp = InterpolationParams.load(resolve(parts[3]))
            elif parts[0] == "level" and parts[2] == "mixed":
                model = MixedOrderModel.load(resolve(parts[3]))
                params = MixedSmoothingParams.load(resolve(parts[4]))
                mixed_entries.append((model, params))
            elif parts[0] == "trigram":
                fields = dict(p.split("=", 1) for p in parts[2:])
                trigram_entry = (
                    resolve(parts[1]),
                    int(fields["kgt"]),
                    int(fields["truncate"]),
                )
            else:
                raise DataError("unrecognized manifest line %r" % line.rstrip())
    if counts is None or base is None or interp is None:
        raise DataError("cascade manifest is missing a required level: %s" % path)
    trigram = None
    gt_threshold = DEFAULT_GT_THRESHOLD
    truncation = 1
    if trigram_entry is not None:
        gt_file, gt_threshold, truncation = trigram_entry
        discounts = load_discounts(gt_file)
        ml = MLBigram.from_counts(counts)
        level = InterpolatedBigram(ml, base, interp)
        for model, params in mixed_entries:
            level = SmoothedMixedLevel(model, params, level)
        trigram = build_katz_trigram(
            counts, level, k_gt=gt_threshold, truncation=truncation, discounts=discounts
        )
    return SmoothedCascade(
        counts, base, interp, mixed_entries, trigram, gt_threshold, truncation
    )
