"""Corpus ingestion: vocabularies, tokenization, and sparse n-gram counting.

Corpus files are UTF-8 text, one sentence per line, tokens separated by
whitespace.  Three reserved tokens occupy the first vocabulary ids:
start-of-sentence (0), end-of-sentence (1), and unknown (2).

Counting conventions: every sentence w_1..w_n yields n+1 prediction events,
one per interior word plus one for the end marker.  The start marker is
repeated on the left as far back as the largest configured skip distance
requires, so a skip-k pair is defined at every event position.
"""

from __future__ import annotations

import itertools
from collections import Counter
from collections.abc import Iterable, Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor

from .errors import DataError, ParameterError

START_TOKEN = "<s>"
END_TOKEN = "</s>"
UNK_TOKEN = "<unk>"

START_ID = 0
END_ID = 1
UNK_ID = 2

_RESERVED = (START_TOKEN, END_TOKEN, UNK_TOKEN)

TokenSentence = list[int]


class Vocabulary:
    """Bidirectional word/id map with fixed reserved ids.

    Ids form a bijection onto 0..V-1; looking up a surface form that is not
    stored returns the unknown id.
    """

    def __init__(self, words: Sequence[str]):
        if tuple(words[:3]) != _RESERVED:
            raise ParameterError(
                "vocabulary must start with the reserved tokens %r" % (_RESERVED,)
            )
        self.words = list(words)
        self.ids = {w: i for i, w in enumerate(self.words)}
        if len(self.ids) != len(self.words):
            raise ParameterError("vocabulary contains duplicate surface forms")

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.ids

    @property
    def size(self) -> int:
        return len(self.words)

    def id_of(self, word: str) -> int:
        return self.ids.get(word, UNK_ID)

    def word_of(self, wid: int) -> str:
        return self.words[wid]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for w in self.words:
                fh.write(w + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            words = [line.rstrip("\n") for line in fh]
        if not words:
            raise DataError("empty vocabulary file: %s" % path)
        return cls(words)


def build_vocabulary(lines: Iterable[str], max_size: int) -> Vocabulary:
    """Build a vocabulary of the most frequent surface forms.

    Keeps the 3 reserved tokens plus the (max_size - 3) most frequent forms;
    frequency ties break lexicographically.  Raises DataError on an empty
    corpus (no tokens at all).
    """
    if max_size < 4:
        raise ParameterError("max_size must be at least 4, got %d" % max_size)
    freqs: Counter[str] = Counter()
    for line in lines:
        for tok in line.split():
            if tok in _RESERVED:
                continue
            freqs[tok] += 1
    if not freqs:
        raise DataError("empty corpus")
    ranked = sorted(freqs.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [w for w, _ in ranked[: max_size - 3]]
    return Vocabulary(list(_RESERVED) + kept)


def tokenize(line: str, vocab: Vocabulary) -> TokenSentence:
    """Map a line to interior word ids; OOV forms map to the unknown id.

    Literal occurrences of the start/end marker strings also map to unknown,
    so no interior token ever carries a boundary id.
    """
    out = []
    for tok in line.split():
        wid = vocab.id_of(tok)
        out.append(UNK_ID if wid in (START_ID, END_ID) else wid)
    return out


def tokenize_corpus(lines: Iterable[str], vocab: Vocabulary) -> list[TokenSentence]:
    return [tokenize(line, vocab) for line in lines]


def read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


class NgramCounts:
    """Sparse n-gram and skip-k pair counts plus the total event count.

    Attributes:
        unigrams: Counter of predicted tokens N(w) (interior + end events).
        bigrams: Counter over (w1, w2) pairs, present when max_order >= 2.
        trigrams: Counter over (w1, w2, w3) triples, when max_order == 3.
        skips: per-k Counter of pairs (w at t-k, w at t).
        total: number of prediction events N.
        vocab_size: V, carried for model dimensioning.
    """

    def __init__(self, vocab_size: int, max_order: int, skip_ks: tuple[int, ...]):
        if max_order not in (1, 2, 3):
            raise ParameterError("max_order must be 1, 2, or 3, got %r" % max_order)
        if any(k < 1 for k in skip_ks):
            raise ParameterError("skip distances must be >= 1, got %r" % (skip_ks,))
        self.vocab_size = vocab_size
        self.max_order = max_order
        self.skip_ks = tuple(sorted(set(skip_ks)))
        self.unigrams: Counter[int] = Counter()
        self.bigrams: Counter[tuple[int, int]] = Counter()
        self.trigrams: Counter[tuple[int, int, int]] = Counter()
        self.skips: dict[int, Counter[tuple[int, int]]] = {
            k: Counter() for k in self.skip_ks
        }
        self.total = 0

    @property
    def pad(self) -> int:
        """Number of start markers prepended before the first interior word."""
        return max(self.skip_ks + (self.max_order - 1,))

    def add_sentence(self, sentence: TokenSentence) -> None:
        pad = self.pad
        padded = [START_ID] * pad + list(sentence) + [END_ID]
        for i in range(pad, len(padded)):
            w = padded[i]
            self.unigrams[w] += 1
            if self.max_order >= 2:
                self.bigrams[(padded[i - 1], w)] += 1
            if self.max_order >= 3:
                self.trigrams[(padded[i - 2], padded[i - 1], w)] += 1
            for k in self.skip_ks:
                self.skips[k][(padded[i - k], w)] += 1
            self.total += 1

    def __add__(self, other: "NgramCounts") -> "NgramCounts":
        if (self.vocab_size, self.max_order, self.skip_ks) != (
            other.vocab_size,
            other.max_order,
            other.skip_ks,
        ):
            raise ParameterError("cannot merge counts with different configurations")
        merged = NgramCounts(self.vocab_size, self.max_order, self.skip_ks)
        merged.unigrams = self.unigrams + other.unigrams
        merged.bigrams = self.bigrams + other.bigrams
        merged.trigrams = self.trigrams + other.trigrams
        for k in self.skip_ks:
            merged.skips[k] = self.skips[k] + other.skips[k]
        merged.total = self.total + other.total
        return merged

    def bigram_row_totals(self) -> Counter:
        totals: Counter[int] = Counter()
        for (w1, _), n in self.bigrams.items():
            totals[w1] += n
        return totals

    def trigram_context_totals(self) -> Counter:
        totals: Counter[tuple[int, int]] = Counter()
        for (u, v, _), n in self.trigrams.items():
            totals[(u, v)] += n
        return totals

    def save(self, path) -> None:
        """Write the sorted sparse text format (one entry per line)."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(
                "NGRAM-COUNTS v1 order=%d skips=%s\n"
                % (self.max_order, ",".join(str(k) for k in self.skip_ks))
            )
            fh.write("V %d\n" % self.vocab_size)
            fh.write("N %d\n" % self.total)
            for w, n in sorted(self.unigrams.items()):
                fh.write("U %d %d\n" % (w, n))
            for (w1, w2), n in sorted(self.bigrams.items()):
                fh.write("B %d %d %d\n" % (w1, w2, n))
            for (w1, w2, w3), n in sorted(self.trigrams.items()):
                fh.write("T %d %d %d %d\n" % (w1, w2, w3, n))
            for k in self.skip_ks:
                for (w1, w2), n in sorted(self.skips[k].items()):
                    fh.write("S %d %d %d %d\n" % (k, w1, w2, n))

    @classmethod
    def load(cls, path) -> "NgramCounts":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if header[:2] != ["NGRAM-COUNTS", "v1"]:
                raise DataError("not a counts file: %s" % path)
            fields = dict(part.split("=", 1) for part in header[2:])
            max_order = int(fields["order"])
            skip_ks = tuple(
                int(k) for k in fields["skips"].split(",") if k
            )
            counts = None
            vocab_size = 0
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                tag = parts[0]
                if tag == "V":
                    vocab_size = int(parts[1])
                    counts = cls(vocab_size, max_order, skip_ks)
                elif counts is None:
                    raise DataError("counts file missing V header line: %s" % path)
                elif tag == "N":
                    counts.total = int(parts[1])
                elif tag == "U":
                    counts.unigrams[int(parts[1])] = int(parts[2])
                elif tag == "B":
                    counts.bigrams[(int(parts[1]), int(parts[2]))] = int(parts[3])
                elif tag == "T":
                    counts.trigrams[(int(parts[1]), int(parts[2]), int(parts[3]))] = int(
                        parts[4]
                    )
                elif tag == "S":
                    counts.skips[int(parts[1])][(int(parts[2]), int(parts[3]))] = int(
                        parts[4]
                    )
                else:
                    raise DataError("unrecognized counts line %r" % line.rstrip())
        if counts is None:
            raise DataError("counts file missing V header line: %s" % path)
        return counts


def _count_shard(args) -> NgramCounts:
    sentences, vocab_size, max_order, skip_ks = args
    counts = NgramCounts(vocab_size, max_order, skip_ks)
    for s in sentences:
        counts.add_sentence(s)
    return counts


def count_ngrams(
    sentences: Iterable[TokenSentence],
    vocab: Vocabulary,
    max_order: int = 2,
    skips: Iterable[int] = (1,),
    workers: int = 1,
) -> NgramCounts:
    """Accumulate n-gram and skip-k counts over tokenized sentences.

    With workers > 1 the sentence stream is sharded across processes and the
    shard counts merged by entrywise addition; the result is identical to
    sequential counting.
    """
    skip_ks = tuple(sorted(set(skips)))
    if workers > 1:
        sentences = list(sentences)
        shard_size = max(1, (len(sentences) + workers - 1) // workers)
        shards = [
            (sentences[i : i + shard_size], len(vocab), max_order, skip_ks)
            for i in range(0, len(sentences), shard_size)
        ]
        if len(shards) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_count_shard, shards))
            merged = parts[0]
            for part in parts[1:]:
                merged = merged + part
            return merged
        sentences = iter(shards[0][0]) if shards else iter(())
    counts = NgramCounts(len(vocab), max_order, skip_ks)
    for s in sentences:
        counts.add_sentence(s)
    return counts


def padded_events(
    sentence: TokenSentence, context_size: int
) -> Iterator[tuple[tuple[int, ...], int]]:
    """Yield (context, predicted word) for each of the n+1 prediction events.

    The context holds the preceding context_size ids in sentence order, most
    recent last, padded on the left with the start id.
    """
    padded = [START_ID] * context_size + list(sentence) + [END_ID]
    for i in range(context_size, len(padded)):
        yield tuple(padded[i - context_size : i]), padded[i]


def iter_events(
    sentences: Iterable[TokenSentence], context_size: int
) -> Iterator[tuple[tuple[int, ...], int]]:
    return itertools.chain.from_iterable(
        padded_events(s, context_size) for s in sentences
    )
