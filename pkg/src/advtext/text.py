"""Word-level tokenization, lexicon POS tagging, and dataset I/O."""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, replace

from .errors import EmptyTextError, LabelOutOfRangeError, ParseError

NOUN = "NOUN"
VERB = "VERB"
ADJ = "ADJ"
ADV = "ADV"
OTHER = "OTHER"
UNKNOWN = "UNKNOWN"

POS_TAGS = frozenset({NOUN, VERB, ADJ, ADV, OTHER})

# Texts are truncated to this many tokens at ingestion.
MAX_TOKENS = 512

_PUNCT = set(string.punctuation)


@dataclass(frozen=True)
class Token:
    """One word (or punctuation mark) of a tokenized text."""

    surface: str
    normalized: str
    pos: str = UNKNOWN
    vocab_id: int | None = None

    def is_punct(self) -> bool:
        return all(c in _PUNCT for c in self.surface)


@dataclass(frozen=True)
class TokenizedText:
    """An ordered, immutable token sequence plus the raw string it came from."""

    tokens: tuple[Token, ...]
    origin: str

    def __len__(self) -> int:
        return len(self.tokens)

    def words(self) -> list[str]:
        return [t.normalized for t in self.tokens]

    def replace_token(self, i: int, word: str, pos: str = UNKNOWN) -> "TokenizedText":
        """Return a copy with token i swapped for `word`."""
        new = Token(surface=word, normalized=word.lower(), pos=pos)
        toks = self.tokens[:i] + (new,) + self.tokens[i + 1 :]
        return TokenizedText(tokens=toks, origin=self.origin)

    def delete_token(self, i: int) -> "TokenizedText":
        toks = self.tokens[:i] + self.tokens[i + 1 :]
        return TokenizedText(tokens=toks, origin=self.origin)

    def delete_tokens(self, indices) -> "TokenizedText":
        drop = set(indices)
        toks = tuple(t for j, t in enumerate(self.tokens) if j not in drop)
        return TokenizedText(tokens=toks, origin=self.origin)


@dataclass(frozen=True)
class LabeledExample:
    text: TokenizedText
    label: int


@dataclass
class Dataset:
    examples: list[LabeledExample]
    class_names: list[str]
    split: str = "train"

    def __len__(self) -> int:
        return len(self.examples)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


def _split_chunk(chunk: str) -> list[tuple[str, bool]]:
    """Split one whitespace-delimited chunk into (piece, is_punct) parts.

    Leading and trailing punctuation characters become their own pieces;
    internal punctuation (contractions, hyphens) stays attached to the core.
    """
    lead = 0
    while lead < len(chunk) and chunk[lead] in _PUNCT:
        lead += 1
    trail = len(chunk)
    while trail > lead and chunk[trail - 1] in _PUNCT:
        trail -= 1
    parts: list[tuple[str, bool]] = []
    parts.extend((c, True) for c in chunk[:lead])
    core = chunk[lead:trail]
    if core:
        parts.append((core, False))
    parts.extend((c, True) for c in chunk[trail:])
    return parts


def tokenize(raw: str, max_tokens: int = MAX_TOKENS) -> TokenizedText:
    """Deterministic whitespace tokenization with edge punctuation split off.

    Raises EmptyTextError if `raw` contains no non-whitespace characters.
    """
    if not raw.strip():
        raise EmptyTextError("cannot tokenize empty or whitespace-only text")
    tokens: list[Token] = []
    for chunk in raw.split():
        for piece, is_punct in _split_chunk(chunk):
            pos = OTHER if is_punct else UNKNOWN
            tokens.append(Token(surface=piece, normalized=piece.lower(), pos=pos))
    return TokenizedText(tokens=tuple(tokens[:max_tokens]), origin=raw)


def detokenize(text: TokenizedText) -> str:
    """Join tokens with spaces, reattaching punctuation to the previous token."""
    out: list[str] = []
    for tok in text.tokens:
        if out and tok.is_punct():
            out[-1] += tok.surface
        else:
            out.append(tok.surface)
    return " ".join(out)


class POSLexicon:
    """Word -> most frequent POS tag, built from (word, tag, count) triples."""

    def __init__(self, best_tag: dict[str, str]):
        self._best = dict(best_tag)

    def __len__(self) -> int:
        return len(self._best)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self._best

    def tag(self, word: str) -> str:
        """Most frequent tag for `word`, or UNKNOWN when absent."""
        return self._best.get(word.lower(), UNKNOWN)

    @classmethod
    def from_counts(cls, counts: dict[str, dict[str, int]]) -> "POSLexicon":
        """Build from word -> {tag: count}. Count ties break alphabetically."""
        best = {}
        for word, tag_counts in counts.items():
            tag = min(tag_counts, key=lambda t: (-tag_counts[t], t))
            best[word.lower()] = tag
        return cls(best)

    @classmethod
    def load(cls, path) -> "POSLexicon":
        """Load from TSV lines `word<TAB>tag<TAB>count`."""
        counts: dict[str, dict[str, int]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) != 3:
                    raise ParseError("expected word<TAB>tag<TAB>count", line=lineno)
                word, tag, count_s = fields
                if tag not in POS_TAGS:
                    raise ParseError(f"unknown POS tag {tag!r}", line=lineno)
                try:
                    count = int(count_s)
                except ValueError:
                    raise ParseError(f"bad count {count_s!r}", line=lineno) from None
                counts.setdefault(word.lower(), {})
                counts[word.lower()][tag] = counts[word.lower()].get(tag, 0) + count
        return cls.from_counts(counts)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for word in sorted(self._best):
                fh.write(f"{word}\t{self._best[word]}\t1\n")


def pos_tag(text: TokenizedText, lexicon: POSLexicon) -> TokenizedText:
    """Return a copy of `text` with every token tagged from the lexicon.

    Punctuation keeps its OTHER tag; words absent from the lexicon get UNKNOWN.
    """
    tagged = []
    for tok in text.tokens:
        if tok.normalized in lexicon:
            tagged.append(replace(tok, pos=lexicon.tag(tok.normalized)))
        elif tok.is_punct():
            tagged.append(replace(tok, pos=OTHER))
        else:
            tagged.append(replace(tok, pos=UNKNOWN))
    return TokenizedText(tokens=tuple(tagged), origin=text.origin)


def load_dataset(path, split: str = "train", lexicon: POSLexicon | None = None) -> Dataset:
    """Load a JSON-lines dataset of {"text": str, "label": int} records.

    An optional first record {"class_names": [...]} declares the classes;
    otherwise the class count is inferred as max label + 1.
    """
    examples: list[LabeledExample] = []
    class_names: list[str] | None = None
    max_label = -1
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc}", line=lineno) from None
            if lineno == 1 and "class_names" in rec and "text" not in rec:
                class_names = [str(c) for c in rec["class_names"]]
                continue
            if "text" not in rec:
                raise ParseError('missing "text" field', line=lineno)
            if "label" not in rec:
                raise ParseError('missing "label" field', line=lineno)
            if not isinstance(rec["label"], int) or isinstance(rec["label"], bool):
                raise ParseError('"label" must be an integer', line=lineno)
            label = rec["label"]
            if label < 0:
                raise LabelOutOfRangeError(f"line {lineno}: negative label {label}")
            text = tokenize(str(rec["text"]))
            if lexicon is not None:
                text = pos_tag(text, lexicon)
            examples.append(LabeledExample(text=text, label=label))
            max_label = max(max_label, label)
    if class_names is None:
        class_names = [str(i) for i in range(max_label + 1)]
    for i, ex in enumerate(examples):
        if ex.label >= len(class_names):
            raise LabelOutOfRangeError(
                f"label {ex.label} out of range for {len(class_names)} classes"
            )
    return Dataset(examples=examples, class_names=class_names, split=split)


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"class_names": dataset.class_names}) + "\n")
        for ex in dataset.examples:
            rec = {"text": detokenize(ex.text), "label": ex.label}
            fh.write(json.dumps(rec) + "\n")
