"""Tokenization and TSV dataset ingestion for the sentiment and entailment tasks."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import ContractViolation, ParseError

SENTIMENT_LABELS = ("negative", "positive")
ENTAILMENT_LABELS = ("entailment", "neutral", "contradiction")

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(raw_text: str) -> list[str]:
    """Lowercase, isolate every punctuation character, drop whitespace."""
    return _TOKEN_RE.findall(raw_text.lower())


def detokenize(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


@dataclass(frozen=True)
class Document:
    """A token sequence together with the original it was derived from.

    Substitutions never change the length, so ``modified_mask`` is simply a
    positionwise comparison against ``origin_tokens``.
    """

    tokens: tuple[str, ...]
    origin_tokens: tuple[str, ...]
    modified_mask: tuple[bool, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tokens = tuple(self.tokens)
        origin = tuple(self.origin_tokens)
        if len(tokens) != len(origin):
            raise ContractViolation(
                f"document length {len(tokens)} differs from origin length {len(origin)}"
            )
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "origin_tokens", origin)
        object.__setattr__(self, "modified_mask", tuple(a != b for a, b in zip(tokens, origin)))

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> Document:
        return cls(tuple(tokens), tuple(tokens))

    @classmethod
    def from_text(cls, text: str) -> Document:
        return cls.from_tokens(tokenize(text))

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def num_modified(self) -> int:
        return sum(self.modified_mask)

    @property
    def modified_fraction(self) -> float:
        if not self.tokens:
            return 0.0
        return self.num_modified / len(self.tokens)

    def replace(self, position: int, token: str) -> Document:
        tokens = list(self.tokens)
        tokens[position] = token
        return Document(tuple(tokens), self.origin_tokens)

    def with_tokens(self, tokens: Sequence[str]) -> Document:
        return Document(tuple(tokens), self.origin_tokens)

    def text(self) -> str:
        return detokenize(self.tokens)


@dataclass(frozen=True)
class LabeledExample:
    """``documents`` holds one document (sentiment) or premise + hypothesis."""

    label: int
    documents: tuple[Document, ...]

    def __post_init__(self):
        if len(self.documents) not in (1, 2):
            raise ContractViolation("an example carries one or two documents")

    @property
    def task(self) -> str:
        return "sentiment" if len(self.documents) == 1 else "entailment"

    @property
    def attacked(self) -> Document:
        """The document an attacker may modify (the hypothesis for entailment)."""
        return self.documents[-1]

    @property
    def premise(self) -> Document | None:
        return self.documents[0] if len(self.documents) == 2 else None

    def with_attacked(self, doc: Document) -> LabeledExample:
        return LabeledExample(self.label, self.documents[:-1] + (doc,))


def _read_lines(path):
    with open(Path(path), encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line.endswith("\r"):
                line = line[:-1]
            if not line.strip():
                continue
            yield lineno, line


def load_sentiment_dataset(path, max_length: int | None = 100) -> list[LabeledExample]:
    """Read ``label<TAB>text`` lines with labels in {0, 1}."""
    examples = []
    for lineno, line in _read_lines(path):
        fields = line.split("\t")
        if len(fields) != 2:
            raise ParseError(f"expected 2 tab-separated fields, got {len(fields)}", lineno)
        try:
            label = int(fields[0])
        except ValueError:
            raise ParseError(f"non-integer label {fields[0]!r}", lineno) from None
        if label not in (0, 1):
            raise ParseError(f"label {label} out of range [0, 2)", lineno)
        tokens = tokenize(fields[1])
        if max_length is not None:
            tokens = tokens[:max_length]
        examples.append(LabeledExample(label, (Document.from_tokens(tokens),)))
    return examples


def load_entailment_dataset(path, max_length: int | None = None) -> list[LabeledExample]:
    """Read ``label<TAB>premise<TAB>hypothesis`` lines."""
    label_ids = {name: i for i, name in enumerate(ENTAILMENT_LABELS)}
    examples = []
    for lineno, line in _read_lines(path):
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(f"expected 3 tab-separated fields, got {len(fields)}", lineno)
        if fields[0] not in label_ids:
            raise ParseError(f"unknown label {fields[0]!r}", lineno)
        docs = []
        for text in fields[1:]:
            tokens = tokenize(text)
            if max_length is not None:
                tokens = tokens[:max_length]
            docs.append(Document.from_tokens(tokens))
        examples.append(LabeledExample(label_ids[fields[0]], tuple(docs)))
    return examples


def load_dataset(path, task: str, max_length: int | None = None) -> list[LabeledExample]:
    if task == "sentiment":
        return load_sentiment_dataset(path, 100 if max_length is None else max_length)
    if task == "entailment":
        return load_entailment_dataset(path, max_length)
    raise ContractViolation(f"unknown task {task!r}")


def write_dataset(examples: Sequence[LabeledExample], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            if ex.task == "sentiment":
                label = str(ex.label)
            else:
                label = ENTAILMENT_LABELS[ex.label]
            fh.write("\t".join([label] + [d.text() for d in ex.documents]) + "\n")
