"""POS/NER tagging surface and probabilistic delexicalization.

Two ways to obtain tags: the built-in deterministic rule tagger
(tag_lexicon) or a pre-tagged interchange file written by any external
tagger (parse_tagged / write_tagged). Delexicalization draws one uniform
per token from a keyed counter RNG, so masking a document is independent
of corpus order and safe to parallelize.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

from varid.errors import DataError, InputFormatError
from varid.features import iter_tokens
from varid.lexicon import NER, POS, Lexicon
from varid.util import mask_draw

DEFAULT_MASKABLE = frozenset({POS.NOUN, POS.PROPN, POS.VERB, POS.ADJ})

_SENTENCE_FINAL = frozenset({".", "!", "?", "…"})


@dataclass(frozen=True, slots=True)
class TaggedToken:
    surface: str
    pos: POS
    ner: NER
    start: int
    end: int


@dataclass(frozen=True)
class DelexPolicy:
    """Masking probabilities, maskable POS subset, and masking seed."""

    p_pos: float
    p_ner: float
    pos_maskable: frozenset = DEFAULT_MASKABLE
    seed: int = 0

    def __post_init__(self):
        for name in ("p_pos", "p_ner"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")

    def to_json(self) -> dict:
        return {
            "p_pos": self.p_pos,
            "p_ner": self.p_ner,
            "pos_maskable": sorted(tag.value for tag in self.pos_maskable),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DelexPolicy":
        return cls(
            p_pos=float(obj["p_pos"]),
            p_ner=float(obj["p_ner"]),
            pos_maskable=frozenset(POS(tag) for tag in obj["pos_maskable"]),
            seed=int(obj["seed"]),
        )


def validate_tokens(text: str, tokens: Sequence[TaggedToken], doc_id: str) -> None:
    """Check span integrity: strictly increasing, non-overlapping, surfaces match."""
    prev_end = 0
    for tok in tokens:
        if tok.start < prev_end or tok.end <= tok.start:
            raise DataError(f"document {doc_id!r}: overlapping or empty token spans")
        if text[tok.start : tok.end] != tok.surface:
            raise DataError(
                f"document {doc_id!r}: surface {tok.surface!r} does not match "
                f"text at [{tok.start}:{tok.end}]"
            )
        prev_end = tok.end


def tag_lexicon(text: str, lexicon: Lexicon) -> list[TaggedToken]:
    """Deterministic rule tagger: gazetteer, word lists, then suffix rules.

    Unknown capitalized tokens that are not sentence-initial become
    PROPN/MISC; unknown lowercase tokens fall back to suffix rules, then
    NOUN. Every token gets exactly one POS and one NER tag.
    """
    raw = list(iter_tokens(text))
    tokens: list[TaggedToken] = [None] * len(raw)  # type: ignore[list-item]
    sentence_initial = True
    i = 0
    while i < len(raw):
        surface, start, end = raw[i]
        matched = _match_gazetteer(lexicon, raw, i)
        if matched:
            phrase_len, ner = matched
            for k in range(i, i + phrase_len):
                s, st, en = raw[k]
                tokens[k] = TaggedToken(s, POS.PROPN, ner, st, en)
            sentence_initial = False
            i += phrase_len
            continue
        tokens[i] = TaggedToken(
            surface, _classify(lexicon, surface, sentence_initial), NER.NONE, start, end
        )
        if surface[0].isalnum():
            sentence_initial = False
        elif surface in _SENTENCE_FINAL:
            sentence_initial = True
        i += 1
    return tokens


def _match_gazetteer(lexicon: Lexicon, raw, i) -> tuple[int, NER] | None:
    options = lexicon._phrase_starts.get(raw[i][0].casefold())
    if not options:
        return None
    for phrase, ner in options:  # longest first
        if i + len(phrase) > len(raw):
            continue
        if all(raw[i + k][0].casefold() == phrase[k] for k in range(len(phrase))):
            return len(phrase), ner
    return None


def _classify(lexicon: Lexicon, surface: str, sentence_initial: bool) -> POS:
    first = surface[0]
    if not first.isalnum():
        return POS.PUNCT if len(surface) == 1 else POS.OTHER
    if first.isdigit():
        return POS.NUM
    lowered = surface.lower()
    tag = lexicon.pos.get(lowered)
    if tag is not None:
        return tag
    if first.isupper() and not sentence_initial:
        return POS.PROPN
    return lexicon.suffix_pos(lowered) or POS.NOUN


def ner_for(tokens: Iterable[TaggedToken]) -> NER:
    """NER tag of the first entity token, NONE when there is none."""
    for tok in tokens:
        if tok.ner is not NER.NONE:
            return tok.ner
    return NER.NONE


def tag_documents(docs, lexicon: Lexicon) -> dict[str, list[TaggedToken]]:
    return {doc.id: tag_lexicon(doc.text, lexicon) for doc in docs}


# --- tagged interchange format -------------------------------------------------
#
# One token per line: surface<TAB>pos<TAB>ner<TAB>start<TAB>end.
# Documents start with "# id = <doc-id>" and are separated by a blank line.


def write_tagged(tags: dict[str, list[TaggedToken]], out: TextIO) -> None:
    first = True
    for doc_id, tokens in tags.items():
        if not first:
            out.write("\n")
        first = False
        out.write(f"# id = {doc_id}\n")
        for tok in tokens:
            if "\t" in tok.surface or "\n" in tok.surface:
                raise ValueError(
                    f"document {doc_id!r}: surface contains tab/newline, "
                    "not representable in the interchange format"
                )
            out.write(
                f"{tok.surface}\t{tok.pos.value}\t{tok.ner.value}\t{tok.start}\t{tok.end}\n"
            )


def parse_tagged(
    stream: Iterable[str], texts: dict[str, str] | None = None
) -> dict[str, list[TaggedToken]]:
    """Parse the tagged interchange format; round-trips with write_tagged.

    Tags outside the POS/NER enums raise InputFormatError with the line
    number; span-integrity violations raise DataError naming the document.
    When ``texts`` is given, spans are validated against the document text.
    """
    tags: dict[str, list[TaggedToken]] = {}
    current: str | None = None
    prev_end = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            current = None
            continue
        if line.startswith("# id = "):
            current = line[len("# id = ") :].strip()
            if not current:
                raise InputFormatError(f"line {lineno}: empty document id")
            if current in tags:
                raise InputFormatError(f"line {lineno}: duplicate document id {current!r}")
            tags[current] = []
            prev_end = 0
            continue
        if current is None:
            raise InputFormatError(f"line {lineno}: token line outside any document")
        fields = line.split("\t")
        if len(fields) != 5:
            raise InputFormatError(
                f"line {lineno}: expected surface<TAB>pos<TAB>ner<TAB>start<TAB>end"
            )
        surface, pos_str, ner_str, start_str, end_str = fields
        if pos_str not in POS.__members__:
            raise InputFormatError(f"line {lineno}: unknown POS tag {pos_str!r}")
        if ner_str not in NER.__members__:
            raise InputFormatError(f"line {lineno}: unknown NER tag {ner_str!r}")
        try:
            start, end = int(start_str), int(end_str)
        except ValueError as exc:
            raise InputFormatError(f"line {lineno}: spans must be integers") from exc
        if start < prev_end or end <= start:
            raise DataError(f"document {current!r}: overlapping or empty token spans")
        prev_end = end
        tags[current].append(TaggedToken(surface, POS[pos_str], NER[ner_str], start, end))
    if texts is not None:
        for doc_id, tokens in tags.items():
            if doc_id in texts:
                validate_tokens(texts[doc_id], tokens, doc_id)
    return tags


def read_tagged(path, texts: dict[str, str] | None = None) -> dict[str, list[TaggedToken]]:
    with open(path, encoding="utf-8") as fh:
        return parse_tagged(fh, texts)


# --- delexicalization ----------------------------------------------------------


def delexicalize(
    text: str, tokens: Sequence[TaggedToken], policy: DelexPolicy, doc_id: str
) -> str:
    """Replace tokens with their tag names with the policy's probabilities.

    Each token gets one independent uniform draw keyed by
    (policy.seed, doc_id, token index). Entity tokens are drawn against
    p_ner only (never against p_pos as well); non-entity tokens whose POS
    is maskable are drawn against p_pos. Inter-token gaps are preserved,
    so a (0, 0) policy reproduces the input exactly.
    """
    validate_tokens(text, tokens, doc_id)
    parts: list[str] = []
    prev_end = 0
    for index, tok in enumerate(tokens):
        parts.append(text[prev_end : tok.start])
        replacement = tok.surface
        if tok.ner is not NER.NONE:
            if policy.p_ner > 0.0 and mask_draw(policy.seed, doc_id, index) < policy.p_ner:
                replacement = tok.ner.value
        elif tok.pos in policy.pos_maskable:
            if policy.p_pos > 0.0 and mask_draw(policy.seed, doc_id, index) < policy.p_pos:
                replacement = tok.pos.value
        parts.append(replacement)
        prev_end = tok.end
    parts.append(text[prev_end:])
    return "".join(parts)
