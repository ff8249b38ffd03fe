"""Tokenization and linguistic annotation: word segmentation, coarse POS tags,
named-entity spans, and the stop-word list with pronouns folded in.

The default annotators are deterministic rule-based implementations so the full
pipeline runs offline; any is replaceable as long as the output schema holds.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

from .core import Edit, Perturbation, TokenizedText, apply_edits


class AnnotationError(Exception):
    """Annotation could not produce a valid TokenizedText for the input."""


WORD_RE = re.compile(r"[A-Za-z0-9]+(?:[-'’][A-Za-z0-9]+)*")

SENTENCE_BREAK_RE = re.compile(r"[.!?]")

# Coarse (universal-style) tagset.
NOUN, VERB, ADJ, ADV = "NOUN", "VERB", "ADJ", "ADV"
PRON, DET, ADP, NUM, CONJ, PRT, X = "PRON", "DET", "ADP", "NUM", "CONJ", "PRT", "X"

_DETERMINERS = {
    "a", "an", "the", "this", "that", "these", "those", "each", "every", "some",
    "any", "no", "all", "both", "either", "neither", "another", "such",
}
_PRONOUNS = {
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them",
    "my", "your", "his", "its", "our", "their", "mine", "yours", "hers", "ours",
    "theirs", "myself", "yourself", "himself", "herself", "itself", "ourselves",
    "yourselves", "themselves", "who", "whom", "whose", "which", "what",
    "something", "anything", "nothing", "everything", "someone", "anyone",
    "everyone", "nobody", "somebody", "anybody", "everybody",
    "i'm", "i'll", "i'd", "i've", "you're", "you'll", "you'd", "you've",
    "he's", "he'll", "she's", "she'll", "it's", "we're", "we'll", "we've",
    "they're", "they'll", "they've",
}
_ADPOSITIONS = {
    "in", "on", "at", "by", "for", "with", "about", "against", "between", "into",
    "through", "during", "before", "after", "above", "below", "from", "up",
    "down", "of", "off", "over", "under", "around", "near", "without", "within",
    "upon", "toward", "towards", "across", "behind", "beyond", "despite",
}
_CONJUNCTIONS = {
    "and", "or", "but", "nor", "so", "yet", "although", "because", "while",
    "if", "unless", "since", "when", "whereas", "though",
}
_BE_FORMS = {"be", "am", "is", "are", "was", "were", "been", "being",
             "isn't", "aren't", "wasn't", "weren't"}
_HAVE_FORMS = {"have", "has", "had", "haven't", "hasn't", "hadn't"}
_MODALS = {"will", "would", "shall", "should", "can", "could", "may", "might",
           "must", "won't", "wouldn't", "shouldn't", "can't", "couldn't",
           "do", "does", "did", "don't", "doesn't", "didn't"}
_NUMBER_WORDS = {
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
    "nine", "ten", "eleven", "twelve", "twenty", "thirty", "forty", "fifty",
    "hundred", "thousand", "million", "billion", "first", "second", "third",
}

_LEXICON: dict[str, str] = {}
for _w in (
    "good bad fine great wonderful terrible awful horrible nice pleasant big small "
    "little large long short high low old new young early late hard easy slow fast "
    "quick happy sad funny serious stunning silly stupid boring dull bright dark "
    "beautiful ugly strong weak rich poor full empty hot cold warm cool wrong right "
    "real fake true false best worst better worse top main whole free sure clear "
    "deep flat wild calm proud brave cheap grand plain vivid tender harsh gentle "
    "fierce subtle bland stale lame tame crisp bleak keen neat vast willing able "
    "entire certain favorite classic solid superb mediocre decent dreadful lousy "
    "splendid marvelous excellent outstanding brilliant poignant compelling clever "
    "predictable original fresh tired flawed perfect positive negative"
).split():
    _LEXICON[_w] = ADJ
for _w in (
    "very too quite rather really also well almost nearly maybe perhaps again "
    "still already ever never always often sometimes soon now then here there "
    "somewhat truly highly deeply barely hardly mostly"
).split():
    _LEXICON[_w] = ADV
for _w in (
    "film films movie movies time times story stories plot acting actor actors "
    "actress director cast scene scenes character characters music score script "
    "dialogue ending end beginning man men woman women people person world life "
    "way day days year years thing things work title kind spots spot reason "
    "audience performance performances effect effects humor drama comedy action "
    "thriller horror romance sequel masterpiece mess fun laugh laughs waste "
    "minute minutes hour hours night screen camera shot shots role roles line "
    "lines star stars book novel version part parts place places house city "
    "country family friend friends kid kids child children guy guys girl boy "
    "money job school week month moment chance idea point fact question problem "
    "food service staff restaurant hotel room experience price quality value"
).split():
    _LEXICON[_w] = NOUN
for _w in (
    "love like hate enjoy enjoys watch watched watching see sees saw seen make "
    "makes made making put push pushed take takes took taken give gives gave "
    "given believe believes believed think thinks thought know knows knew known "
    "want wants wanted feel feels felt go goes went gone come comes came get "
    "gets got gotten say says said tell tells told find finds found show shows "
    "showed shown look looks looked seem seems seemed play plays played run "
    "runs ran keep keeps kept let lets begin begins began become becomes became "
    "leave leaves left bring brings brought happen happens happened write writes "
    "wrote written sit sits sat stand stands stood lose loses lost pay pays paid "
    "meet meets met recommend recommended avoid avoided deserve deserves deserved"
).split():
    _LEXICON[_w] = VERB

_ADJ_SUFFIXES = ("ous", "ful", "ive", "able", "ible", "al", "ish", "ary",
                 "less", "ic", "ical", "est")
_NOUN_SUFFIXES = ("tion", "sion", "ment", "ness", "ity", "ance", "ence",
                  "ship", "hood", "ism", "ist", "ure")
_VERB_SUFFIXES = ("ize", "ise", "ify", "ate")

_NUMERIC_RE = re.compile(r"\d+(?:[.,]\d+)*(?:st|nd|rd|th|s)?$")


def _normalize_apostrophes(word: str) -> str:
    return word.replace("’", "'").lower()


def tokenize(text: str) -> list[tuple[str, int, int]]:
    """Split a text into (word, start, end) triples; punctuation between words
    is not tokenized and survives untouched in the source string."""
    return [(m.group(), m.start(), m.end()) for m in WORD_RE.finditer(text)]


def _closed_class_tag(lowered: str) -> Optional[str]:
    if lowered in _DETERMINERS:
        return DET
    if lowered in _PRONOUNS:
        return PRON
    if lowered in _ADPOSITIONS:
        return ADP
    if lowered in _CONJUNCTIONS:
        return CONJ
    if lowered in _BE_FORMS or lowered in _HAVE_FORMS or lowered in _MODALS:
        return VERB
    if lowered in _NUMBER_WORDS:
        return NUM
    if lowered == "not" or lowered == "n't":
        return PRT
    return None


def tag_words(words: list[str], sentence_starts: Optional[set[int]] = None) -> list[str]:
    """Deterministic coarse POS tagging: closed-class lexicon, a common-word
    lexicon, suffix rules, then local context rules."""
    n = len(words)
    lowered = [_normalize_apostrophes(w) for w in words]
    tags: list[Optional[str]] = [None] * n

    for i, low in enumerate(lowered):
        if low == "to":
            continue  # resolved from context below
        tag = _closed_class_tag(low)
        if tag is None and _NUMERIC_RE.fullmatch(low):
            tag = NUM
        if tag is None:
            tag = _LEXICON.get(low)
        tags[i] = tag

    # "to" is an infinitive marker before a verb-like word, adposition otherwise.
    for i, low in enumerate(lowered):
        if low != "to":
            continue
        nxt = tags[i + 1] if i + 1 < n else None
        nxt_low = lowered[i + 1] if i + 1 < n else ""
        if nxt == VERB or (nxt is None and not _NUMERIC_RE.fullmatch(nxt_low or "0")):
            tags[i] = PRT
        else:
            tags[i] = ADP

    for i, low in enumerate(lowered):
        if tags[i] is not None:
            continue
        prev_low = lowered[i - 1] if i > 0 else ""
        prev_tag = tags[i - 1] if i > 0 else None

        if low.endswith("ly") and len(low) > 3:
            tags[i] = ADV
        elif prev_tag == PRT and prev_low == "to":
            tags[i] = VERB
        elif prev_low in _MODALS:
            tags[i] = VERB
        elif (prev_low in _BE_FORMS or prev_low in _HAVE_FORMS) and (
            low.endswith("ed") or low.endswith("ing") or low.endswith("en")
        ):
            tags[i] = VERB
        elif low.endswith(_ADJ_SUFFIXES):
            tags[i] = ADJ
        elif low.endswith(_NOUN_SUFFIXES):
            tags[i] = NOUN
        elif low.endswith(_VERB_SUFFIXES) and len(low) > 5:
            tags[i] = VERB
        elif low.endswith("ed") or low.endswith("ing"):
            tags[i] = NOUN if prev_tag == DET else VERB
        else:
            tags[i] = NOUN

    return [t if t is not None else X for t in tags]


def _sentence_starts(text: str, spans: list[tuple[int, int]]) -> set[int]:
    """Indices of words that open a sentence (text start or after .!? )."""
    starts: set[int] = set()
    prev_end = 0
    for i, (start, _end) in enumerate(spans):
        between = text[prev_end:start]
        if i == 0 or SENTENCE_BREAK_RE.search(between) or "\n" in between:
            starts.add(i)
        prev_end = _end
    return starts


def detect_entities(
    text: str,
    words: list[str],
    spans: list[tuple[int, int]],
    known_words: set[str],
) -> list[bool]:
    """Capitalization-based named-entity mask: capitalized words that are not
    common vocabulary, mid-sentence or leading a capitalized sequence."""
    n = len(words)
    starts = _sentence_starts(text, spans)

    def candidate(i: int) -> bool:
        w = words[i]
        if not w[:1].isupper():
            return False
        return _normalize_apostrophes(w) not in known_words

    mask = [False] * n
    for i in range(n):
        if not candidate(i):
            continue
        if i not in starts:
            mask[i] = True
        elif i + 1 < n and candidate(i + 1) and (i + 1) not in starts:
            mask[i] = True
    # absorb sentence-initial candidates already followed by entity words
    for i in range(n - 1, -1, -1):
        if mask[i] and i - 1 >= 0 and candidate(i - 1) and not mask[i - 1]:
            mask[i - 1] = True
    return mask


def _load_lexicon_file(path: Path) -> set[str]:
    out = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            out.add(line)
    return out


def _data_path(name: str) -> Path:
    return Path(str(resources.files("advswap").joinpath("data", name)))


@dataclass
class AnnotatorBundle:
    """Pluggable annotator handles plus the stop-word and pronoun lexica.

    The defaults are pure functions, so one bundle is safe to share across
    workers; a stateful annotator must override ``clone`` to hand each worker
    an isolated instance.
    """

    tokenizer: Callable[[str], list[tuple[str, int, int]]] = tokenize
    pos_tagger: Callable[[list[str], Optional[set[int]]], list[str]] = tag_words
    ner_tagger: Callable[[str, list[str], list[tuple[int, int]], set[str]], list[bool]] = (
        detect_entities
    )
    stopword_lexicon: set[str] = field(default_factory=set)
    pronoun_lexicon: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        # pronouns can never be modified, whatever stop-word list is configured
        self.stopword_lexicon = set(self.stopword_lexicon) | set(self.pronoun_lexicon)
        self._known_words = (
            self.stopword_lexicon
            | set(_LEXICON)
            | _DETERMINERS
            | _ADPOSITIONS
            | _CONJUNCTIONS
            | _BE_FORMS
            | _HAVE_FORMS
            | _MODALS
            | _NUMBER_WORDS
        )

    @classmethod
    def default(
        cls,
        stopword_path: Optional[str | Path] = None,
        pronoun_path: Optional[str | Path] = None,
    ) -> "AnnotatorBundle":
        """Bundle backed by the shipped lexica; either file is overridable."""
        stopwords = _load_lexicon_file(Path(stopword_path) if stopword_path else _data_path("stopwords.txt"))
        pronouns = _load_lexicon_file(Path(pronoun_path) if pronoun_path else _data_path("pronouns.txt"))
        return cls(stopword_lexicon=stopwords, pronoun_lexicon=pronouns)

    def clone(self) -> "AnnotatorBundle":
        return self  # default annotators are stateless

    def is_stopword(self, word: str) -> bool:
        return _normalize_apostrophes(word) in self.stopword_lexicon

    def annotate(self, text: str) -> TokenizedText:
        """Produce the aligned word/POS/NER/stop-word view of a text."""
        if not text or not text.strip():
            raise AnnotationError("cannot annotate empty text")
        triples = self.tokenizer(text)
        if not triples:
            raise AnnotationError(f"no words found in {text!r}")
        words = [w for w, _, _ in triples]
        spans = [(s, e) for _, s, e in triples]
        starts = _sentence_starts(text, spans)
        pos_tags = self.pos_tagger(words, starts)
        ner = self.ner_tagger(text, words, spans, self._known_words)
        stop = [self.is_stopword(w) for w in words]
        return TokenizedText(
            text=text,
            words=tuple(words),
            char_spans=tuple(spans),
            pos_tags=tuple(pos_tags),
            ner_mask=tuple(ner),
            stopword_mask=tuple(stop),
        )

    def pos_of_replacement(
        self, original: TokenizedText, position: int, replacement: str
    ) -> str:
        """Coarse tag the replacement word takes in context: substitute it into
        the sentence, re-tag, and read the tag at the same position."""
        if not 0 <= position < original.n:
            raise ValueError(f"position {position} out of range [0,{original.n})")
        if not WORD_RE.fullmatch(replacement):
            raise ValueError(f"replacement must be a single word, got {replacement!r}")
        if replacement == original.words[position]:
            return original.pos_tags[position]
        edited = apply_edits(
            original,
            Perturbation((Edit(position, original.words[position], replacement),)),
        )
        triples = self.tokenizer(edited)
        if len(triples) != original.n:
            raise AnnotationError(
                f"substituting {replacement!r} changed the word count"
            )
        words = [w for w, _, _ in triples]
        spans = [(s, e) for _, s, e in triples]
        tags = self.pos_tagger(words, _sentence_starts(edited, spans))
        return tags[position]
