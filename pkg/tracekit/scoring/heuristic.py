"""Offline phrase importance scorer.

Rule, applied to the lowercase alphabetic tokens of a phrase:

    * no tokens, or only stopwords            -> 1
    * otherwise 1 + min(4, content tokens)
      plus 1 if any token is a colour/size/spatial attribute,
      clamped to 5

The lexicons below are part of the rule; changing them changes scores.
"""

from __future__ import annotations

import re
from typing import List

from tracekit.scoring.weights import MAX_SCORE, MIN_SCORE

TOKEN_PATTERN = re.compile(r"[a-z]+")

STOPWORDS = frozenset({
    "a", "an", "the", "this", "that", "these", "those", "there", "here",
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have",
    "had", "do", "does", "did", "will", "would", "can", "could", "should",
    "and", "or", "but", "so", "of", "in", "on", "at", "to", "from", "by",
    "with", "into", "onto", "for", "as", "it", "its", "we", "i",
    "you", "he", "she", "they", "them", "his", "her", "their", "our", "my",
    "some", "which", "who", "what", "where", "also", "very", "just",
    "image", "picture", "see", "um", "uh", "s",
})

COLOR_WORDS = frozenset({
    "red", "green", "blue", "yellow", "orange", "purple", "pink", "brown",
    "black", "white", "gray", "grey", "golden", "silver", "dark", "light",
})

SIZE_WORDS = frozenset({
    "big", "small", "large", "tiny", "huge", "little", "tall", "short",
    "long", "wide", "narrow", "thin", "thick",
})

SPATIAL_WORDS = frozenset({
    "left", "right", "top", "bottom", "middle", "center", "centre",
    "front", "back", "behind", "above", "below", "under", "near", "next",
    "corner", "leftmost", "rightmost", "background", "foreground",
})

ATTRIBUTE_LEXICON = COLOR_WORDS | SIZE_WORDS | SPATIAL_WORDS


def tokens(phrase: str) -> List[str]:
    return TOKEN_PATTERN.findall(phrase.lower())


def is_stopword(word: str) -> bool:
    toks = tokens(word)
    return not toks or all(t in STOPWORDS for t in toks)


def heuristic_score(phrase: str) -> int:
    toks = tokens(phrase)
    content = [t for t in toks if t not in STOPWORDS]
    if not content:
        return MIN_SCORE

    score = 1 + min(4, len(content))
    if any(t in ATTRIBUTE_LEXICON for t in toks):
        score += 1
    return max(MIN_SCORE, min(MAX_SCORE, score))
