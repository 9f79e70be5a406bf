"""Deterministic part-of-speech tagging for prompt structure analysis.

:class:`LexiconTagger` tags a token by, in order: a closed list of function
words, a small open-class lexicon (nouns, adjectives, verbs, adverbs seen
often in image captions), suffix rules, and finally ``NOUN`` as the default
for unknown content words. Any object with a ``tag(tokens) -> list[str]``
method can stand in for it.
"""

from __future__ import annotations

import re
from typing import Protocol, Sequence

NOUN = "NOUN"
VERB = "VERB"
ADJ = "ADJ"
ADV = "ADV"
FUNC = "FUNC"
NUM = "NUM"

_TOKEN = re.compile(r"[a-z0-9]+(?:['\-][a-z0-9]+)*")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


class Tagger(Protocol):
    def tag(self, tokens: Sequence[str]) -> list[str]: ...


FUNCTION_WORDS = frozenset(
    """
    a an the this that these those some any each every either neither no
    all both half several many much more most few fewer little less least
    other another such what which whose whatever whichever
    i me my mine myself you your yours yourself yourselves he him his himself
    she her hers herself it its itself we us our ours ourselves they them
    their theirs themselves who whom someone somebody something anyone
    anybody anything everyone everybody everything nobody nothing one ones
    oneself none
    about above across after against along alongside amid amidst among
    amongst around as at atop before behind below beneath beside besides
    between beyond by down during except for from in inside into like near
    nearby of off on onto opposite out outside over past per round since
    than through throughout till to toward towards under underneath unlike
    until up upon via with within without aboard despite
    and or but nor so yet because although though while whereas if unless
    whether once whenever wherever when where why how then thus hence
    however therefore also too either
    is am are was were be been being do does did doing done have has had
    having will would shall should can could may might must ought
    isn't aren't wasn't weren't don't doesn't didn't won't can't couldn't
    shouldn't wouldn't there here not very just only even still already
    yet again ever never always often sometimes quite rather really
    almost nearly about just
    zero two three four five six seven eight nine ten eleven twelve
    twenty thirty forty fifty hundred thousand first second third
    """.split()
)

NOUN_LEXICON = frozenset(
    """
    dog cat mat man woman men women person people child children boy girl
    baby kid kids guy lady player players skier skiers surfer crowd team
    bus car truck train plane airplane bike bicycle motorcycle boat street
    road sidewalk city building house room kitchen bathroom bedroom table
    chair couch bed window door wall floor sign clock light pole tree trees
    grass field park beach ocean water sky snow mountain hill river lake
    food pizza cake sandwich donut donuts plate bowl cup glass bottle
    banana apple orange broccoli hot-dog fruit vegetables horse horses cow
    cows sheep zebra zebras giraffe giraffes elephant elephants bird birds
    bear teddy animal animals kite umbrella frisbee ball bat racket tennis
    skis snowboard skateboard surfboard board laptop computer phone tv
    television keyboard mouse remote book books vase scissors toilet sink
    oven microwave refrigerator stove pan pot top side yard shop store
    market station airport track tracks fence bench flowers flower figure
    decorations window characters picture photo image shot view area
    front middle background group pair couple bunch lot piece slice
    """.split()
)

ADJ_LEXICON = frozenset(
    """
    red green blue yellow black white brown gray grey pink purple orange
    big small large little tall short long old new young good great
    nice pretty beautiful empty full open closed dark bright wet dry hot
    cold clean dirty busy different same several tiny huge wooden
    """.split()
)

VERB_LEXICON = frozenset(
    """
    sit sits sat stand stands stood hold holds held ride rides rode look
    looks eat eats ate play plays lay lays lie lies walk walks fly flies
    park parked fill filled post posted hang hangs make makes take takes
    ski skis surf surfs wear wears carry carries watch watches show shows
    """.split()
)

ADV_LEXICON = frozenset("together away back outside inside upside".split())

_SUFFIX_RULES = (
    (("tion", "sion", "ment", "ness", "ity", "ism", "ist", "ship", "hood", "ance", "ence", "er", "or"), NOUN),
    (("ing", "ed"), VERB),
    (("ly",), ADV),
    (("ous", "ful", "ive", "able", "ible", "al", "ic", "ish", "less", "y"), ADJ),
)


class LexiconTagger:
    """Closed-lexicon + suffix heuristic tagger."""

    name = "lexicon"

    def tag_token(self, tok: str) -> str:
        if tok.isdigit():
            return NUM
        if tok in FUNCTION_WORDS:
            return FUNC
        if tok in NOUN_LEXICON:
            return NOUN
        if tok in ADJ_LEXICON:
            return ADJ
        if tok in VERB_LEXICON:
            return VERB
        if tok in ADV_LEXICON:
            return ADV
        for suffixes, tag in _SUFFIX_RULES:
            if any(tok.endswith(s) and len(tok) > len(s) + 2 for s in suffixes):
                return tag
        if tok.endswith("s") and tok[:-1] in NOUN_LEXICON:
            return NOUN
        return NOUN

    def tag(self, tokens: Sequence[str]) -> list[str]:
        return [self.tag_token(t) for t in tokens]
