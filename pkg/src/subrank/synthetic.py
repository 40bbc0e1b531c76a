"""Seeded synthetic corpora for tests, demos and smoke runs.

Sentences are drawn from a small fixed word list, each with one target word
whose gold substitutes come from a per-lemma substitute pool with random
annotator-style integer weights. Candidates are pooled across the corpus
the same way benchmark candidate lists are. Everything is driven by one
``random.Random(seed)``, so a given (n_instances, seed) pair always yields
the same corpus on any platform.
"""

from __future__ import annotations

import random

from .data import GoldSubstitute, SubstitutionInstance, TargetWord, pool_candidates
from .tokenizer import Vocabulary, build_vocabulary

_FILLER = (
    "the", "a", "very", "quite", "rather", "now", "then", "softly", "slowly",
    "house", "garden", "river", "market", "window", "child", "teacher",
    "walked", "stood", "waited", "smiled", "turned", "spoke",
    "near", "behind", "under", "toward",
)

# lemma -> (pos, substitute pool); a few substitutes are long enough that the
# corpus vocabulary keeps them out of its word pieces, forcing subword splits.
_LEMMAS = {
    "bright": ("a", ("clever", "smart", "shining", "brilliant", "intelligent")),
    "cold": ("a", ("chilly", "icy", "cool", "freezing")),
    "happy": ("a", ("glad", "cheerful", "joyful", "contented")),
    "small": ("a", ("little", "tiny", "slight", "miniature")),
    "run": ("v", ("sprint", "jog", "dash", "hurry")),
    "look": ("v", ("glance", "stare", "gaze", "peek")),
    "say": ("v", ("state", "remark", "declare", "announce")),
    "house": ("n", ("home", "dwelling", "cottage", "residence")),
    "road": ("n", ("street", "path", "lane", "avenue")),
    "dog": ("n", ("hound", "pup", "mutt", "mongrel")),
    "fast": ("r", ("quickly", "swiftly", "rapidly", "speedily")),
    "often": ("r", ("frequently", "regularly", "repeatedly", "commonly")),
}

# Words at least this long stay out of the generated vocabulary, so they
# tokenize into several subword pieces.
_MAX_VOCAB_WORD_LEN = 9


def generate_corpus(
    n_instances: int = 50,
    seed: int = 7,
    with_multiword_gold: bool = False,
) -> list[SubstitutionInstance]:
    """Deterministic corpus of single-target instances with pooled candidates."""
    rnd = random.Random(seed)
    lemmas = sorted(_LEMMAS)
    instances: list[SubstitutionInstance] = []
    for index in range(n_instances):
        lemma = lemmas[index % len(lemmas)]
        pos, subs = _LEMMAS[lemma]
        n_words = rnd.randint(4, 8)
        words = [rnd.choice(_FILLER) for _ in range(n_words)]
        slot = rnd.randrange(len(words) + 1)
        surface = lemma.capitalize() if slot == 0 and rnd.random() < 0.5 else lemma
        words.insert(slot, surface)
        sentence = " ".join(words) + " ."
        char_start = sum(len(w) + 1 for w in words[:slot])

        n_gold = rnd.randint(2, min(4, len(subs)))
        gold_subs = rnd.sample(subs, n_gold)
        gold = [GoldSubstitute(sub=s, weight=float(rnd.randint(1, 5))) for s in gold_subs]
        if with_multiword_gold and rnd.random() < 0.2:
            gold.append(GoldSubstitute(sub=f"very {rnd.choice(subs)}", weight=1.0))
        gold.sort(key=lambda g: g.sub)

        instance = SubstitutionInstance(
            id=f"{lemma}.{pos} {index}",
            sentence=sentence,
            target=TargetWord(
                char_start=char_start,
                char_end=char_start + len(surface),
                lemma=lemma,
                pos=pos,
            ),
            candidates=tuple(sorted(entry.sub for entry in gold)),
            gold=tuple(gold),
        )
        instance.validate()
        instances.append(instance)
    pooled, _ = pool_candidates(instances)
    return pooled


def corpus_vocabulary(instances, lowercase: bool = False) -> Vocabulary:
    """Vocabulary covering a corpus: ASCII fallback pieces plus every short
    word appearing in a sentence, candidate list or gold set; long words are
    left out on purpose so they split into subword pieces."""
    words: set[str] = set()
    for instance in instances:
        words.update(instance.sentence.split())
        words.update(instance.candidates)
        words.update(entry.sub for entry in instance.gold)
        words.add(instance.target.lemma)
        words.add(instance.target.lemma.capitalize())
    for instance in instances:
        for candidate in instance.candidates:
            words.add(candidate.capitalize())
    kept = sorted(w for w in words if w and " " not in w and len(w) < _MAX_VOCAB_WORD_LEN)
    return build_vocabulary(kept, lowercase=lowercase)
