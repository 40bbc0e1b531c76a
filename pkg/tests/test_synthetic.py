"""Synthetic corpus generator: determinism and structural guarantees."""

from subrank.synthetic import corpus_vocabulary, generate_corpus
from subrank.tokenizer import tokenize


class TestGenerateCorpus:
    def test_deterministic_for_equal_seed(self):
        assert generate_corpus(20, seed=5) == generate_corpus(20, seed=5)

    def test_different_seeds_differ(self):
        assert generate_corpus(20, seed=5) != generate_corpus(20, seed=6)

    def test_instances_validate_and_pool(self):
        corpus = generate_corpus(50, seed=7)
        assert len(corpus) == 50
        for instance in corpus:
            instance.validate()
            assert {g.sub for g in instance.gold} <= set(instance.candidates)

    def test_candidates_are_pooled_across_same_lemma(self):
        corpus = generate_corpus(30, seed=7)
        by_lemma = {}
        for instance in corpus:
            key = (instance.target.lemma, instance.target.pos)
            by_lemma.setdefault(key, set()).add(instance.candidates)
        for candidate_sets in by_lemma.values():
            assert len(candidate_sets) == 1

    def test_multiword_gold_flag(self):
        corpus = generate_corpus(50, seed=7, with_multiword_gold=True)
        assert any(" " in g.sub for inst in corpus for g in inst.gold)

    def test_vocabulary_covers_sentences_without_unk(self):
        corpus = generate_corpus(25, seed=9)
        vocab = corpus_vocabulary(corpus)
        for instance in corpus:
            sent = tokenize(vocab, instance.sentence)
            assert 1 not in sent.token_ids  # no [UNK]

    def test_some_candidates_split_into_subwords(self):
        corpus = generate_corpus(50, seed=7)
        vocab = corpus_vocabulary(corpus)
        split = [
            c for inst in corpus for c in inst.candidates
            if vocab.lookup(c) is None and " " not in c
        ]
        assert split  # long substitutes tokenize into pieces
