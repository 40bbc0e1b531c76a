"""Command-line interface: subcommands, exit codes, determinism."""

import json

import pytest

from subrank import load_canonical, rank_candidates, write_canonical
from subrank.attribution import INTEGRATED_GRADIENTS, IgConfig, TARGET_ONLY
from subrank.cli import main
from subrank.synthetic import corpus_vocabulary, generate_corpus
from subrank.tokenizer import save_vocabulary

from test_data import LS07_GOLD, LS07_XML, SWORDS_JSON


@pytest.fixture(scope="module")
def corpus_path(tmp_path_factory):
    base = tmp_path_factory.mktemp("corpus")
    instances = generate_corpus(n_instances=6, seed=21)
    path = base / "canonical.jsonl"
    write_canonical(instances, path)
    return path


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestConvertCommand:
    def test_ls07_fixture_exits_zero_and_prints_counts(self, tmp_path, capsys):
        xml = tmp_path / "contexts.xml"
        gold = tmp_path / "gold.txt"
        xml.write_text(LS07_XML)
        gold.write_text(LS07_GOLD)
        out = tmp_path / "out.jsonl"
        code, stdout, _ = run(["convert", "ls07", "--in", str(xml), str(gold), "--out", str(out)], capsys)
        assert code == 0
        assert "instances: 3" in stdout
        assert len(load_canonical(out)) == 3

    def test_swords_fixture(self, tmp_path, capsys):
        src = tmp_path / "swords.json"
        src.write_text(json.dumps(SWORDS_JSON))
        out = tmp_path / "out.jsonl"
        code, stdout, _ = run(["convert", "swords", "--in", str(src), "--out", str(out)], capsys)
        assert code == 0
        assert "targets_all_zero: 1" in stdout

    def test_missing_input_exits_two_and_names_path(self, tmp_path, capsys):
        out = tmp_path / "out.jsonl"
        code, _, stderr = run(
            ["convert", "swords", "--in", str(tmp_path / "ghost.json"), "--out", str(out)],
            capsys,
        )
        assert code == 2
        assert "ghost.json" in stderr

    def test_output_equal_to_input_refused(self, tmp_path, capsys):
        src = tmp_path / "swords.json"
        src.write_text(json.dumps(SWORDS_JSON))
        code, _, stderr = run(["convert", "swords", "--in", str(src), "--out", str(src)], capsys)
        assert code == 2
        assert "distinct" in stderr

    def test_pool_flag_rebuilds_candidates_at_convert_time(self, tmp_path, capsys):
        xml = tmp_path / "contexts.xml"
        gold = tmp_path / "gold.txt"
        xml.write_text(LS07_XML)
        gold.write_text(LS07_GOLD)
        out = tmp_path / "pooled.jsonl"
        code, stdout, _ = run(
            ["convert", "ls07", "--in", str(xml), str(gold), "--out", str(out),
             "--pool", "lemma-pos"],
            capsys,
        )
        assert code == 0
        assert "pool_instances: 3" in stdout
        by_id = {inst.id: inst for inst in load_canonical(out)}
        # both bright.a instances share the union of their gold substitutes
        assert by_id["bright.a 1"].candidates == by_id["bright.a 2"].candidates
        assert by_id["bright.a 1"].candidates == ("clever", "intelligent", "vivid")


class TestRankCommand:
    def test_ranks_every_instance(self, corpus_path, tmp_path, capsys):
        out = tmp_path / "rankings.jsonl"
        code, stdout, _ = run(
            ["rank", "--in", str(corpus_path), "--out", str(out), "--scheme", "attn"],
            capsys,
        )
        assert code == 0
        lines = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(lines) == 6
        assert "ranked 6 instances, 0 failed" in stdout

    def test_jobs_do_not_change_output_bytes(self, corpus_path, tmp_path, capsys):
        out_serial = tmp_path / "serial.jsonl"
        out_parallel = tmp_path / "parallel.jsonl"
        assert run(["rank", "--in", str(corpus_path), "--out", str(out_serial), "--jobs", "1"], capsys)[0] == 0
        assert run(["rank", "--in", str(corpus_path), "--out", str(out_parallel), "--jobs", "8"], capsys)[0] == 0
        assert out_serial.read_bytes() == out_parallel.read_bytes()

    def test_repeated_runs_are_byte_identical(self, corpus_path, tmp_path, capsys):
        out_a = tmp_path / "a.jsonl"
        out_b = tmp_path / "b.jsonl"
        argv = ["rank", "--in", str(corpus_path), "--out"]
        assert run(argv + [str(out_a)], capsys)[0] == 0
        assert run(argv + [str(out_b)], capsys)[0] == 0
        assert out_a.read_bytes() == out_b.read_bytes()

    @pytest.mark.parametrize(
        "scheme_flag, scheme, ig_mode",
        [("target", TARGET_ONLY, "prob"),
         ("ig", INTEGRATED_GRADIENTS, "prob"),
         ("ig", INTEGRATED_GRADIENTS, "l2")],
    )
    def test_orders_match_the_library_pipeline(self, corpus_path, tmp_path, capsys,
                                               scheme_flag, scheme, ig_mode):
        out = tmp_path / f"{scheme_flag}-{ig_mode}.jsonl"
        code, _, _ = run(
            ["rank", "--in", str(corpus_path), "--out", str(out), "--scheme", scheme_flag,
             "--ig-steps", "4", "--ig-mode", ig_mode, "--seed", "42"],
            capsys,
        )
        assert code == 0
        instances = load_canonical(corpus_path)
        vocab = corpus_vocabulary(instances)
        from subrank import ReferenceEncoder
        from subrank.ranker import default_encoder_config
        encoder = ReferenceEncoder(default_encoder_config(len(vocab), seed=42))
        mode = "vocab_prob" if ig_mode == "prob" else "l2_norm"
        for line, instance in zip(out.read_text().splitlines(), instances):
            record = json.loads(line)
            expected = rank_candidates(
                instance, encoder, vocab, scheme, ig_config=IgConfig(steps=4, mode=mode)
            )
            assert [e["candidate"] for e in record["ranked"]] == list(expected.candidates)

    def test_config_file_supplies_defaults_flags_override(self, corpus_path, tmp_path, capsys):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"scheme": "target", "jobs": 2}))
        out = tmp_path / "rankings.jsonl"
        code, _, _ = run(
            ["rank", "--in", str(corpus_path), "--out", str(out), "--config", str(config)],
            capsys,
        )
        assert code == 0
        record = json.loads(out.read_text().splitlines()[0])
        assert record["scheme"] == TARGET_ONLY
        code, _, _ = run(
            ["rank", "--in", str(corpus_path), "--out", str(out),
             "--config", str(config), "--scheme", "one"],
            capsys,
        )
        assert code == 0
        record = json.loads(out.read_text().splitlines()[0])
        assert record["scheme"] == "uniform_one"

    def test_weight_file_round_trip_through_cli(self, corpus_path, tmp_path, capsys):
        instances = load_canonical(corpus_path)
        vocab = corpus_vocabulary(instances)
        vocab_path = tmp_path / "vocab.txt"
        save_vocabulary(vocab, vocab_path)
        from subrank import ReferenceEncoder
        from subrank.ranker import default_encoder_config
        weights_path = tmp_path / "ref.weights"
        ReferenceEncoder(default_encoder_config(len(vocab), seed=42)).save_weights(weights_path)

        out_seeded = tmp_path / "seeded.jsonl"
        out_loaded = tmp_path / "loaded.jsonl"
        base = ["rank", "--in", str(corpus_path), "--vocab", str(vocab_path)]
        assert run(base + ["--out", str(out_seeded), "--seed", "42"], capsys)[0] == 0
        assert run(base + ["--out", str(out_loaded), "--weights", str(weights_path)], capsys)[0] == 0
        assert out_seeded.read_bytes() == out_loaded.read_bytes()

    def test_unknown_backend_exits_two(self, corpus_path, tmp_path, capsys):
        code, _, stderr = run(
            ["rank", "--in", str(corpus_path), "--out", str(tmp_path / "r.jsonl"),
             "--backend", "bert-large"],
            capsys,
        )
        assert code == 2
        assert "backend" in stderr

    def test_partial_failure_exits_one_and_run_continues(self, tmp_path, capsys):
        from subrank import GoldSubstitute, SubstitutionInstance, TargetWord
        good = generate_corpus(n_instances=2, seed=21)
        hopeless = SubstitutionInstance(
            id="stuck.n 0",
            sentence="a thing here",
            target=TargetWord(2, 7, "thing", "n"),
            candidates=("two words", "also two"),
            gold=(GoldSubstitute("two words", 1.0),),
        )
        path = tmp_path / "mixed.jsonl"
        write_canonical([good[0], hopeless, good[1]], path)
        out = tmp_path / "rankings.jsonl"
        code, stdout, stderr = run(["rank", "--in", str(path), "--out", str(out)], capsys)
        assert code == 1
        assert "stuck.n 0" in stderr
        assert "ranked 2 instances, 1 failed" in stdout
        assert len(out.read_text().splitlines()) == 2


class TestEvaluateCommand:
    def write_gold(self, tmp_path, gold):
        from subrank import GoldSubstitute, SubstitutionInstance, TargetWord
        instances = []
        for iid, entries in gold.items():
            word = "thing"
            sentence = f"a {word} here"
            instances.append(
                SubstitutionInstance(
                    id=iid, sentence=sentence,
                    target=TargetWord(2, 7, word, "n"),
                    candidates=tuple(sorted(set(entries) | {"filler"})),
                    gold=tuple(GoldSubstitute(s, w) for s, w in sorted(entries.items())),
                )
            )
        path = tmp_path / "gold.jsonl"
        write_canonical(instances, path)
        return path

    def write_rankings(self, tmp_path, rankings):
        path = tmp_path / "rankings.jsonl"
        with open(path, "w") as fh:
            for iid, ranked in rankings.items():
                fh.write(json.dumps({
                    "id": iid, "scheme": "attention", "layer_range": [3, 4],
                    "ranked": [{"candidate": c, "score": 0.0} for c in ranked],
                    "excluded": [],
                }) + "\n")
        return path

    def test_perfect_rankings_print_one_hundred(self, tmp_path, capsys):
        gold_path = self.write_gold(tmp_path, {"one": {"a": 3.0, "b": 1.0}})
        rank_path = self.write_rankings(tmp_path, {"one": ["a", "b"]})
        report_path = tmp_path / "report.json"
        code, stdout, _ = run(
            ["evaluate", "--in", str(rank_path), str(gold_path), "--report", str(report_path)],
            capsys,
        )
        assert code == 0
        assert "mean GAP: 100.0" in stdout

    def test_known_instance_prints_867(self, tmp_path, capsys):
        gold_path = self.write_gold(tmp_path, {"one": {"a": 3.0, "b": 1.0}})
        rank_path = self.write_rankings(tmp_path, {"one": ["a", "filler", "b"]})
        report_path = tmp_path / "report.json"
        code, stdout, _ = run(
            ["evaluate", "--in", str(rank_path), str(gold_path), "--report", str(report_path)],
            capsys,
        )
        assert code == 0
        assert "mean GAP: 86.7" in stdout
        report = json.loads(report_path.read_text())
        assert abs(report["mean_gap"] - 13.0 / 15.0) < 1e-12

    def test_rankings_with_unknown_id_exit_two(self, tmp_path, capsys):
        gold_path = self.write_gold(tmp_path, {"one": {"a": 1.0}})
        rank_path = self.write_rankings(tmp_path, {"one": ["a"], "ghost": ["a"]})
        code, _, stderr = run(
            ["evaluate", "--in", str(rank_path), str(gold_path), "--report", str(tmp_path / "r.json")],
            capsys,
        )
        assert code == 2
        assert "ghost" in stderr

    def test_rankings_missing_a_gold_id_exit_two(self, tmp_path, capsys):
        gold_path = self.write_gold(tmp_path, {"one": {"a": 1.0}, "two": {"b": 1.0}})
        rank_path = self.write_rankings(tmp_path, {"one": ["a"]})
        code, _, stderr = run(
            ["evaluate", "--in", str(rank_path), str(gold_path), "--report", str(tmp_path / "r.json")],
            capsys,
        )
        assert code == 2
        assert "two" in stderr


class TestAttributeCommand:
    def test_single_context_token_gets_weight_one(self, tmp_path, capsys):
        out = tmp_path / "attr.jsonl"
        code, _, _ = run(
            ["attribute", "--sentence", "bright day", "--span", "0:6",
             "--scheme", "attn", "--out", str(out)],
            capsys,
        )
        assert code == 0
        records = [json.loads(line) for line in out.read_text().splitlines()]
        context = [r for r in records if not r["target"]]
        assert len(context) == 1
        assert context[0]["weight"] == 1.0

    def test_uniform_scheme_prints_ones(self, capsys):
        code, stdout, _ = run(
            ["attribute", "--sentence", "the bright day came", "--span", "4:10",
             "--scheme", "one"],
            capsys,
        )
        assert code == 0
        records = [json.loads(line) for line in stdout.splitlines()]
        assert all(r["weight"] == 1.0 for r in records)
        assert all(r["raw_score"] is None for r in records)

    def test_attention_dump_matches_oracle(self, tmp_path, capsys):
        out = tmp_path / "attr.jsonl"
        code, _, _ = run(
            ["attribute", "--sentence", "the bright day came", "--span", "4:10",
             "--scheme", "attn", "--seed", "7", "--out", str(out)],
            capsys,
        )
        assert code == 0
        records = [json.loads(line) for line in out.read_text().splitlines()]
        context = [r for r in records if not r["target"]]
        # independent check: softmax over the dumped raw scores
        import numpy as np
        raw = np.array([r["raw_score"] for r in context])
        expected = np.exp(raw - raw.max())
        expected /= expected.sum()
        got = np.array([r["weight"] for r in context])
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_invalid_span_exits_two(self, capsys):
        code, _, _ = run(
            ["attribute", "--sentence", "bright day", "--span", "0:3", "--scheme", "attn"],
            capsys,
        )
        assert code == 2

    def test_gradient_scheme_dump(self, capsys):
        code, stdout, _ = run(
            ["attribute", "--sentence", "the bright day came", "--span", "4:10",
             "--scheme", "ig", "--ig-steps", "4", "--ig-mode", "l2"],
            capsys,
        )
        assert code == 0
        records = [json.loads(line) for line in stdout.splitlines()]
        context = [r for r in records if not r["target"]]
        assert all(r["raw_score"] >= 0.0 for r in context)
        assert abs(sum(r["weight"] for r in context) - 1.0) < 1e-9


class TestExclusionAccountingEndToEnd:
    def test_multiword_entries_flow_into_the_report_counters(self, tmp_path, capsys):
        instances = generate_corpus(n_instances=12, seed=4, with_multiword_gold=True)
        assert any(" " in g.sub for inst in instances for g in inst.gold)
        corpus_path = tmp_path / "corpus.jsonl"
        write_canonical(instances, corpus_path)
        rank_path = tmp_path / "rankings.jsonl"
        report_path = tmp_path / "report.json"
        assert run(["rank", "--in", str(corpus_path), "--out", str(rank_path)], capsys)[0] == 0
        code, stdout, _ = run(
            ["evaluate", "--in", str(rank_path), str(corpus_path), "--report", str(report_path)],
            capsys,
        )
        assert code == 0
        report = json.loads(report_path.read_text())
        assert report["n_excluded_gold_multiword"] > 0
        assert report["n_instances"] + report["n_skipped"] == 12
        assert "multiword excluded" in stdout


class TestAblateCommand:
    def test_emits_all_schemes_and_both_target_variants(self, corpus_path, tmp_path, capsys):
        report_path = tmp_path / "ablation.json"
        code, stdout, _ = run(
            ["ablate", "--in", str(corpus_path), "--report", str(report_path),
             "--ig-steps", "4"],
            capsys,
        )
        assert code == 0
        report = json.loads(report_path.read_text())
        rows = report["rows"]
        assert len(rows) == 6
        schemes = {row["scheme"] for row in rows}
        assert schemes == {"target_only", "uniform_one", "attention", "integrated_gradients"}
        attn_variants = {row["include_target"] for row in rows if row["scheme"] == "attention"}
        assert attn_variants == {True, False}
        for row in rows:
            assert 0.0 <= row["mean_gap"] * 100.0 <= 100.0
        assert "mean GAP" in stdout
