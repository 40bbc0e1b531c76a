"""Canonical dataset records, format converters, candidate pooling.

The engine consumes exactly one format: UTF-8 JSONL where each line is one
substitution instance (sentence, target word span, candidate list, weighted
gold substitutes). Converters turn the two public benchmark layouts into it
and are deliberately thin; every record they drop or merge is counted and
reported, never silent.
"""

from __future__ import annotations

import html
import json
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import ConversionError, ParseError, ValidationError
from .tokenizer import word_span_in_text

POS_TAGS = ("n", "v", "a", "r")
_POS_ALIASES = {
    "n": "n", "v": "v", "a": "a", "r": "r", "j": "a",
    "noun": "n", "verb": "v", "adj": "a", "adjective": "a",
    "adv": "r", "adverb": "r",
}


def normalize_pos(tag: str) -> str:
    normalized = _POS_ALIASES.get(str(tag).strip().lower())
    if normalized is None:
        raise ValidationError(f"unknown part-of-speech tag {tag!r}")
    return normalized


@dataclass(frozen=True)
class TargetWord:
    char_start: int
    char_end: int
    lemma: str
    pos: str


@dataclass(frozen=True)
class GoldSubstitute:
    sub: str
    weight: float


@dataclass(frozen=True)
class SubstitutionInstance:
    """One sentence/target pair with its candidates and weighted gold.

    ``gold`` may be empty (a benchmark target whose substitutes all scored
    zero); such instances rank normally and are skipped by the metric.
    """

    id: str
    sentence: str
    target: TargetWord
    candidates: tuple[str, ...]
    gold: tuple[GoldSubstitute, ...]

    def validate(self) -> None:
        if not self.id:
            raise ValidationError("instance id must be non-empty")
        if not word_span_in_text(self.sentence, self.target.char_start, self.target.char_end):
            raise ValidationError(
                f"instance {self.id}: target span [{self.target.char_start}, "
                f"{self.target.char_end}) does not match a word in the sentence"
            )
        if self.target.pos not in POS_TAGS:
            raise ValidationError(f"instance {self.id}: pos must be one of {POS_TAGS}")
        if not self.candidates:
            raise ValidationError(f"instance {self.id}: candidate list is empty")
        if len(set(self.candidates)) != len(self.candidates):
            raise ValidationError(f"instance {self.id}: duplicate candidates")
        seen = set()
        for entry in self.gold:
            if entry.weight <= 0:
                raise ValidationError(
                    f"instance {self.id}: gold weight for {entry.sub!r} must be positive"
                )
            if entry.sub in seen:
                raise ValidationError(f"instance {self.id}: duplicate gold substitute {entry.sub!r}")
            seen.add(entry.sub)
        missing = seen - set(self.candidates)
        if missing:
            raise ValidationError(
                f"instance {self.id}: gold substitutes missing from candidates: {sorted(missing)}"
            )

    def gold_mapping(self) -> dict[str, float]:
        return {entry.sub: entry.weight for entry in self.gold}

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "sentence": self.sentence,
            "target": {
                "char_start": self.target.char_start,
                "char_end": self.target.char_end,
                "lemma": self.target.lemma,
                "pos": self.target.pos,
            },
            "candidates": list(self.candidates),
            "gold": [{"sub": g.sub, "weight": g.weight} for g in self.gold],
        }


def _require_fields(record: Mapping, required: Sequence[str], where: str) -> None:
    for field in required:
        if field not in record:
            raise ParseError(f"{where}: missing field {field!r}")
    unknown = set(record) - set(required)
    if unknown:
        raise ParseError(f"{where}: unknown fields {sorted(unknown)}")


def instance_from_json_dict(record: Mapping, where: str = "record") -> SubstitutionInstance:
    _require_fields(record, ("id", "sentence", "target", "candidates", "gold"), where)
    _require_fields(record["target"], ("char_start", "char_end", "lemma", "pos"), f"{where}: target")
    gold = []
    for entry in record["gold"]:
        _require_fields(entry, ("sub", "weight"), f"{where}: gold entry")
        gold.append(GoldSubstitute(sub=str(entry["sub"]), weight=float(entry["weight"])))
    instance = SubstitutionInstance(
        id=str(record["id"]),
        sentence=str(record["sentence"]),
        target=TargetWord(
            char_start=int(record["target"]["char_start"]),
            char_end=int(record["target"]["char_end"]),
            lemma=str(record["target"]["lemma"]),
            pos=str(record["target"]["pos"]),
        ),
        candidates=tuple(str(c) for c in record["candidates"]),
        gold=tuple(gold),
    )
    instance.validate()
    return instance


def load_canonical(path) -> list[SubstitutionInstance]:
    """Read canonical JSONL; errors carry the line number and instance id."""
    instances = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{line_no}: not valid JSON ({exc.msg})") from exc
            instances.append(instance_from_json_dict(record, where=f"{path}:{line_no}"))
    return instances


def write_canonical(instances: Iterable[SubstitutionInstance], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for instance in instances:
            fh.write(json.dumps(instance.to_json_dict(), ensure_ascii=False) + "\n")


# -- LS07 ---------------------------------------------------------------

_LEXELT_RE = re.compile(r'<lexelt\s+item="([^"]+)"')
_INSTANCE_RE = re.compile(r'<instance\s+id="([^"]+)"[^>]*>(.*?)</instance>', re.DOTALL)
_CONTEXT_RE = re.compile(r"<context>(.*?)</context>", re.DOTALL)
_HEAD_RE = re.compile(r"<head>(.*?)</head>", re.DOTALL)


def _squash(text: str) -> str:
    return " ".join(html.unescape(text).split())


def parse_ls07_gold_line(line: str) -> tuple[str, str, dict[str, float]]:
    """One gold line: ``lemma.pos id :: sub weight; sub weight;``.

    Substitutes may contain spaces (multiword entries are preserved here and
    excluded later); duplicate substitutes have their weights summed.
    """
    left, sep, right = line.partition("::")
    if not sep:
        raise ParseError(f"gold line missing '::': {line!r}")
    head = left.split()
    if len(head) != 2:
        raise ParseError(f"gold line header must be 'lexelt id': {line!r}")
    lexelt, instance_id = head
    entries: dict[str, float] = {}
    for chunk in right.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        sub, _, weight_text = chunk.rpartition(" ")
        sub = sub.strip()
        if not sub:
            raise ParseError(f"gold entry missing substitute text: {chunk!r} in {line!r}")
        try:
            weight = float(weight_text)
        except ValueError:
            raise ParseError(f"gold entry has non-numeric weight: {chunk!r} in {line!r}") from None
        entries[sub] = entries.get(sub, 0.0) + weight
    return lexelt, instance_id, entries


def convert_ls07(contexts_path, gold_path) -> tuple[list[SubstitutionInstance], dict[str, int]]:
    """Convert the benchmark's XML contexts + gold annotations.

    Gold weights are the annotator counts. Contexts with no gold line are
    dropped and counted; gold lines with no context are a hard error (the
    two files are out of sync). The canonical id is ``<lexelt> <id>``.
    """
    with open(gold_path, encoding="utf-8") as fh:
        gold_lines = [line.strip() for line in fh if line.strip()]
    gold: dict[tuple[str, str], dict[str, float]] = {}
    for line in gold_lines:
        lexelt, instance_id, entries = parse_ls07_gold_line(line)
        key = (lexelt, instance_id)
        merged = gold.setdefault(key, {})
        for sub, weight in entries.items():
            merged[sub] = merged.get(sub, 0.0) + weight

    with open(contexts_path, encoding="utf-8") as fh:
        xml_text = fh.read()

    counts = {
        "instances": 0,
        "dropped_no_gold": 0,
        "dropped_empty_gold": 0,
        "dropped_bad_target": 0,
    }
    instances: list[SubstitutionInstance] = []
    seen_keys: set[tuple[str, str]] = set()
    lexelt = None
    events = sorted(
        [(m.start(), "lexelt", m) for m in _LEXELT_RE.finditer(xml_text)]
        + [(m.start(), "instance", m) for m in _INSTANCE_RE.finditer(xml_text)],
        key=lambda event: event[0],
    )
    for _, kind, match in events:
        if kind == "lexelt":
            lexelt = match.group(1)
            continue
        if lexelt is None:
            raise ConversionError(f"instance {match.group(1)!r} appears before any lexelt")
        instance_id = match.group(1)
        context_match = _CONTEXT_RE.search(match.group(2))
        if context_match is None:
            raise ConversionError(f"instance {lexelt} {instance_id} has no context element")
        inner = context_match.group(1)
        head_match = _HEAD_RE.search(inner)
        if head_match is None:
            raise ConversionError(f"instance {lexelt} {instance_id} has no head element")

        before = _squash(inner[: head_match.start()])
        word = _squash(head_match.group(1))
        after = _squash(inner[head_match.end() :])
        if not word or " " in word:
            counts["dropped_bad_target"] += 1
            continue
        sentence = (before + " " if before else "") + word + (" " + after if after else "")
        char_start = len(before) + 1 if before else 0
        if sentence[char_start : char_start + len(word)] != word:
            raise ConversionError(f"instance {lexelt} {instance_id}: head-word offset drifted")

        key = (lexelt, instance_id)
        seen_keys.add(key)
        entries = gold.get(key)
        if entries is None:
            counts["dropped_no_gold"] += 1
            continue
        entries = {sub: w for sub, w in entries.items() if w > 0}
        if not entries:
            counts["dropped_empty_gold"] += 1
            continue

        lemma, _, pos = lexelt.rpartition(".")
        instance = SubstitutionInstance(
            id=f"{lexelt} {instance_id}",
            sentence=sentence,
            target=TargetWord(
                char_start=char_start,
                char_end=char_start + len(word),
                lemma=lemma,
                pos=normalize_pos(pos),
            ),
            candidates=tuple(sorted(entries)),
            gold=tuple(GoldSubstitute(sub=s, weight=w) for s, w in sorted(entries.items())),
        )
        instance.validate()
        instances.append(instance)
        counts["instances"] += 1

    orphans = sorted(f"{lex} {iid}" for (lex, iid) in gold.keys() - seen_keys)
    if orphans:
        raise ConversionError(f"gold lines without matching contexts: {orphans}")
    return instances, counts


# -- SWORDS-style JSON ----------------------------------------------------

_SWORDS_REQUIRED = ("contexts", "targets", "substitutes", "substitute_labels")


def convert_swords(json_path) -> tuple[list[SubstitutionInstance], dict[str, int]]:
    """Convert a SWORDS-release test file.

    Candidates are all listed substitutes of a target; a substitute's gold
    weight is its count of TRUE annotator labels and it enters the gold set
    iff that count is positive. Targets whose substitutes all scored zero
    are kept with an empty gold set and counted, so evaluation can account
    for skipping them.
    """
    with open(json_path, encoding="utf-8") as fh:
        data = json.load(fh)
    for field in _SWORDS_REQUIRED:
        if field not in data:
            raise ConversionError(f"swords file missing field {field!r}")

    by_target: dict[str, list[tuple[str, int]]] = {}
    for sub_id, entry in data["substitutes"].items():
        for field in ("target_id", "substitute"):
            if field not in entry:
                raise ConversionError(f"substitute {sub_id!r} missing field {field!r}")
        labels = data["substitute_labels"].get(sub_id)
        if labels is None:
            raise ConversionError(f"substitute {sub_id!r} has no labels")
        weight = sum(1 for label in labels if str(label).upper() == "TRUE")
        by_target.setdefault(entry["target_id"], []).append((str(entry["substitute"]), weight))

    counts = {
        "instances": 0,
        "targets_all_zero": 0,
        "dropped_no_substitutes": 0,
        "dropped_multiword_target": 0,
    }
    instances: list[SubstitutionInstance] = []
    for target_id, target in data["targets"].items():
        for field in ("context_id", "target", "offset", "pos"):
            if field not in target:
                raise ConversionError(f"target {target_id!r} missing field {field!r}")
        context_entry = data["contexts"].get(target["context_id"])
        if context_entry is None or "context" not in context_entry:
            raise ConversionError(f"target {target_id!r} references unknown context")
        sentence = " ".join(str(context_entry["context"]).split())
        word = str(target["target"])
        if " " in word:
            counts["dropped_multiword_target"] += 1
            continue
        offset = int(target["offset"])
        # Offsets refer to the raw context; recompute against the squashed text.
        raw = str(context_entry["context"])
        if raw[offset : offset + len(word)] != word:
            raise ConversionError(
                f"target {target_id!r}: offset {offset} does not point at {word!r}"
            )
        char_start = len(" ".join(raw[:offset].split())) + (1 if raw[:offset].strip() else 0)
        if sentence[char_start : char_start + len(word)] != word:
            raise ConversionError(
                f"target {target_id!r}: could not recover the word offset after "
                f"whitespace normalization"
            )
        subs = by_target.get(target_id, [])
        if not subs:
            counts["dropped_no_substitutes"] += 1
            continue
        merged: dict[str, int] = {}
        for sub, weight in subs:
            merged[sub] = merged.get(sub, 0) + weight
        gold = {sub: w for sub, w in merged.items() if w > 0}
        if not gold:
            counts["targets_all_zero"] += 1
        instance = SubstitutionInstance(
            id=str(target_id),
            sentence=sentence,
            target=TargetWord(
                char_start=char_start,
                char_end=char_start + len(word),
                lemma=word.lower(),
                pos=normalize_pos(target["pos"]),
            ),
            candidates=tuple(sorted(merged)),
            gold=tuple(GoldSubstitute(sub=s, weight=float(w)) for s, w in sorted(gold.items())),
        )
        instance.validate()
        instances.append(instance)
        counts["instances"] += 1
    return instances, counts


# -- candidate pooling -----------------------------------------------------

POOL_LEMMA = "lemma"
POOL_LEMMA_POS = "lemma_pos"


def pool_candidates(
    instances: Sequence[SubstitutionInstance], key: str = POOL_LEMMA_POS
) -> tuple[list[SubstitutionInstance], dict[str, int]]:
    """Replace every candidate list with the union of gold substitutes over
    all instances sharing the pooling key, deduplicated and sorted.

    Instances whose pooled candidate set would be empty (no gold anywhere in
    their group) are dropped and counted.
    """
    if key not in (POOL_LEMMA, POOL_LEMMA_POS):
        raise ValidationError(f"unknown pooling key {key!r}")

    def group_of(instance: SubstitutionInstance):
        if key == POOL_LEMMA:
            return instance.target.lemma
        return (instance.target.lemma, instance.target.pos)

    pools: dict[object, set[str]] = {}
    for instance in instances:
        pool = pools.setdefault(group_of(instance), set())
        pool.update(entry.sub for entry in instance.gold)

    pooled: list[SubstitutionInstance] = []
    counts = {"instances": 0, "dropped_empty_pool": 0}
    for instance in instances:
        candidates = tuple(sorted(pools[group_of(instance)]))
        if not candidates:
            counts["dropped_empty_pool"] += 1
            continue
        updated = SubstitutionInstance(
            id=instance.id,
            sentence=instance.sentence,
            target=instance.target,
            candidates=candidates,
            gold=instance.gold,
        )
        updated.validate()
        pooled.append(updated)
        counts["instances"] += 1
    return pooled, counts
