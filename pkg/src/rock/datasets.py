"""Benchmark dataset loading, writing, and synthetic fixture generation.

Two on-disk formats are supported: the two-alternative XML corpus format
(items with ``asks-for`` and ``most-plausible-alternative`` attributes and
``p``/``a1``/``a2`` children) and a tab-separated cause/effect/distractor
format with a required header. Both round-trip losslessly through the
writers below.
"""

from __future__ import annotations

import csv
import hashlib
import io
import random
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

from .backend.wire import canonical_json
from .errors import ParseError, UnknownAttribute, WrongColumnCount
from .events import AsksFor, BenchmarkInstance, Choice, Event

GLUCOSE_COLUMNS = ("source_id", "cause", "effect", "distractor")


@dataclass(frozen=True)
class Dataset:
    name: str
    instances: tuple[BenchmarkInstance, ...]

    def __post_init__(self):
        if not self.instances:
            raise ParseError(f"dataset {self.name!r} is empty")
        ids = [i.source_id for i in self.instances]
        if len(set(ids)) != len(ids):
            raise ParseError(f"dataset {self.name!r} has duplicate source ids")

    def __len__(self) -> int:
        return len(self.instances)


def dataset_hash(dataset: Dataset) -> str:
    return hashlib.sha256(canonical_json(dataset_to_payload(dataset))).hexdigest()[:16]


def dataset_to_payload(dataset: Dataset) -> dict:
    return {
        "name": dataset.name,
        "instances": [
            {
                "source_id": inst.source_id,
                "premise": inst.premise.text,
                "choice_a": inst.choice_a.text,
                "choice_b": inst.choice_b.text,
                "asks_for": inst.asks_for.value,
                "label": inst.label.value,
            }
            for inst in dataset.instances
        ],
    }


def dataset_from_payload(payload: dict) -> Dataset:
    try:
        instances = tuple(
            BenchmarkInstance(
                premise=Event(row["premise"]),
                choice_a=Event(row["choice_a"]),
                choice_b=Event(row["choice_b"]),
                asks_for=AsksFor(row["asks_for"]),
                label=Choice(row["label"]),
                source_id=row["source_id"],
            )
            for row in payload["instances"]
        )
        return Dataset(name=payload["name"], instances=instances)
    except (KeyError, ValueError) as exc:
        raise ParseError(f"invalid dataset payload: {exc}") from exc


# -- XML two-alternative corpus -------------------------------------------------


def load_copa(path: str | Path, name: str | None = None) -> Dataset:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return parse_copa_xml(text, origin=str(path), name=name or path.stem)


def parse_copa_xml(text: str, origin: str = "<memory>", name: str = "copa") -> Dataset:
    path = origin
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    instances = []
    for item in root.iter("item"):
        item_id = item.get("id")
        if item_id is None:
            raise ParseError(f"{path}: item without an id attribute")
        asks_raw = item.get("asks-for")
        if asks_raw not in ("cause", "effect"):
            raise UnknownAttribute(f"{path}: item {item_id}: asks-for={asks_raw!r}")
        label_raw = item.get("most-plausible-alternative")
        if label_raw not in ("1", "2"):
            raise UnknownAttribute(f"{path}: item {item_id}: most-plausible-alternative={label_raw!r}")
        parts = {}
        for tag in ("p", "a1", "a2"):
            el = item.find(tag)
            if el is None or not (el.text or "").strip():
                raise ParseError(f"{path}: item {item_id}: missing or empty <{tag}>")
            parts[tag] = el.text
        try:
            instances.append(
                BenchmarkInstance(
                    premise=Event(parts["p"]),
                    choice_a=Event(parts["a1"]),
                    choice_b=Event(parts["a2"]),
                    asks_for=AsksFor(asks_raw),
                    label=Choice.CHOICE_A if label_raw == "1" else Choice.CHOICE_B,
                    source_id=item_id,
                )
            )
        except ValueError as exc:
            raise ParseError(f"{path}: item {item_id}: {exc}") from exc
    return Dataset(name=name, instances=tuple(instances))


def write_copa_xml(dataset: Dataset, path: str | Path) -> None:
    root = ET.Element("copa-corpus")
    for inst in dataset.instances:
        item = ET.SubElement(
            root,
            "item",
            {
                "id": inst.source_id,
                "asks-for": inst.asks_for.value,
                "most-plausible-alternative": "1" if inst.label is Choice.CHOICE_A else "2",
            },
        )
        ET.SubElement(item, "p").text = inst.premise.text
        ET.SubElement(item, "a1").text = inst.choice_a.text
        ET.SubElement(item, "a2").text = inst.choice_b.text
    tree = ET.ElementTree(root)
    ET.indent(tree)
    tree.write(path, encoding="UTF-8", xml_declaration=True)


# -- tab-separated cause/effect/distractor ---------------------------------------
#
# Instances always ask for the effect: the cause is the premise, the true
# effect is the first alternative, so the label is constant.


def load_glucose_d1(path: str | Path, name: str | None = None) -> Dataset:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return parse_glucose_tsv(text, origin=str(path), name=name or path.stem)


def parse_glucose_tsv(text: str, origin: str = "<memory>", name: str = "glucose-d1") -> Dataset:
    path = origin
    reader = csv.reader(io.StringIO(text), delimiter="\t")
    rows = list(reader)
    if not rows:
        raise ParseError(f"{path}: missing header line")
    header = tuple(rows[0])
    if header != GLUCOSE_COLUMNS:
        raise ParseError(f"{path}: expected header {GLUCOSE_COLUMNS}, got {header}")
    if len(rows) == 1:
        raise ParseError(f"{path}: no instances after the header")
    instances = []
    for line_number, row in enumerate(rows[1:], start=2):
        if len(row) != 4:
            raise WrongColumnCount(line_number, expected=4, got=len(row))
        source_id, cause, effect, distractor = row
        try:
            instances.append(
                BenchmarkInstance(
                    premise=Event(cause),
                    choice_a=Event(effect),
                    choice_b=Event(distractor),
                    asks_for=AsksFor.EFFECT,
                    label=Choice.CHOICE_A,
                    source_id=source_id,
                )
            )
        except ValueError as exc:
            raise ParseError(f"{path}: line {line_number}: {exc}") from exc
    return Dataset(name=name, instances=tuple(instances))


def write_glucose_tsv(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(GLUCOSE_COLUMNS)
        for inst in dataset.instances:
            writer.writerow(
                [inst.source_id, inst.premise.text, inst.choice_a.text, inst.choice_b.text]
            )


# -- synthetic fixtures -----------------------------------------------------------

_AGENTS = ("the gardener", "a neighbor", "the student", "the driver", "a shopkeeper", "the child")
_ACTIONS = (
    "watered the plants",
    "locked the front door",
    "missed the morning bus",
    "finished the report",
    "dropped the glass jar",
    "turned off the lights",
    "found a lost wallet",
    "painted the fence",
)
_OUTCOMES = (
    "the floor got wet",
    "the room went dark",
    "everyone applauded",
    "the meeting started late",
    "the alarm rang twice",
    "the street stayed quiet",
)


def _sentence(rng: random.Random, idx: int) -> str:
    return f"{rng.choice(_AGENTS).capitalize()} {rng.choice(_ACTIONS)} ({idx})."


def synth_copa(n: int, seed: int = 0, name: str = "synthetic-copa") -> Dataset:
    """Schema-faithful synthetic stand-in for the two-alternative XML corpus."""
    rng = random.Random(seed)
    instances = []
    for i in range(1, n + 1):
        premise = f"{rng.choice(_OUTCOMES).capitalize()} ({i})."
        instances.append(
            BenchmarkInstance(
                premise=Event(premise),
                choice_a=Event(_sentence(rng, i)),
                choice_b=Event(_sentence(rng, i + n)),
                asks_for=rng.choice((AsksFor.CAUSE, AsksFor.EFFECT)),
                label=rng.choice((Choice.CHOICE_A, Choice.CHOICE_B)),
                source_id=str(i),
            )
        )
    return Dataset(name=name, instances=tuple(instances))


def synth_glucose(n: int = 153, seed: int = 1, name: str = "synthetic-glucose-d1") -> Dataset:
    rng = random.Random(seed)
    instances = []
    for i in range(1, n + 1):
        instances.append(
            BenchmarkInstance(
                premise=Event(_sentence(rng, i)),
                choice_a=Event(f"{rng.choice(_OUTCOMES).capitalize()} ({i}a)."),
                choice_b=Event(f"{rng.choice(_OUTCOMES).capitalize()} ({i}b)."),
                asks_for=AsksFor.EFFECT,
                label=Choice.CHOICE_A,
                source_id=f"g{i}",
            )
        )
    return Dataset(name=name, instances=tuple(instances))
