import pytest

from rock.backend.wire import canonical_json
from rock.datasets import (
    Dataset,
    dataset_from_payload,
    dataset_hash,
    dataset_to_payload,
    load_copa,
    load_glucose_d1,
    synth_copa,
    synth_glucose,
    write_copa_xml,
    write_glucose_tsv,
)
from rock.errors import ParseError, UnknownAttribute, WrongColumnCount
from rock.events import AsksFor, Choice


class TestCopaLoader:
    def test_dev_sized_fixture_parses_to_100(self, tmp_path):
        path = tmp_path / "copa-dev.xml"
        write_copa_xml(synth_copa(100, seed=0), path)
        assert len(load_copa(path)) == 100

    def test_test_sized_fixture_parses_to_500(self, tmp_path):
        path = tmp_path / "copa-test.xml"
        write_copa_xml(synth_copa(500, seed=1), path)
        assert len(load_copa(path)) == 500

    def test_round_trip_lossless(self, tmp_path):
        original = synth_copa(40, seed=3, name="rt")
        path = tmp_path / "rt.xml"
        write_copa_xml(original, path)
        loaded = load_copa(path, name="rt")
        assert loaded == original

    def test_missing_alternative_names_item(self, tmp_path):
        path = tmp_path / "broken.xml"
        path.write_text(
            """<copa-corpus>
            <item id=\"7\" asks-for=\"cause\" most-plausible-alternative=\"1\">
            <p>Premise text.</p><a1>First alternative.</a1></item>
            </copa-corpus>"""
        )
        with pytest.raises(ParseError, match="item 7"):
            load_copa(path)

    def test_unknown_asks_for_value(self, tmp_path):
        path = tmp_path / "bad-attr.xml"
        path.write_text(
            """<copa-corpus>
            <item id=\"3\" asks-for=\"reason\" most-plausible-alternative=\"1\">
            <p>P.</p><a1>A.</a1><a2>B.</a2></item>
            </copa-corpus>"""
        )
        with pytest.raises(UnknownAttribute, match="asks-for"):
            load_copa(path)

    def test_attribute_mapping(self, tmp_path):
        path = tmp_path / "map.xml"
        path.write_text(
            """<copa-corpus>
            <item id=\"1\" asks-for=\"effect\" most-plausible-alternative=\"2\">
            <p>P.</p><a1>A.</a1><a2>B.</a2></item>
            </copa-corpus>"""
        )
        ds = load_copa(path)
        assert ds.instances[0].asks_for is AsksFor.EFFECT
        assert ds.instances[0].label is Choice.CHOICE_B


class TestGlucoseLoader:
    def test_fixture_parses_to_153(self, tmp_path):
        path = tmp_path / "glucose-d1.tsv"
        write_glucose_tsv(synth_glucose(153), path)
        ds = load_glucose_d1(path)
        assert len(ds) == 153
        assert all(i.asks_for is AsksFor.EFFECT for i in ds.instances)
        assert all(i.label is Choice.CHOICE_A for i in ds.instances)

    def test_round_trip_lossless(self, tmp_path):
        original = synth_glucose(25, seed=9, name="rt")
        path = tmp_path / "rt.tsv"
        write_glucose_tsv(original, path)
        assert load_glucose_d1(path, name="rt") == original

    def test_empty_after_header_rejected(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("source_id\tcause\teffect\tdistractor\n")
        with pytest.raises(ParseError):
            load_glucose_d1(path)

    def test_wrong_column_count_names_line(self, tmp_path):
        path = tmp_path / "cols.tsv"
        path.write_text(
            "source_id\tcause\teffect\tdistractor\n"
            "g1\tThe cause.\tThe effect.\tThe distractor.\n"
            "g2\tThe cause.\tThe effect.\n"
        )
        with pytest.raises(WrongColumnCount, match="line 3"):
            load_glucose_d1(path)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "nohdr.tsv"
        path.write_text("g1\tThe cause.\tThe effect.\tThe distractor.\n")
        with pytest.raises(ParseError, match="header"):
            load_glucose_d1(path)


class TestDatasetPayload:
    def test_json_round_trip_and_stable_hash(self):
        ds = synth_copa(30, seed=4, name="h")
        payload = dataset_to_payload(ds)
        back = dataset_from_payload(payload)
        assert back == ds
        assert dataset_hash(back) == dataset_hash(ds)
        assert canonical_json(dataset_to_payload(back)) == canonical_json(payload)

    def test_duplicate_source_ids_rejected(self):
        ds = synth_copa(2, seed=0)
        with pytest.raises(ParseError):
            Dataset(name="dup", instances=(ds.instances[0], ds.instances[0]))
