import json
import math
import warnings

import pytest

from causalsynth.errors import (
    BifSemanticError,
    BifSyntaxError,
    ConfigError,
    DatasetFormatError,
    NativeFormatError,
)
from causalsynth.io import (
    RunConfig,
    config_hash,
    file_sha256,
    load_config,
    load_network,
    parse_bif,
    parse_native,
    print_native,
    read_attempt_log,
    read_coverage,
    read_dataset,
    read_skeletons,
    read_values,
    write_attempt_log,
    write_coverage,
    write_dataset,
    write_skeletons,
)
from causalsynth.pipeline import AttemptFailure, AttemptRecord, CoverageEntry, SynthRecord
from causalsynth.channel import Mismatch
from causalsynth.scm import sample_dataset, validate
from conftest import network_path

MINIMAL_BIF = """network tiny { }
variable A { type discrete [ 2 ] { a0, a1 }; }
variable B { type discrete [ 3 ] { b0, b1, b2 }; }
probability ( A ) { table 0.4, 0.6; }
probability ( B | A ) {
  table 0.1, 0.2, 0.7, 0.3, 0.3, 0.4;
}
"""


# --------------------------------------------------------------------------
# BIF


def test_bif_asia_loads(asia):
    assert len(asia.variables) == 8
    assert len(asia.dag.edges) == 8
    assert validate(asia) == []
    assert asia.names[0] == "asia"
    tub = {v.name: v for v in asia.variables}["tub"]
    assert tub.parents == ("asia",)
    assert tub.cpt == ((0.05, 0.95), (0.01, 0.99))


def test_bif_table_is_parent_major_child_fastest():
    scm = parse_bif(MINIMAL_BIF)
    b = scm.variables[1]
    assert b.cpt == ((0.1, 0.2, 0.7), (0.3, 0.3, 0.4))


def test_bif_per_config_rows_any_order():
    text = MINIMAL_BIF.replace(
        "  table 0.1, 0.2, 0.7, 0.3, 0.3, 0.4;",
        "  ( a1 ) 0.3, 0.3, 0.4;\n  ( a0 ) 0.1, 0.2, 0.7;")
    assert parse_bif(text).variables[1].cpt == \
        parse_bif(MINIMAL_BIF).variables[1].cpt


def test_bif_comments_do_not_shift_positions():
    text = "// banner\nnetwork n { }\nvariable A {\n  type discrete [ 2 ] { x, y }\n}\n"
    with pytest.raises(BifSyntaxError) as err:
        parse_bif(text)
    assert err.value.line == 5
    assert err.value.col == 1
    assert "';'" in str(err.value)


def test_bif_missing_semicolon_positioned():
    text = MINIMAL_BIF.replace("table 0.4, 0.6;", "table 0.4, 0.6")
    with pytest.raises(BifSyntaxError) as err:
        parse_bif(text)
    assert err.value.line is not None
    assert err.value.col is not None


def test_bif_state_count_mismatch():
    text = MINIMAL_BIF.replace("[ 2 ] { a0, a1 }", "[ 3 ] { a0, a1 }")
    with pytest.raises(BifSemanticError, match="declares 3 states"):
        parse_bif(text)


def test_bif_undeclared_child():
    text = MINIMAL_BIF + "probability ( C ) { table 1.0; }\n"
    with pytest.raises(BifSemanticError, match="undeclared variable 'C'"):
        parse_bif(text)


def test_bif_missing_probability_block():
    text = MINIMAL_BIF.replace("probability ( A ) { table 0.4, 0.6; }\n", "")
    with pytest.raises(BifSemanticError, match="no probability block"):
        parse_bif(text)


def test_bif_duplicate_probability_block():
    text = MINIMAL_BIF + "probability ( A ) { table 0.4, 0.6; }\n"
    with pytest.raises(BifSemanticError):
        parse_bif(text)


def test_bif_wrong_value_count():
    text = MINIMAL_BIF.replace("table 0.4, 0.6;", "table 0.4, 0.3, 0.3;")
    with pytest.raises(BifSemanticError):
        parse_bif(text)


def test_bif_unknown_parent_state_in_row():
    text = MINIMAL_BIF.replace(
        "  table 0.1, 0.2, 0.7, 0.3, 0.3, 0.4;",
        "  ( a9 ) 0.1, 0.2, 0.7;\n  ( a1 ) 0.3, 0.3, 0.4;")
    with pytest.raises(BifSemanticError):
        parse_bif(text)


def test_bif_renormalizes_tiny_drift_with_warning():
    text = MINIMAL_BIF.replace("table 0.4, 0.6;", "table 0.4000001, 0.6;")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        scm = parse_bif(text)
    assert any("renormalizing" in str(w.message) for w in caught)
    row = scm.variables[0].cpt[0]
    assert math.fsum(row) == pytest.approx(1.0, abs=1e-12)


def test_bif_rejects_large_drift():
    text = MINIMAL_BIF.replace("table 0.4, 0.6;", "table 0.5, 0.6;")
    with pytest.raises(BifSemanticError, match="beyond tolerance"):
        parse_bif(text)


# --------------------------------------------------------------------------
# native format


def test_native_round_trip_byte_identity(chain3, diamond4):
    for scm, name in ((chain3, "chain3.json"), (diamond4, "diamond4.json")):
        with open(network_path(name), "r", encoding="utf-8") as handle:
            text = handle.read()
        assert print_native(parse_native(text)) == text


def test_native_rejects_missing_keys():
    with pytest.raises(NativeFormatError, match="variables"):
        parse_native(json.dumps({"format": "causalsynth/network", "version": 1}))


def test_native_rejects_wrong_format():
    with pytest.raises(NativeFormatError):
        parse_native(json.dumps({"format": "other", "version": 1, "variables": []}))


def test_native_row_length_error_names_variable(chain3):
    doc = json.loads(print_native(chain3))
    doc["variables"][0]["cpt"] = [[0.6, 0.3, 0.1]]
    with pytest.raises(NativeFormatError, match="'A'"):
        parse_native(json.dumps(doc))


def test_load_network_dispatches_by_extension(tmp_path):
    path = tmp_path / "tiny.bif"
    path.write_text(MINIMAL_BIF, encoding="utf-8")
    net = load_network(str(path))
    assert net.source == MINIMAL_BIF
    assert net.path == str(path)
    assert [v.name for v in net.scm.variables] == ["A", "B"]

    native = tmp_path / "tiny.json"
    native.write_text(print_native(net.scm), encoding="utf-8")
    again = load_network(str(native))
    assert again.scm == net.scm

    other = tmp_path / "tiny.txt"
    other.write_text("not a network", encoding="utf-8")
    with pytest.raises(NativeFormatError):
        load_network(str(other))


# --------------------------------------------------------------------------
# JSONL datasets


def test_skeletons_round_trip_bit_faithful(diamond4, tmp_path):
    data = sample_dataset(diamond4, 25, 3)
    path = str(tmp_path / "skel.jsonl")
    write_skeletons(path, data, {"seed": 3})
    header, rows = read_skeletons(path)
    assert header["format"] == "causalsynth/skeletons"
    assert header["seed"] == 3
    assert len(rows) == 25
    for (i, skel), original in zip(rows, data):
        assert skel.v == original.v
        assert skel.u == original.u  # exact float round trip


def test_skeletons_u_range_checked(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(
        '{"format": "causalsynth/skeletons", "version": 1}\n'
        '{"id": 0, "v": {"A": "x"}, "u": {"A": 1.0}}\n', encoding="utf-8")
    with pytest.raises(DatasetFormatError) as err:
        read_skeletons(str(path))
    assert err.value.lineno == 2


def test_skeletons_key_mismatch_rejected(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(
        '{"format": "causalsynth/skeletons", "version": 1}\n'
        '{"id": 0, "v": {"A": "x"}, "u": {"B": 0.5}}\n', encoding="utf-8")
    with pytest.raises(DatasetFormatError):
        read_skeletons(str(path))


def test_dataset_round_trip(chain3, tmp_path):
    skeletons = sample_dataset(chain3, 4, 9)
    records = [SynthRecord(s, f"A = {s.v['A']}", k + 1, "template")
               for k, s in enumerate(skeletons)]
    path = str(tmp_path / "data.jsonl")
    write_dataset(path, records, {"k_max": 10}, ids=[3, 5, 7, 9])
    header, rows = read_dataset(path)
    assert [i for i, _ in rows] == [3, 5, 7, 9]
    for (_, got), want in zip(rows, records):
        assert got.skeleton.v == want.skeleton.v
        assert got.skeleton.u == want.skeleton.u
        assert got.document == want.document
        assert got.attempts_used == want.attempts_used
        assert got.realizer_id == want.realizer_id


def test_coverage_round_trip(chain3, tmp_path):
    skeletons = sample_dataset(chain3, 2, 1)
    entries = [
        CoverageEntry(0, skeletons[0], (
            AttemptFailure("mismatch", (Mismatch("A", "on", "off"),)),
            AttemptFailure("error", (), "HTTP 500"),
        )),
        CoverageEntry(1, skeletons[1], (
            AttemptFailure("mismatch", (Mismatch("B", "on", None),)),
        )),
    ]
    path = str(tmp_path / "cov.jsonl")
    write_coverage(path, entries)
    _, got = read_coverage(path)
    assert len(got) == 2
    assert got[0].index == 0
    assert got[0].skeleton.v == skeletons[0].v
    first, second = got[0].attempts
    assert first.kind == "mismatch"
    assert first.mismatches == (Mismatch("A", "on", "off"),)
    assert second.kind == "error"
    assert second.error == "HTTP 500"
    assert got[1].attempts[0].mismatches[0].extracted is None


def test_attempt_log_round_trip(tmp_path):
    entries = [
        AttemptRecord(0, ("accepted",), 1),
        AttemptRecord(1, ("rejected", "error", "accepted"), 3),
        AttemptRecord(2, ("rejected",) * 4, None),
    ]
    path = str(tmp_path / "att.jsonl")
    write_attempt_log(path, entries, {"seed": 0})
    _, got = read_attempt_log(path)
    assert list(got) == entries


def test_read_values_dispatch(chain3, tmp_path):
    data = sample_dataset(chain3, 3, 2)
    skel_path = str(tmp_path / "skel.jsonl")
    write_skeletons(skel_path, data)
    records = [SynthRecord(s, "doc", 1, "template") for s in data]
    data_path = str(tmp_path / "data.jsonl")
    write_dataset(data_path, records)
    for path in (skel_path, data_path):
        _, rows = read_values(path)
        assert [s.v for _, s in rows] == [s.v for s in data]


def test_missing_header_rejected(tmp_path):
    path = tmp_path / "x.jsonl"
    path.write_text('{"id": 0}\n', encoding="utf-8")
    with pytest.raises(DatasetFormatError):
        read_skeletons(str(path))


def test_wrong_kind_rejected(chain3, tmp_path):
    path = str(tmp_path / "skel.jsonl")
    write_skeletons(path, sample_dataset(chain3, 1, 0))
    with pytest.raises(DatasetFormatError):
        read_dataset(path)


def test_truncated_line_reports_lineno(chain3, tmp_path):
    path = tmp_path / "skel.jsonl"
    write_skeletons(str(path), sample_dataset(chain3, 2, 0))
    text = path.read_text(encoding="utf-8").splitlines()
    text[2] = text[2][: len(text[2]) // 2]
    path.write_text("\n".join(text) + "\n", encoding="utf-8")
    with pytest.raises(DatasetFormatError) as err:
        read_skeletons(str(path))
    assert err.value.lineno == 3


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    with pytest.raises(DatasetFormatError):
        read_skeletons(str(path))


# --------------------------------------------------------------------------
# run config


def good_config(tmp_path, **overrides):
    doc = {
        "network": "net.json",
        "realizer": {"kind": "template"},
        "m": 100,
        "k_max": 5,
        "seed": 1,
        "alpha": 0.05,
        "max_cond_size": 2,
        "typicality_quantile": 0.06,
        "outputs": {"dataset": "out.jsonl"},
    }
    doc.update(overrides)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def test_load_config_round_trip(tmp_path):
    cfg = load_config(good_config(tmp_path))
    assert cfg.network == "net.json"
    assert cfg.realizer == {"kind": "template"}
    assert cfg.m == 100
    assert cfg.k_max == 5
    assert cfg.outputs == {"dataset": "out.jsonl"}


def test_load_config_defaults(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({
        "network": "n.json", "realizer": {"kind": "template"}, "m": 10,
    }), encoding="utf-8")
    cfg = load_config(str(path))
    assert cfg.k_max == 10
    assert cfg.alpha == 0.05
    assert cfg.max_cond_size == 2


@pytest.mark.parametrize("overrides", [
    {"m": -1},
    {"k_max": 0},
    {"alpha": 0.0},
    {"alpha": 1.0},
    {"max_cond_size": -1},
    {"typicality_quantile": 0.0},
    {"realizer": {"kind": "nope"}},
    {"realizer": {"kind": "backdoor"}},
    {"realizer": {"kind": "http", "url": "https://x"}},
    {"realizer": "template"},
    {"outputs": ["a"]},
    {"m": "many"},
])
def test_load_config_rejects_bad_values(tmp_path, overrides):
    with pytest.raises(ConfigError):
        load_config(good_config(tmp_path, **overrides))


def test_load_config_rejects_bad_json(tmp_path):
    path = tmp_path / "run.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_config_hash_stable_and_sensitive(tmp_path):
    cfg = load_config(good_config(tmp_path))
    other = load_config(good_config(tmp_path, seed=2))
    assert config_hash(cfg) == config_hash(cfg)
    assert config_hash(cfg) != config_hash(other)
    assert len(config_hash(cfg)) == 16
    # dict input with reordered keys hashes identically
    doc = cfg.as_dict()
    reordered = dict(reversed(list(doc.items())))
    assert config_hash(doc) == config_hash(reordered)


def test_file_sha256(tmp_path):
    path = tmp_path / "f.txt"
    path.write_text("abc", encoding="utf-8")
    first = file_sha256(str(path))
    assert first == file_sha256(str(path))
    path.write_text("abd", encoding="utf-8")
    assert file_sha256(str(path)) != first
