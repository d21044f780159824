import json
import os

import pytest

from mtt import syntax as C
from mtt.corpus import ManifestError, load_manifest, run_corpus, run_entry
from mtt.surface import load_file

from conftest import MANIFEST

NEGATIVES = [e for e in load_manifest(MANIFEST).entries if e.verdict == "reject"]


def test_manifest_shape(manifest):
    accept = [e for e in manifest.entries if e.verdict == "accept"]
    assert {os.path.basename(e.path) for e in accept} == {
        "combinators.mtt", "comonad.mtt", "guarded.mtt", "streams.mtt", "adjunction.mtt", "crisp.mtt",
    }
    assert len(NEGATIVES) == 20
    assert all(e.anchor for e in manifest.entries)
    assert all(e.rule for e in NEGATIVES)


def test_every_entry_passes(manifest):
    rep = run_corpus(manifest)
    assert rep.ok, [r.record() for r in rep.results if not r.ok]
    assert rep.passed == len(manifest.entries) == 26


@pytest.mark.parametrize("entry", NEGATIVES, ids=lambda e: os.path.basename(e.path))
def test_negative_entry_fails_with_its_rule(manifest, entry):
    r = run_entry(manifest.root, entry)
    assert r.ok and r.actual == entry.rule
    assert r.diagnostic["rule"] == entry.rule


def test_combinator_normal_forms(programs):
    got = [C.pr_tm(d.normal) for d in programs["combinators"].directives if d.kind == "normalize"]
    # triv (mod 1 true) reduces to true; the rest are frozen from the manifest
    assert got[0] == "true"
    assert got == ["true", "true", "(mod μ false)", "(mod μ∘ν true)", "(mod ρ false)"]


def test_guarded_lob_checks_within_bounded_fuel(manifest):
    for name in ("guarded.mtt", "streams.mtt"):
        prog, d = load_file(os.path.join(manifest.root, name), fuel=10**4)
        assert d is None, d
        assert "lob" in prog.checker.axioms


def test_wrong_verdict_is_a_report_row(tmp_path):
    (tmp_path / "ok.mtt").write_text("def a @ m : Bool = true\n", encoding="utf-8")
    (tmp_path / "bad.mtt").write_text("def a @ m : Bool = U\n", encoding="utf-8")
    (tmp_path / "m.json").write_text(json.dumps({"entries": [
        {"path": "ok.mtt", "theory": "trivial", "verdict": "reject", "rule": "conv", "anchor": "x"},
        {"path": "bad.mtt", "theory": "trivial", "verdict": "accept", "anchor": "y"},
        {"path": "missing.mtt", "theory": "trivial", "verdict": "accept", "anchor": "z"},
        {"path": "ok.mtt", "theory": "guarded", "verdict": "accept", "anchor": "w"},
        {"path": "ok.mtt", "theory": "trivial", "verdict": "accept", "anchor": "v", "normal_forms": ["true"]},
    ]}), encoding="utf-8")
    rep = run_corpus(tmp_path / "m.json")
    assert [r.ok for r in rep.results] == [False, False, False, False, False]
    assert [r.actual for r in rep.results][:3] == ["accept", "tm/code", "io"]
    assert "guarded" in rep.results[3].detail
    assert "normal forms" in rep.results[4].detail
    assert not rep.ok and rep.passed == 0
    assert {"path", "expected", "actual", "ok"} <= set(rep.records()[0])


@pytest.mark.parametrize("raw, msg", [
    ([], "entries"),
    ({"entries": [{"path": "a", "theory": "t", "verdict": "accept"}]}, "anchor"),
    ({"entries": [{"path": "a", "theory": "t", "verdict": "maybe", "anchor": "s"}]}, "verdict"),
    ({"entries": [{"path": "a", "theory": "t", "verdict": "reject", "anchor": "s"}]}, "rule"),
])
def test_manifest_errors(tmp_path, raw, msg):
    p = tmp_path / "m.json"
    p.write_text(json.dumps(raw), encoding="utf-8")
    with pytest.raises(ManifestError, match=msg):
        load_manifest(p)


def test_parallel_run_matches_serial(manifest):
    serial = run_corpus(manifest)
    parallel = run_corpus(manifest, jobs=2)
    strip = [{k: v for k, v in r.items() if k != "seconds"} for r in serial.records()]
    assert strip == [{k: v for k, v in r.items() if k != "seconds"} for r in parallel.records()]
