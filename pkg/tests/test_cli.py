import io
import json
import subprocess
import sys

import pytest

from muord.cli import RunConfig, run

L12 = {"places": [{"case": "L", "signatures": [[1, 2], [2, 1]]}],
       "weight": [[{"kappa": [5], "lambda": [5, 5]}, {"kappa": [6, 6], "lambda": [6]}]],
       "valuations": {"0/1": "0", "0/2": "1/2"}}
L21 = {"places": [{"case": "L", "signatures": [[2, 1]]}],
       "weight": [[{"kappa": [2, 2], "lambda": [1]}]],
       "valuations": {"0/1": "0"}}
U13 = {"places": [{"case": "U", "signatures": [[1, 3]]}]}


def _write(tmp_path, obj, name="in.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def _run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_analyze_reports_heights_and_degrees(tmp_path):
    code, out, _ = _run("analyze", "--input", _write(tmp_path, L12))
    rep = json.loads(out)
    assert code == 0
    place = rep["places"][0]
    assert place["heights"] == [1, 2] and place["max_degrees"] == [2, 3]


def test_analyze_inert_alpha_sequence(tmp_path):
    code, out, _ = _run("analyze", "--input", _write(tmp_path, U13))
    assert code == 0 and json.loads(out)["places"][0]["alpha_sequence"] == [0, 1, 3, 4]


@pytest.mark.parametrize("text", ["{", '{"places": [}', '{"places": [{"case": "X"}]}', "[]"])
def test_malformed_input_exits_2(tmp_path, text):
    code, out, err = _run("analyze", "--input", _write(tmp_path, text))
    assert code == 2 and out == "" and err.startswith("error:")


def test_parse_error_has_location(tmp_path):
    path = _write(tmp_path, '{"places":\n  [}')
    _, _, err = _run("analyze", "--input", path)
    assert f"{path}:2:" in err


def test_missing_file_exits_2(tmp_path):
    assert _run("analyze", "--input", str(tmp_path / "nope.json"))[0] == 2


def test_check_ordinary_passes_with_closed_form(tmp_path):
    code, out, _ = _run("check", "--input", _write(tmp_path, L21))
    rep = json.loads(out)
    cond = rep["places"][0]["conditions"][0]
    assert code == 0 and rep["verdict"] is True
    assert cond["closed_form"] == {"label": "f*a*b", "value": 2}


def test_check_boundary_failure_names_index(tmp_path):
    bad = dict(L21, valuations={"0/1": "1"})     # 2 + 1 = 3 is not < 3
    code, out, _ = _run("check", "--input", _write(tmp_path, bad))
    rep = json.loads(out)
    assert code == 1 and rep["verdict"] is False
    assert rep["failing"] == ["place 0 k=1"]


def test_check_missing_valuation_exits_2(tmp_path):
    bad = dict(L12, valuations={"0/1": "0"})
    assert _run("check", "--input", _write(tmp_path, bad))[0] == 2


def test_check_two_places(tmp_path):
    two = {"places": L12["places"] + L21["places"],
           "weight": L12["weight"] + L21["weight"],
           "valuations": {"0/1": "0", "0/2": "1/2", "1/1": "0"}}
    code, out, _ = _run("check", "--input", _write(tmp_path, two))
    rep = json.loads(out)
    assert code == 0 and [p["place"] for p in rep["places"]] == [0, 1]
    assert len(rep["places"][1]["schedule"]) == 1


def test_reports_have_no_floats(tmp_path):
    _, out, _ = _run("check", "--input", _write(tmp_path, L12))

    def walk(x):
        if isinstance(x, dict):
            for v in x.values():
                walk(v)
        elif isinstance(x, list):
            for v in x:
                walk(v)
        else:
            assert not isinstance(x, float)
    walk(json.loads(out))


@pytest.mark.parametrize("cmd,data", [("check", L12), ("check", L21), ("verify", U13)])
def test_json_deterministic_and_text_agrees(tmp_path, cmd, data):
    path = _write(tmp_path, data)
    c1, o1, _ = _run(cmd, "--input", path, "--seed", "5")
    c2, o2, _ = _run(cmd, "--input", path, "--seed", "5")
    c3, o3, _ = _run(cmd, "--input", path, "--seed", "5", "--format", "text")
    assert o1 == o2 and c1 == c2 == c3
    assert o3.rstrip().splitlines()[-1] == ("result: PASS" if c1 == 0 else "result: FAIL")


def test_verify_default_suite_passes(tmp_path):
    code, out, _ = _run("verify", "--input", _write(tmp_path, L12))
    rep = json.loads(out)
    assert code == 0 and rep["passed"] is True
    assert all(d["identity"] for d in rep["decompo"])


def test_verify_relaxed_is_informational(tmp_path):
    code, out, _ = _run("verify", "--input", _write(tmp_path, U13), "--relaxed")
    rel = json.loads(out)["places"][0]["checks"]["relaxed"]
    assert code == 0 and rel["informational"] and rel["witnesses"]


@pytest.mark.parametrize("flags", [["--grid", "1"], ["--eps", "1/2"], ["--alpha", "1"],
                                   ["--prime", "4"], ["--eps", "x"]])
def test_config_invariants(tmp_path, flags):
    assert _run("analyze", "--input", _write(tmp_path, L12), *flags)[0] == 2


def test_run_config_rejects_small_grid():
    with pytest.raises(ValueError):
        RunConfig("verify", "x", 1)


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "muord", "analyze", "--input", _write(tmp_path, U13)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["command"] == "analyze"
