"""Command-line runner: config handling, exit codes, report artifacts."""

import json
import subprocess
import sys

import pytest

from expmart.cli import main
from expmart.config import (
    PRESETS,
    ConfigError,
    RunConfig,
    apply_preset,
    load_ini,
    parse_centering,
    parse_complex,
    parse_element_template,
    parse_h1_case,
    parse_h2_case,
    parse_isometry_case,
    parse_time_change,
)


# ---------------------------------------------------------------------------
# spec-string parsers

def test_parse_complex():
    assert parse_complex("1+2j") == 1 + 2j
    assert parse_complex(" -1 ") == -1
    with pytest.raises(ConfigError):
        parse_complex("one")


def test_parse_element_template():
    got = parse_element_template("1,2@0.5 + 3@1j")
    assert got == ((0.5 + 0j, (1 + 0j, 2 + 0j)), (1j, (3 + 0j,)))


def test_parse_element_template_rejects_garbage():
    for bad in ("", "1,2", "nope@1 + @"):
        with pytest.raises(ConfigError):
            parse_element_template(bad)


def test_parse_centering():
    assert parse_centering("zero").kind == "zero"
    assert parse_centering("const:1.5")(0.0) == 1.5
    pw = parse_centering("pw:0:0,1:2")
    assert pw(0.5) == 1.0
    with pytest.raises(ConfigError):
        parse_centering("linear")


def test_parse_time_change():
    assert parse_time_change("identity").kind == "identity"
    assert parse_time_change("power:2")(0.5) == 0.25
    assert parse_time_change("pw:0:0,1:1").kind == "piecewise"
    with pytest.raises(ConfigError):
        parse_time_change("sqrt")


def test_parse_h1_cases():
    named = parse_h1_case("exp-equality")
    assert named["c"] == 1.0 and named["q"] == 1.0
    tpl = parse_h1_case("template:0,1@0;c=0.5;q=4")
    assert tpl["c"] == 0.5 and tpl["q"] == 4.0 and tpl["ct"] == 0.0
    with pytest.raises(ConfigError):
        parse_h1_case("template:1@0;k=2")
    with pytest.raises(ConfigError):
        parse_h1_case("template:1@0;q=-1")


def test_parse_h2_cases():
    eq = parse_h2_case("brownian-equality")
    assert eq["target_lhs"] == 0.5
    strict = parse_h2_case("brownian-strict")
    assert strict["target_lhs"] == 1.0
    tpl = parse_h2_case("template:1@0.25;g=const:1;gt=zero")
    assert tpl["g"](0.0) == 1.0 and tpl["target_lhs"] is None
    with pytest.raises(ConfigError):
        parse_h2_case("template:1@0;width=3")


def test_parse_isometry_cases():
    assert parse_isometry_case("one")[0] == "one"
    assert parse_isometry_case("x")[1] == ((0j, (0j, 1 + 0j)),)
    with pytest.raises(ConfigError):
        parse_isometry_case("spiral")


# ---------------------------------------------------------------------------
# config objects

def test_presets_cover_documented_names():
    needed = {
        "default", "acceptance", "commutators", "lemma2-grid",
        "brownian-equality", "brownian-strict", "isometry-basic",
        "h1-random", "pde-box", "l2limit-dyadic",
    }
    assert needed <= set(PRESETS)
    cfg = apply_preset(RunConfig(), "acceptance")
    assert cfg.paths == 100_000 and cfg.grid_steps == 512
    with pytest.raises(ConfigError):
        apply_preset(RunConfig(), "nope")


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(seed=-1),
        dict(workers=0),
        dict(paths=1),
        dict(horizon=0.0),
        dict(h1_tol=0.0),
        dict(suites=("h3",)),
        dict(time_change="sqrt"),
        dict(h2_cases=("lognormal",)),
    ],
)
def test_validated_rejects_bad_configs(kwargs):
    import dataclasses
    cfg = dataclasses.replace(RunConfig(), **kwargs)
    with pytest.raises(ConfigError):
        cfg.validated()


def test_load_ini(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(
        "[run]\nseed = 5\nsuites = l2limit pde\n\n[l2limit]\nk_max = 10\n"
        "\n[pde]\nstep = 1e-3\n"
    )
    cfg = load_ini(str(p))
    assert cfg.seed == 5 and cfg.suites == ("l2limit", "pde")
    assert cfg.l2_k_max == 10 and cfg.pde_step == 1e-3


def test_load_ini_rejects_unknown_keys(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[run]\nspeed = 5\n")
    with pytest.raises(ConfigError):
        load_ini(str(p))
    p.write_text("[warp]\nfactor = 9\n")
    with pytest.raises(ConfigError):
        load_ini(str(p))
    with pytest.raises(ConfigError):
        load_ini(str(tmp_path / "missing.ini"))


# ---------------------------------------------------------------------------
# end-to-end runs (in-process main)

def _read_reports(out_dir):
    csv_text = (out_dir / "report.csv").read_text()
    doc = json.loads((out_dir / "report.json").read_text())
    return csv_text, doc


def test_single_suite_run_passes(tmp_path, capsys):
    rc = main(["l2limit", "--out-dir", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out and "[FAIL]" not in out
    csv_text, doc = _read_reports(tmp_path)
    header = csv_text.splitlines()[0].split(",")
    assert header[:4] == ["suite", "case", "kind", "seed"]
    assert {"passed", "slack", "allowance", "lhs_product", "rhs_exact"} <= set(header)
    assert doc["run"]["suites_run"] == ["l2limit"]
    assert all(c["passed"] for c in doc["cases"])


def test_no_suite_selected_prints_usage(tmp_path, capsys):
    rc = main(["--out-dir", str(tmp_path)])
    assert rc == 2
    assert "usage" in capsys.readouterr().err


def test_bad_preset_is_config_error(tmp_path, capsys):
    assert main(["all", "--preset", "warp", "--out-dir", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["all", "--config", str(tmp_path / "none.ini")]) == 2


def test_negative_seed_rejected(tmp_path):
    assert main(["l2limit", "--seed", "-3", "--out-dir", str(tmp_path)]) == 2


def test_unknown_subcommand_exits_2(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["fly", "--out-dir", str(tmp_path)])
    assert e.value.code == 2


def test_config_and_preset_are_exclusive(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["all", "--config", "a.ini", "--preset", "default"])
    assert e.value.code == 2


def test_flag_overrides_config_seed(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\nseed = 11\n")
    rc = main(["l2limit", "--config", str(ini), "--seed", "99",
               "--out-dir", str(tmp_path)])
    assert rc == 0
    _, doc = _read_reports(tmp_path)
    assert doc["run"]["seed"] == 99


def test_failing_check_exits_1(tmp_path, capsys):
    # k_max = 12 leaves the final difference-quotient norm above the 1e-3
    # bar (it is ~2^-13 sqrt(34 e) for exponent 1), an honest red
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\nsuites = l2limit\n\n[l2limit]\nk_max = 12\n")
    rc = main(["--config", str(ini), "--out-dir", str(tmp_path)])
    assert rc == 1
    assert "FAILED" in capsys.readouterr().err
    _, doc = _read_reports(tmp_path)
    assert any(not c["passed"] for c in doc["cases"])


def test_overflowing_case_exits_3_with_report(tmp_path):
    # exponent 40j: every evaluation is finite but |.|^2 leaves float64
    ini = tmp_path / "run.ini"
    ini.write_text(
        "[run]\nsuites = isometry\npaths = 2000\ngrid_steps = 32\n\n"
        "[isometry]\ncases = template:1@40j\n"
    )
    rc = main(["--config", str(ini), "--out-dir", str(tmp_path)])
    assert rc == 3
    _, doc = _read_reports(tmp_path)
    assert any(c["note"].startswith("overflow:") for c in doc["cases"])


def _strip_json_header(doc):
    return {k: v for k, v in doc.items() if k != "header"}


def test_reports_identical_across_worker_counts(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text(
        "[run]\nsuites = isometry h1 pde l2limit\npaths = 2000\ngrid_steps = 64\n"
    )
    outs = []
    for workers, tag in ((1, "a"), (3, "b")):
        out = tmp_path / tag
        rc = main(["--config", str(ini), "--workers", str(workers),
                   "--out-dir", str(out)])
        assert rc == 0
        outs.append(_read_reports(out))
    (csv_a, doc_a), (csv_b, doc_b) = outs
    assert csv_a == csv_b
    assert _strip_json_header(doc_a) == _strip_json_header(doc_b)
    assert doc_a["header"]["workers"] == 1 and doc_b["header"]["workers"] == 3


def test_seed_changes_sampled_rows(tmp_path):
    rows = []
    for seed, tag in ((1, "a"), (2, "b")):
        out = tmp_path / tag
        assert main(["isometry", "--seed", str(seed), "--paths", "2000",
                     "--grid", "64", "--out-dir", str(out)]) == 0
        rows.append(_read_reports(out)[0].splitlines()[1])
    assert rows[0] != rows[1]


def test_console_script_smoke(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "expmart.cli", "pde", "--out-dir", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "checks passed" in proc.stdout
