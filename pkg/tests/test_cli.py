import csv
import hashlib
import os
import shutil
from pathlib import Path

import pytest

from conftest import scenario_text
from hansim.cli import cmd_compare, cmd_run, cmd_sweep, main

GOLDEN = Path(__file__).parent / "golden" / "dcube-seed7"
# verbatim copies; every file is covered by the manifest
VERBATIM = ("summary.txt", "coordinated/delays.csv", "baseline/delays.csv")


def tree_digest(root: Path):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def write_golden(out: Path):
    shutil.rmtree(GOLDEN, ignore_errors=True)
    GOLDEN.mkdir(parents=True)
    for rel in VERBATIM:
        (GOLDEN / rel).parent.mkdir(parents=True, exist_ok=True)
        shutil.copy(out / rel, GOLDEN / rel)
    lines = [f"{h}  {rel}\n" for rel, h in tree_digest(out).items()]
    (GOLDEN / "SHA256SUMS").write_text("".join(lines))


def read_manifest():
    rows = (line.split("  ", 1) for line in (GOLDEN / "SHA256SUMS").read_text().splitlines())
    return {rel: h for h, rel in rows}


def test_dcube_golden(tmp_path):
    main(["run", "dcube", "--seed", "7", "--out", str(tmp_path), "-q"])
    if os.environ.get("HANSIM_REGEN_GOLDEN"):
        write_golden(tmp_path)
    assert tree_digest(tmp_path) == read_manifest()
    for rel in VERBATIM:
        assert (tmp_path / rel).read_bytes() == (GOLDEN / rel).read_bytes()
    assert "peak reduction:" in (tmp_path / "summary.txt").read_text()


def test_byte_identical_reruns(tmp_path):
    for run in ("a", "b"):
        assert main(["run", "setting2", "--seed", "11", "--out", str(tmp_path / run), "-q"]) == 0
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")


def test_missing_scenario(capsys):
    assert main(["run", "missing.han"]) == 1
    assert "no such scenario file" in capsys.readouterr().err


def test_invalid_scenario_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.han"
    bad.write_text(scenario_text("[devices]\nx = type2 power=1 min_dcd=2h max_dcp=1h\n"))
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "line 7" in capsys.readouterr().err


def test_unwritable_output_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "empty", "--out", str(blocker / "sub"), "-q"]) == 2


def test_row_counts_and_layout(tmp_path):
    report = cmd_run("setting2", out=tmp_path, quiet=True)
    loads = [p for p in report.paths if p.name.startswith("load_")]
    assert {p.parent.name for p in loads} == {"coordinated", "baseline"}
    for p in loads:
        with p.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["time_s", "load_kw"]
        assert len(rows) - 1 == 5 * 3600
    with (tmp_path / "coordinated" / "delays.csv").open() as fh:
        assert next(csv.reader(fh)) == ["device", "request_time_s", "first_on_s", "delay_s"]


def test_empty_scenario(tmp_path):
    report = cmd_compare("empty", out=tmp_path, quiet=True)
    for s in report.summaries.values():
        assert s.peak_kw == 0
    assert report.peak_reduction is None
    text = (tmp_path / "summary.txt").read_text()
    assert "peak reduction: n/a" in text and "std reduction: n/a" in text
    lines = (tmp_path / "baseline" / "load_total.csv").read_text().splitlines()[1:]
    assert all(line.endswith(",0.0000") for line in lines)


def test_four_device_compare_exact_half(tmp_path):
    path = tmp_path / "four.han"
    path.write_text(scenario_text(
        "[devices]\nd = type2 power=1 min_dcd=15min max_dcp=30min count=4\n"
        "[arrivals]\nd = explicit on@0\n"))
    report = cmd_compare(str(path), out=tmp_path / "o", quiet=True)
    assert report.peak_reduction == 0.5


def test_single_value_sweep_matches_run(tmp_path):
    rows = cmd_sweep("mindcd-sweep", "min_dcd_s", [600], out=tmp_path / "s", jobs=1, quiet=True)
    path = tmp_path / "ten.han"
    path.write_text(scenario_text(
        "[devices]\nac = type2 power=1.0 min_dcd=10min max_dcp=30min count=30\n"
        "[arrivals]\nac = explicit on@0\n"))
    report = cmd_compare(str(path), out=tmp_path / "r", quiet=True)
    by_mode = {r[1]: r for r in rows}
    for mode, s in report.summaries.items():
        row = by_mode[mode.value]
        assert row[2:5] == [f"{s.peak_kw:.4f}", f"{s.mean_kw:.4f}", f"{s.std_kw:.4f}"]
    header = (tmp_path / "s" / "sweep.csv").read_text().splitlines()[0]
    assert header == "value,mode,peak_kw,mean_kw,std_kw,avg_delay_s"


def test_sweep_parallel_equals_serial(tmp_path):
    args = ("delay-sweep", "r", ["1/6", "1/2"])
    serial = cmd_sweep(*args, fixed=[("contenders", 10)], out=tmp_path / "a", jobs=1, quiet=True)
    parallel = cmd_sweep(*args, fixed=[("contenders", 10)], out=tmp_path / "b", jobs=2, quiet=True)
    assert serial == parallel
    assert [r[:2] for r in serial] == [["1/6", "coordinated"], ["1/6", "baseline"],
                                      ["1/2", "coordinated"], ["1/2", "baseline"]]


def test_sweep_cli_flags(tmp_path, capsys):
    code = main(["sweep", "delay-sweep", "--param", "r", "--values", "1/3",
                 "--set", "contenders=5", "--out", str(tmp_path), "--jobs", "1"])
    assert code == 0
    assert capsys.readouterr().out.startswith("1/3,coordinated,")


def test_bad_sweep_values(capsys):
    assert main(["sweep", "delay-sweep", "--param", "r", "--values", "abc", "-q"]) == 1


def test_literal_flag_runs(tmp_path):
    report = cmd_run("mindcd-sweep", out=tmp_path, mode="coordinated", literal=True, quiet=True)
    # literal admission keeps every saturated device running
    (summary,) = report.summaries.values()
    assert summary.peak_kw == 30


def test_skip_flag(tmp_path):
    assert main(["compare", "mindcd-sweep", "--skip", "30min", "--out", str(tmp_path), "-q"]) == 0


def test_usage_error_exit():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
