import numpy as np
import pytest

from pecashflow import synthetic
from pecashflow.fund_data import record_from_arrays


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_record(called, dpi, rvpi, fund_id="F0", vintage=2010, commitment=100e6):
    return record_from_arrays(fund_id, vintage, commitment, called, dpi, rvpi)


@pytest.fixture
def small_yale():
    cfg = synthetic.GeneratorConfig({2012: 3, 2013: 3}, noise_sigma=0.0, seed=5)
    return synthetic.generate_yale_dataset(cfg)


UNIT_SCENARIO = {"name": "unit", "shocks": [{"series": "sp500", "factor": 1.0, "start_quarter": "2015Q1", "duration": 4}]}


def cli_stages(root):
    """Every CLI stage on a small dataset, as (name, argv) in dependency order."""
    import json
    from pathlib import Path

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    (root / "unit.json").write_text(json.dumps(UNIT_SCENARIO))
    d = {k: str(root / k) for k in ("synth", "m5", "ind", "cal", "td", "ti", "pred", "ev", "stress")}
    return [
        ("synth", ["synth", "--vintages", "2012:2013", "--per-vintage", "4", "--macro", "--missing-rate", "0.05",
                   "--seed", "7", "--out-dir", d["synth"]]),
        ("prepare-m5", ["prepare", "--funds", f"{d['synth']}/funds.csv", "--architecture", "direct_m5",
                        "--macro-dir", f"{d['synth']}/macro", "--seed", "7", "--out-dir", d["m5"]]),
        ("prepare-indirect", ["prepare", "--funds", f"{d['synth']}/funds.csv", "--architecture", "indirect_gru",
                              "--seed", "7", "--out-dir", d["ind"]]),
        ("calibrate", ["calibrate", "--windows", f"{d['ind']}/train_windows.bin", "--seed", "7", "--out-dir", d["cal"]]),
        ("train-direct", ["train-direct", "--windows", f"{d['m5']}/train_windows.bin", "--validation",
                          f"{d['m5']}/test_windows.bin", "--architecture", "direct_m5", "--epochs", "3",
                          "--hidden", "4,3,2", "--seed", "7", "--out-dir", d["td"]]),
        ("train-indirect", ["train-indirect", "--windows", f"{d['cal']}/train_windows_labelled.bin",
                            "--epochs", "3", "--hidden", "4,3,2", "--seed", "7", "--out-dir", d["ti"]]),
        ("predict", ["predict", "--checkpoint", f"{d['td']}/checkpoint.json", "--windows",
                     f"{d['m5']}/test_windows.bin", "--seed", "7", "--out-dir", d["pred"]]),
        ("evaluate", ["evaluate", "--checkpoint", f"{d['ti']}/checkpoint.json", "--windows",
                      f"{d['ind']}/test_windows.bin", "--train-windows", f"{d['ind']}/train_windows.bin",
                      "--curves", "--seed", "7", "--out-dir", d["ev"]]),
        ("stress", ["stress", "--checkpoint", f"{d['td']}/checkpoint.json", "--funds", f"{d['synth']}/funds.csv",
                    "--macro-dir", f"{d['synth']}/macro", "--scenario", str(root / "unit.json"),
                    "--split", f"{d['m5']}/split.json", "--seed", "7", "--out-dir", d["stress"]]),
    ]


def snapshot(directory):
    """Relative path -> bytes for every file under ``directory``."""
    from pathlib import Path

    directory = Path(directory)
    return {p.relative_to(directory).as_posix(): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


def out_dir_of(argv):
    return argv[argv.index("--out-dir") + 1]


ACCEPTANCE_LINES = []


def verdict(criterion, ok, detail):
    """Print and record one acceptance line, then fail the test if needed."""
    line = f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def info(criterion, detail):
    """An informational line that is not a pass/fail verdict."""
    line = f"INFO {criterion}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
