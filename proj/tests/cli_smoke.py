"""Exit-code contract of the command-line tool."""

import subprocess
import sys
import tempfile
from pathlib import Path

cli, root = sys.argv[1], Path(sys.argv[2])
failures = 0


def expect(code, args, what):
    global failures
    got = subprocess.run([cli] + args, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL).returncode
    status = "ok" if got == code else "FAILED"
    print(f"{status}: {what} -> {got} (want {code})")
    failures += got != code


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    uniform = str(root / "configs" / "uniform.ini")
    (tmp / "bad.ini").write_text("[experiment]\nhorizon = 10\nwat = 1\n[environment]\nkind = synthetic\n"
                                 "distribution = uniform\n")
    (tmp / "log.csv").write_text("round_id,gt_score\n0,0.1\n1,0.2\n")
    (tmp / "short.ini").write_text("[experiment]\nhorizon = 5\nruns = 1\npolicies = sps\n[environment]\n"
                                   "kind = score_log\npath = log.csv\nsampling = without_replacement\n")
    (tmp / "blocker").write_text("x")

    expect(0, ["validate", "--config", uniform], "validate bundled config")
    expect(0, ["oracle", "--config", uniform, "--at", "0.1,0.5"], "oracle")
    expect(0, ["run", "--config", uniform, "--horizon", "200", "--runs", "2", "--out", str(tmp / "ok")], "small run")
    expect(1, ["validate", "--config", str(tmp / "bad.ini")], "unknown key")
    expect(1, ["validate", "--config", str(tmp / "missing.ini")], "missing config file")
    expect(1, ["run", "--config", uniform, "--set", "experiment.alpha=2"], "alpha out of range")
    expect(1, ["frobnicate"], "unknown subcommand")
    expect(2, ["run", "--config", str(tmp / "short.ini"), "--out", str(tmp / "short")], "log exhausted")
    expect(3, ["run", "--config", uniform, "--horizon", "100", "--runs", "1", "--out", str(tmp / "blocker" / "x")],
           "unwritable output")
    if not (tmp / "ok" / "summary.csv").exists() or not (tmp / "ok" / "meta.json").exists():
        print("FAILED: run did not write summary.csv and meta.json")
        failures += 1

sys.exit(1 if failures else 0)
