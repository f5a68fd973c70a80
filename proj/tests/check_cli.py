"""Runs the crsphere binary: schema validation, byte determinism, exit codes."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

HEIS = "Im(w) - abs2(z)"
ORD6 = "Im(w) - abs2(z) - 2*Re(z^4*zbar^2)"
ORIGIN = ["--point", "0,0", "0,0"]


def run(binary, args):
    return subprocess.run([binary, *args], capture_output=True, text=True, timeout=120)


def invocations(jet_file):
    return [
        ["check", "--rho", HEIS, *ORIGIN],
        ["check", "--rho", ORD6, *ORIGIN],
        ["check", "--rho", "z*zbar + w*wbar - 1", "--point", "1,0", "0,0"],
        ["check", "--rho", HEIS, "--samples", "0", "--degree", "8"],
        ["check", "--jet-file", jet_file],
        ["ode", "--rho", HEIS],
        ["ode", "--rho", ORD6],
        ["decompose", "--rho", ORD6],
        ["decompose", "--jet-file", jet_file],
        ["crosscheck", "--rho", "Im(w) - abs2(z) - 0.1*Re(z^3*zbar^2)"],
        ["levi", "--rho", "abs2(z) - Im(w)"],
    ]


def schema_and_determinism(binary, schema_path):
    schema = json.loads(Path(schema_path).read_text())
    validator = jsonschema.Draft202012Validator(schema)
    failures = 0
    with tempfile.TemporaryDirectory() as tmp:
        jet_file = str(Path(tmp) / "jet.json")
        Path(jet_file).write_text(json.dumps({"trust": 9, "rows": [[0, 0, 1, 0, 0, -0.5], [0, 0, 0, 1, 0, 0.5],
                                                                     [1, 1, 0, 0, -1, 0]]}))
        for args in invocations(jet_file):
            first = run(binary, [*args, "--json"])
            second = run(binary, [*args, "--json"])
            label = " ".join(args)
            if first.returncode > 2:
                print(f"FAIL {label}: exit {first.returncode}: {first.stderr.strip()}")
                failures += 1
                continue
            if first.stdout != second.stdout:
                print(f"FAIL {label}: output differs between runs")
                failures += 1
            errors = sorted(validator.iter_errors(json.loads(first.stdout)), key=str)
            for e in errors:
                print(f"FAIL {label}: {e.message} at {list(e.absolute_path)}")
            failures += bool(errors)
            if not errors:
                print(f"ok   {label}")
    return failures


def exit_codes(binary):
    cases = [
        (["check", "--rho", HEIS, *ORIGIN], 0),
        (["check", "--rho", ORD6, *ORIGIN], 1),
        (["check", "--rho", "Im(w) - abs2(z)^2", *ORIGIN], 5),
        (["check", "--rho", "Im(w"], 4),
        (["check", "--rho", HEIS, "--point", "0,0", "0,1"], 5),
        (["check", "--rho", HEIS, "--degree", "2"], 3),
        (["check"], 3),
        ([], 3),
        (["--help"], 0),
        (["ode", "--rho", HEIS], 0),
        (["decompose", "--rho", HEIS], 0),
        (["crosscheck", "--rho", HEIS], 0),
        (["levi", "--rho", HEIS], 0),
    ]
    failures = 0
    for args, want in cases:
        got = run(binary, args)
        label = " ".join(args) or "(no arguments)"
        if got.returncode != want:
            print(f"FAIL {label}: exit {got.returncode}, want {want}")
            failures += 1
        elif want > 2 and not got.stderr.startswith("error["):
            print(f"FAIL {label}: no diagnostic on stderr")
            failures += 1
        else:
            print(f"ok   {label} -> {want}")
    return failures


def main():
    mode, binary = sys.argv[1], sys.argv[2]
    failures = schema_and_determinism(binary, sys.argv[3]) if mode == "schema" else exit_codes(binary)
    sys.exit(1 if failures else 0)


if __name__ == "__main__":
    main()
