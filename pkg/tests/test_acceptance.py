"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
from __future__ import annotations

import subprocess
import sys
import time
from pathlib import Path

import pytest

import acceptance_cases as cases

HERE = Path(__file__).resolve().parent
_results: dict = {}


def _run(k, capsys):
    if k not in _results:
        start = time.perf_counter()
        _results[k] = (cases.CRITERIA[k](), time.perf_counter() - start)
    res, secs = _results[k]
    with capsys.disabled():
        print(f"\nCRITERION {k}: {'PASS' if res.passed else 'FAIL'} ({secs:.0f} s) {res.summary}")
    return res


@pytest.mark.parametrize("k", sorted(cases.CRITERIA))
def test_criterion(k, capsys):
    res = _run(k, capsys)
    assert res.passed, res.summary + "\n" + res.report


def test_criterion_9_rerun_is_byte_identical(tmp_path, capsys):
    subprocess.run([sys.executable, str(HERE / "acceptance_cases.py"), str(tmp_path)], check=True,
                   capture_output=True, cwd=HERE)
    mismatched = []
    for k in sorted(cases.CRITERIA):
        res = _run(k, capsys)
        if (tmp_path / f"criterion_{k}.csv").read_text(encoding="utf-8") != res.report:
            mismatched.append(k)
    ok = not mismatched
    with capsys.disabled():
        print(f"\nCRITERION 9: {'PASS' if ok else 'FAIL'} reports of criteria 1-8 byte-identical across processes"
              + ("" if ok else f" (differ: {mismatched})"))
    assert ok
