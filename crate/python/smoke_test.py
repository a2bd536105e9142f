"""Smoke test for the Python bindings.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

import json
import pathlib

import statechan_py as sc

SCENARIOS = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "scenarios"


def load(name):
    return sc.Scenario.from_json((SCENARIOS / f"{name}.json").read_text())


def check_withheld_share():
    s = load("msfe_withhold_share")
    t = s.run()
    assert t.violations() == [], t.violations()
    assert t.settlement == "abort"
    assert t.deltas() == {1: 6, 2: 6, 3: -12}
    settlement, deltas, _ = s.ideal()
    assert settlement == "abort" and deltas == {1: 6, 2: 6}


def check_lottery():
    t = load("lottery_honest").run()
    assert t.final_escrow == 0 and t.outcome == "terminated"
    assert len(t.outputs[1]) == 10
    assert sc.lottery_collateral(4) == 9
    assert sc.lottery_winner([b"\x00", b"\x05", b"\x01"]) == 1


def check_trace_round_trip():
    t = load("duplex_payments").run()
    back = sc.Trace.from_json(t.to_json())
    assert back.deltas() == t.deltas() == {1: -6, 2: 6}
    assert json.loads(t.to_json())["settlement"] == "final_split"
    faulty = load("msfe_honest").run(inject_fault=True)
    assert faulty.violations()


def check_sweep():
    cases, failures = sc.sweep("msfe", [2, 3])
    assert cases > 50 and failures == [], failures


def check_nizk():
    x = "1f3c5a7e9b2d4f6081a3c5e7092b4d6f8091a2b3c4d5e6f708192a3b4c5d6e7f"
    h = "03d8250b8ad60806e0b30603bbd558b414d064b0e56971e9e7b6d6e287ebc05014"
    px, py = sc.nizk_statement(x, h)
    kx, ky, s = sc.nizk_prove_hex(x, h, seed=3)
    assert sc.nizk_verify_hex(h, px, py, kx, ky, s)
    assert not sc.nizk_verify_hex(h, py, px, kx, ky, s)
    try:
        sc.nizk_statement("zz", h)
    except ValueError:
        pass
    else:
        raise AssertionError("bad hex accepted")


if __name__ == "__main__":
    for check in [check_withheld_share, check_lottery, check_trace_round_trip, check_sweep, check_nizk]:
        check()
        print(f"ok  {check.__name__}")
