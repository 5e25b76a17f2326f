import csv
import io
import json
from pathlib import Path

import pytest

from opi_triangle import cli
from reference_data import SQUARE_MATRIX, TRIANGLE_MATRIX, WORD_COUNTS

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7])
def test_enumerate_golden(capsys, n):
    code, out, _ = run(capsys, "enumerate", "--n", str(n))
    assert code == 0
    assert out == (GOLDEN / f"enumerate_n{n}.json").read_text()
    rec = json.loads(out)
    assert rec["counts"]["correlators"] == len(rec["correlators"])
    if n in WORD_COUNTS:
        assert len(rec["correlators"]) == WORD_COUNTS[n]


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_matrix_golden(capsys, n):
    code, out, _ = run(capsys, "matrix", "--n", str(n))
    assert code == 0
    assert out.encode() == (GOLDEN / f"matrix_n{n}.csv").read_bytes()
    assert "\r\n" in out


@pytest.mark.parametrize("n,ref", [(3, TRIANGLE_MATRIX), (4, SQUARE_MATRIX)])
def test_matrix_is_transpose(capsys, n, ref):
    _, out, _ = run(capsys, "matrix", "--n", str(n))
    rows = list(csv.reader(io.StringIO(out)))
    body = [[int(v) for v in r[1:]] for r in rows[1:]]
    assert [list(c) for c in zip(*body)] == ref


def test_enumerate_text_and_out(tmp_path, capsys):
    target = tmp_path / "e.txt"
    code, out, _ = run(capsys, "enumerate", "--n", "4", "--format", "text", "--out", str(target))
    assert code == 0 and out == ""
    assert "jjjj" in target.read_text()


@pytest.mark.parametrize("argv", [
    ["enumerate", "--n", "2"],
    ["enumerate", "--n", "10"],
    ["bound", "--n", "6", "--exact", "--no-ledger"],
    ["scan", "--k", "3"],
    ["finner", "--p", "1,2"],
    ["finner"],
    ["finner", "--p", "0.5,0.5,0.5"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == cli.EXIT_USAGE
    assert err


def test_argparse_error_exit_code(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["bound"])
    assert info.value.code == cli.EXIT_USAGE


def test_bound_exact_and_ledger(tmp_path, capsys):
    ledger = tmp_path / "ledger.jsonl"
    code, out, _ = run(capsys, "bound", "--n", "5", "--exact", "--ledger", str(ledger))
    assert code == 0
    rec = json.loads(out)
    assert rec["exact"] == "5/11"
    assert len(cli.read_ledger(ledger)) == 1


def test_bound_not_converged(capsys):
    code, out, _ = run(capsys, "bound", "--n", "6", "--max-iter", "1", "--tol", "1e-14",
                       "--no-ledger")
    assert code == cli.EXIT_NOT_CONVERGED
    assert json.loads(out)["status"] != "converged"


def test_bound_checkpoint_resume(tmp_path, capsys):
    ck = tmp_path / "ck.json"
    code, out, _ = run(capsys, "bound", "--n", "6", "--checkpoint", str(ck), "--no-ledger")
    assert code == 0
    first = json.loads(out)["bound"]
    code, out, _ = run(capsys, "bound", "--n", "6", "--resume", str(ck), "--no-ledger")
    assert code == 0
    again = json.loads(out)
    assert again["bound"] == pytest.approx(first, abs=1e-8)
    assert again["iterations"] <= 3


def test_certify_codes(capsys):
    code, out, _ = run(capsys, "certify", "--n", "6")
    assert code == 0
    assert "sqrt(2)" in out.replace(" ", "")
    code, _, err = run(capsys, "certify", "--n", "7")
    assert code == cli.EXIT_NO_CERTIFICATE
    assert err


def test_finner(capsys):
    code, out, _ = run(capsys, "finner", "--p", "1/16,1/72,1/96")
    assert code == 0
    rec = json.loads(out)
    assert rec["valid"] is True
    code, out2, _ = run(capsys, "finner", "--e", f"{rec['correlators']['e2']},{rec['correlators']['e3o']}")
    assert json.loads(out2)["probs"]["p111"] == pytest.approx(1 / 16)


def test_verify_theorem_empty(capsys):
    code, out, _ = run(capsys, "verify-theorem", "--k", "2")
    assert code == 0 and out == "EMPTY\n"


def test_verify_theorem_budget(tmp_path, capsys):
    ck = tmp_path / "ck.json"
    code, _, _ = run(capsys, "verify-theorem", "--k", "4", "--time-limit", "0",
                     "--checkpoint", str(ck))
    assert code == cli.EXIT_NOT_CONVERGED
    code, out, _ = run(capsys, "verify-theorem", "--k", "4", "--resume", str(ck))
    assert code == 0 and out == "EMPTY\n"


def test_scan_csv(capsys):
    code, out, _ = run(capsys, "scan", "--k", "1")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["k", "strategy_hash", "e2_avg", "e3_avg", "opi_dev", "finner_margin"]
    assert len(rows) == 65
    code, out, _ = run(capsys, "scan", "--k", "1", "--opi-only")
    assert len(list(csv.reader(io.StringIO(out)))) == 1


def test_scan_seeded_reproducible(capsys):
    _, a, _ = run(capsys, "scan", "--k", "5", "--samples", "40", "--seed", "3")
    _, b, _ = run(capsys, "scan", "--k", "5", "--samples", "40", "--seed", "3")
    assert a == b


def test_region_uses_ledger(tmp_path, capsys):
    ledger = tmp_path / "l.jsonl"
    rec = {"polygon": 9, "mode": "cumulative", "direction": "max", "split": "open",
           "bound": 0.3748}
    ledger.write_text(json.dumps(rec) + "\n")
    code, out, _ = run(capsys, "region", "--max-n", "4", "--ledger", str(ledger))
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    kinds = [r[0] for r in rows[1:]]
    assert kinds.count("positivity") == 3
    assert kinds.count("finner") == 1
    labels = [r[1] for r in rows if r[0] == "bound"]
    assert "n=9 cumulative max" in labels
    assert "n=4 cumulative min" in labels


def test_fit_from_ledger(tmp_path, capsys):
    ledger = tmp_path / "l.jsonl"
    series = {3: 1.0, 4: 0.5, 5: 0.4545, 6: 0.4142, 7: 0.3960, 8: 0.3848, 9: 0.3748}
    ledger.write_text("".join(
        json.dumps({"polygon": n, "mode": "cumulative", "direction": "max", "split": "open",
                    "bound": b}) + "\n" for n, b in series.items()))
    code, out, _ = run(capsys, "fit", "--ledger", str(ledger))
    assert code == 0
    assert 0.3 < json.loads(out)["limit"] < 0.4


def test_manifest_digest_stable(tmp_path, capsys):
    digests = []
    for i in range(2):
        m = tmp_path / f"m{i}.json"
        run(capsys, "matrix", "--n", "4", "--manifest", str(m))
        data = json.loads(m.read_text())
        digests.append((data["input_digest"], data["output_digest"]))
        assert data["command"] == "matrix"
        assert data["parameters"] == {"n": 4}
    assert digests[0] == digests[1]


def test_stable_formatting():
    assert cli.stable(1 / 3) == 0.333333333
    from fractions import Fraction
    assert cli.stable({"a": Fraction(1, 3)}) == {"a": "1/3"}
