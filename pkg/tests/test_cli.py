import json
from fractions import Fraction

import pytest

from fsccert.channel import identity_channel
from fsccert.policy import render_policy_text, uniform_policy
from fsccert.encoding import render_channel_text
from scripts.fscv import EXIT_BUDGET, EXIT_INVALID, EXIT_OK, EXIT_USAGE, main

BSC_TEXT = """fscv1
states 1
init 1
kernel 0 0 0 3/4
kernel 0 0 1 1/4
kernel 0 1 0 1/4
kernel 0 1 1 3/4
update 0 0 0 0
update 0 0 1 0
update 0 1 0 0
update 0 1 1 0
"""


def records(out: str) -> list[dict]:
    return [json.loads(line) for line in out.splitlines() if line.strip()]


@pytest.fixture
def family_file(tmp_path):
    def make(N: int, variant: str):
        path = tmp_path / f"{variant}{N}.fscv"
        assert main(["family", str(N), variant, "--out", str(path)]) == EXIT_OK
        return path
    return make


@pytest.fixture
def identity_file(tmp_path):
    path = tmp_path / "identity.fscv"
    path.write_text(render_channel_text(identity_channel()))
    return path


def test_validate_family_file(family_file, capsys):
    path = family_file(1, "good")
    capsys.readouterr()
    assert main(["validate", str(path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("VALID")
    assert "hash:" in out


def test_validate_row_sum_broken(tmp_path, capsys):
    path = tmp_path / "broken.fscv"
    path.write_text(BSC_TEXT.replace("kernel 0 0 1 1/4", "kernel 0 0 1 1/8"))
    assert main(["validate", str(path)]) == EXIT_INVALID
    assert "(s=0, x=0) sums to 7/8" in capsys.readouterr().out


def test_validate_missing_update(tmp_path, capsys):
    path = tmp_path / "partial.fscv"
    path.write_text(BSC_TEXT.replace("update 0 1 1 0\n", ""))
    assert main(["validate", str(path)]) == EXIT_INVALID
    assert "update missing for (s=0, x=1, y=1)" in capsys.readouterr().out


def test_family_rejects_zero_delay(capsys):
    assert main(["family", "0", "good"]) == EXIT_USAGE
    assert "N must be >= 1" in capsys.readouterr().err


def test_value_target_records(family_file, capsys):
    path = family_file(1, "good")
    capsys.readouterr()
    code = main(["value", str(path), "--n", "3", "--k", "2", "--normalized", "--records"])
    assert code == EXIT_OK
    config, value = records(capsys.readouterr().out)
    assert config["record"] == "config" and config["command"] == "value"
    assert "workers" not in config
    assert value["record"] == "value"
    assert Fraction(value["radius"]) <= Fraction(1, 4)
    assert Fraction(value["lower"]) <= Fraction(1, 3) <= Fraction(value["upper"])


def test_value_target_needs_k(family_file, capsys):
    path = family_file(1, "bad")
    assert main(["value", str(path), "--n", "2"]) == EXIT_USAGE
    assert "needs --k" in capsys.readouterr().err


def test_value_over_budget_exits_nonzero(identity_file, capsys):
    code = main(["value", str(identity_file), "--n", "1", "--k", "2", "--strategy", "grid", "--budget", "600"])
    assert code == EXIT_BUDGET
    err = capsys.readouterr().err
    assert "4097" in err
    assert "largest feasible k is 0" in err


def test_value_report_mode(identity_file, capsys):
    code = main(["value", str(identity_file), "--n", "1", "--M", "4", "--records"])
    assert code == EXIT_OK
    config, value = records(capsys.readouterr().out)
    assert config["mode"] == "report"
    assert value["provenance"]["strategy"] == "report"
    assert value["provenance"]["M"] == 4
    assert Fraction(value["lower"]) <= 1 <= Fraction(value["upper"])


def test_value_heuristic(family_file, capsys):
    path = family_file(1, "good")
    capsys.readouterr()
    code = main(["value", str(path), "--n", "3", "--heuristic", "--records", "--restarts", "2"])
    assert code == EXIT_OK
    _, result = records(capsys.readouterr().out)
    assert result["record"] == "heuristic"
    assert result["restarts"] == 2
    assert Fraction(result["value"]) <= 1 + Fraction(1, 10**6)


def test_table_records(capsys):
    assert main(["table", "--N", "1", "--n-max", "3", "--records"]) == EXIT_OK
    rows = records(capsys.readouterr().out)[1:]
    assert [(row["n"], row["good"], row["bad"], row["indistinguishable"]) for row in rows] == [
        (1, "0", "0", True),
        (2, "0", "0", True),
        (3, "1/3", "0", False),
    ]


def test_table_rejects_empty_range(capsys):
    assert main(["table", "--n-min", "4", "--n-max", "2"]) == EXIT_USAGE
    assert "invalid configuration" in capsys.readouterr().err


def test_certify_and_verify(family_file, tmp_path, capsys):
    good = family_file(1, "good")
    bad = family_file(1, "bad")
    cert = tmp_path / "good1.cert.json"
    code = main(["certify", str(good), "--q", "1/2", "--k", "1", "--n-max", "6", "--M-max", "6",
                 "--out", str(cert)])
    assert code == EXIT_OK
    assert "n=3, M=2" in capsys.readouterr().out

    assert main(["verify", str(cert), "--channel", str(good)]) == EXIT_OK
    assert "VERIFIED: n=3, M=2, verdict=holds" in capsys.readouterr().out
    assert main(["verify", str(cert), "--channel", str(bad)]) == EXIT_INVALID
    assert "REJECTED" in capsys.readouterr().out


def test_verify_rejects_edited_file(family_file, tmp_path, capsys):
    good = family_file(1, "good")
    cert = tmp_path / "good1.cert.json"
    assert main(["certify", str(good), "--q", "1/2", "--k", "1", "--out", str(cert)]) == EXIT_OK
    data = json.loads(cert.read_text())
    data["r"] = "1/2"
    cert.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
    capsys.readouterr()
    assert main(["verify", str(cert)]) == EXIT_INVALID


def test_certify_exhausted(family_file, capsys):
    bad = family_file(1, "bad")
    capsys.readouterr()
    code = main(["certify", str(bad), "--q", "1/2", "--k", "2", "--n-max", "2", "--M-max", "2", "--records"])
    assert code == EXIT_USAGE
    lines = records(capsys.readouterr().out)
    assert lines[-1]["record"] == "exhausted"
    assert [cell[2] for cell in lines[-1]["frontier"]] == ["fails"] * 4


@pytest.fixture
def uniform2_file(tmp_path):
    path = tmp_path / "uniform2.policy"
    path.write_text(render_policy_text(uniform_policy(2)))
    return path


def test_policy_replay(identity_file, uniform2_file, capsys):
    code = main(["policy", str(identity_file), str(uniform2_file), "--grid", "1",
                 "--trajectory", "01", "01", "--records"])
    assert code == EXIT_OK
    config, row = records(capsys.readouterr().out)
    assert config["command"] == "policy"
    assert row["horizon"] == 2
    assert Fraction(row["lower"]) <= 2 <= Fraction(row["upper"])
    # identity: y = x, so histories with x != y never occur
    assert row["unreachable_coordinates"] == 2
    assert row["grid"]["l1_distance"] == "5/2"
    assert Fraction(row["grid"]["lower"]) <= 0 <= Fraction(row["grid"]["upper"])
    assert row["trajectory"]["mass"] == "1/4"


def test_policy_law_dump(identity_file, uniform2_file, capsys):
    assert main(["policy", str(identity_file), str(uniform2_file), "--law", "--normalized"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("I(X^2 -> Y^2) / 2 in [")
    law_lines = sorted(line for line in out.splitlines() if line.endswith(" 1/4"))
    assert law_lines == ["0 00 00 0,0,0 1/4", "0 01 01 0,0,0 1/4", "0 10 10 0,0,0 1/4", "0 11 11 0,0,0 1/4"]


def test_policy_rejects_bad_input(identity_file, uniform2_file, tmp_path, capsys):
    broken = tmp_path / "broken.policy"
    broken.write_text("horizon 1\nt 1 x - y - p1\n")
    assert main(["policy", str(identity_file), str(broken)]) == EXIT_INVALID
    assert main(["policy", str(identity_file), str(uniform2_file), "--trajectory", "0", "0"]) == EXIT_INVALID
    with pytest.raises(SystemExit):
        main(["policy", str(identity_file), str(uniform2_file), "--trajectory", "0a", "01"])


def test_value_sandwich(family_file, capsys):
    path = family_file(1, "good")
    capsys.readouterr()
    code = main(["value", str(path), "--n", "3", "--k", "2", "--sandwich", "--restarts", "2", "--records"])
    assert code == EXIT_OK
    _, value, sandwich = records(capsys.readouterr().out)
    assert value["record"] == "value"
    assert sandwich["record"] == "sandwich"
    assert sandwich["consistent"] is True
    assert "certified interval contains closed form" in sandwich["checks"]


def test_table_audit(capsys):
    code = main(["table", "--N", "1", "--n-max", "64", "--audit", "1/2", "--k-max", "4", "--records"])
    assert code == EXIT_OK
    audits = [row for row in records(capsys.readouterr().out) if row["record"] == "audit"]
    assert [(row["variant"], row["status"]) for row in audits] == [
        ("good", "agree"),
        ("bad", "capacity-below-q"),
    ]
    assert audits[0]["least_n"] == [1, 3, 3, 4, 4]


def test_value_report_mode_normalized_keeps_precision(identity_file, capsys):
    code = main(["value", str(identity_file), "--n", "1", "--M", "4", "--normalized", "--records"])
    assert code == EXIT_OK
    _, value = records(capsys.readouterr().out)
    # rounding lands on the 2^-23 grid of the 2^-20 evaluation, not a 2^-7 grid
    assert Fraction(value["estimate"]) == 1
    assert Fraction(value["radius"]) == 1 + Fraction(2, 2 ** 20)


@pytest.mark.slow
def test_machine_output_independent_of_workers(identity_file, family_file, capsys):
    good = family_file(1, "good")
    capsys.readouterr()
    runs = {
        "value": ["value", str(identity_file), "--n", "2", "--M", "2", "--records"],
        "certify": ["certify", str(good), "--q", "1/2", "--k", "1", "--n-max", "6", "--M-max", "6",
                    "--records"],
    }
    for argv in runs.values():
        outputs = []
        for workers in ("1", "4", "8"):
            assert main(argv + ["--workers", workers, "--seed", "3"]) == EXIT_OK
            outputs.append(capsys.readouterr().out)
        assert outputs[0] == outputs[1] == outputs[2]
