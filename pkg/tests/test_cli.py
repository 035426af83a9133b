import json
from fractions import Fraction

import pytest

from commlab import fixtures as fx
from commlab.cli import build_parser, main
from commlab.core_info import JointTable
from commlab.protocol import BITS, dumps_protocol


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def p1_file(tmp_path):
    path = tmp_path / "p1.json"
    path.write_text(dumps_protocol(fx.p1()))
    return str(path)


class TestExitCodes:
    def test_ic_ok(self, capsys, p1_file, tmp_path):
        code, out, _ = run(capsys, "ic", "--protocol", p1_file, "--out", str(tmp_path / "o"))
        assert code == 0
        doc = json.loads((tmp_path / "o" / "ic.json").read_text())
        assert doc["information_cost"] == pytest.approx(1.5, abs=1e-9)
        assert (tmp_path / "o" / "point_costs.csv").exists()

    def test_malformed_json(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code, _, err = run(capsys, "ic", "--protocol", str(bad))
        assert code == 2
        assert "error:" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "ic", "--protocol", str(tmp_path / "nope.json"))
        assert code == 2

    def test_joint_not_normalized(self, capsys, tmp_path):
        doc = json.loads(fx.uniform_mu().dumps())
        doc["masses"][0]["p"] = "1/2"
        path = tmp_path / "mu.json"
        path.write_text(json.dumps(doc))
        code, _, _ = run(capsys, "ic", "--builder", "p1", "--mu", str(path))
        assert code == 2

    def test_non_power_of_two(self, capsys):
        code, _, _ = run(capsys, "decompose", "--builder", "noisy", "--n", "3")
        assert code == 2

    def test_even_T(self, capsys):
        code, _, _ = run(capsys, "boost", "--builder", "noisy", "--T", "2")
        assert code == 2

    def test_degenerate_conditioning(self, capsys, tmp_path):
        mu = JointTable([("X", BITS), ("Y", BITS)], {("1", "0"): Fraction(1, 2), ("1", "1"): Fraction(1, 2)})
        path = tmp_path / "mu.json"
        path.write_text(mu.dumps())
        code, _, err = run(capsys, "decompose", "--builder", "noisy", "--n", "2", "--mu", str(path), "--alpha", "19/20")
        assert code == 3
        assert "alpha" in err

    def test_bad_tolerance(self, capsys):
        code, _, _ = run(capsys, "ic", "--builder", "p1", "--tol", "0")
        assert code == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as info:
            main(["frobnicate"])
        assert info.value.code == 2


class TestVerify:
    def test_quick_passes(self, capsys, tmp_path):
        code, out, _ = run(capsys, "verify", "--quick", "--out", str(tmp_path))
        assert code == 0
        doc = json.loads((tmp_path / "verify.json").read_text())
        assert len(doc["checks"]) >= 20
        assert all(c["verdict"] == "pass" for c in doc["checks"])
        assert {"id", "left", "right", "relation", "tolerance", "verdict"} <= set(doc["checks"][0])

    @pytest.mark.parametrize("control", ["chi", "rectangle", "kernel", "generalized", "support"])
    def test_injection_fails(self, capsys, control):
        code, _, err = run(capsys, "verify", "--quick", "--inject", control)
        assert code == 1
        assert "FAIL" in err

    def test_same_seed_same_bytes(self, capsys, tmp_path):
        for name in ("a", "b"):
            assert run(capsys, "verify", "--quick", "--seed", "5", "--out", str(tmp_path / name))[0] == 0
        assert (tmp_path / "a" / "verify.json").read_bytes() == (tmp_path / "b" / "verify.json").read_bytes()

    def test_seed_changes_output(self, capsys, tmp_path):
        for name, seed in (("a", "5"), ("b", "6")):
            run(capsys, "verify", "--quick", "--seed", seed, "--out", str(tmp_path / name))
        assert (tmp_path / "a" / "verify.json").read_bytes() != (tmp_path / "b" / "verify.json").read_bytes()


class TestCommands:
    def test_decompose_exact(self, capsys, tmp_path):
        code, out, _ = run(capsys, "decompose", "--builder", "exact", "--n", "2", "--out", str(tmp_path))
        assert code == 0
        assert {"tree.csv", "audit.json", "leaf_protocol.json"} <= {p.name for p in tmp_path.iterdir()}
        assert json.loads((tmp_path / "audit.json").read_text())["passed"] is True

    def test_naive_and_boost(self, capsys, tmp_path):
        assert run(capsys, "naive", "--builder", "noisy", "--n", "2", "--out", str(tmp_path))[0] == 0
        assert run(capsys, "boost", "--builder", "noisy", "--T", "3", "--out", str(tmp_path))[0] == 0
        doc = json.loads((tmp_path / "boost.json").read_text())
        assert "29/4000" in json.dumps(doc)

    def test_embed(self, capsys):
        assert run(capsys, "embed", "--builder", "p1", "--n", "2")[0] == 0

    def test_couple_bernoulli(self, capsys, tmp_path):
        code, out, _ = run(capsys, "couple", "--bern", "1/2", "3/4", "--draws", "1000", "--out", str(tmp_path))
        assert code == 0
        doc = json.loads((tmp_path / "coupling.json").read_text())
        assert "2/5" in json.dumps(doc)
        rows = (tmp_path / "samples.csv").read_text().splitlines()
        assert rows[0] == "index,a,a_prime" and len(rows) == 1001

    def test_couple_reproducible(self, capsys, tmp_path):
        for name in ("a", "b"):
            run(capsys, "couple", "--bern", "1/3", "1/5", "--draws", "200", "--seed", "9", "--out", str(tmp_path / name))
        assert (tmp_path / "a" / "samples.csv").read_bytes() == (tmp_path / "b" / "samples.csv").read_bytes()

    def test_parser_lists_subcommands(self):
        text = build_parser().format_help()
        for cmd in ("ic", "decompose", "verify", "embed", "naive", "boost", "couple"):
            assert cmd in text
