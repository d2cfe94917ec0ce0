"""Tests for the command-line front end."""

import csv
import json

import pytest

from levylibor import bundled_setup, setup_to_dict, zero_strike_caplet_value
from levylibor.cli import build_parser, main


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestValidate:
    def test_bundled_setup_passes(self, capsys):
        code, out, _ = run_cli(["validate"], capsys)
        assert code == 0
        assert out.count("[ok]") == 5

    def test_bad_setup_fails_with_report(self, tmp_path, capsys):
        raw = setup_to_dict(bundled_setup())
        raw["bond_prices"][2] = raw["bond_prices"][1] * 1.02
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(raw))
        code, out, _ = run_cli(["validate", "--setup", str(path)], capsys)
        assert code == 1
        assert "[FAIL]" in out

    def test_unreadable_setup_is_a_structured_error(self, capsys):
        code, _, err = run_cli(["validate", "--setup", "/no/such/file.json"],
                               capsys)
        assert code == 2
        assert "error:" in err


class TestPriceCaplets:
    def test_zero_strike_forward_identity(self, capsys):
        code, out, _ = run_cli(
            ["price-caplets", "--rate", "9", "--strike", "0",
             "--paths", "20000", "--seed", "7"], capsys)
        assert code == 0
        rows = list(csv.DictReader(out.splitlines()))
        assert len(rows) == 1
        row = rows[0]
        assert row["instrument"] == "caplet"
        target = zero_strike_caplet_value(bundled_setup(), 9)
        price, se = float(row["price"]), float(row["std_error"])
        assert abs(price - target) <= 3.0 * se

    def test_out_of_range_rate_is_rejected(self, capsys):
        code, _, err = run_cli(
            ["price-caplets", "--rate", "12", "--paths", "1000"], capsys)
        assert code == 2
        assert "rate index" in err

    def test_moneyness_grid_row_count(self, capsys):
        code, out, _ = run_cli(
            ["price-caplets", "--rate", "2", "--moneyness", "0.9,1.0,1.1",
             "--paths", "500", "--scheme", "frozen", "--substeps", "2"],
            capsys)
        assert code == 0
        rows = list(csv.DictReader(out.splitlines()))
        assert len(rows) == 3
        assert {r["scheme"] for r in rows} == {"frozen"}


class TestPriceSwaptions:
    def test_explicit_contract(self, capsys):
        code, out, _ = run_cli(
            ["price-swaptions", "--expiry", "2", "--end", "4",
             "--strike", "0.045", "--paths", "500", "--substeps", "2"],
            capsys)
        assert code == 0
        rows = list(csv.DictReader(out.splitlines()))
        assert len(rows) == 1
        assert rows[0]["instrument"] == "swaption_2_4"
        assert rows[0]["end_index"] == "4"

    def test_expiry_without_end_is_rejected(self, capsys):
        code, _, err = run_cli(
            ["price-swaptions", "--expiry", "2", "--paths", "100"], capsys)
        assert code == 2
        assert "--end" in err

    def test_default_grid_runs_all_pairs(self, capsys):
        code, out, _ = run_cli(
            ["price-swaptions", "--paths", "200", "--substeps", "1",
             "--moneyness", "1.0"], capsys)
        assert code == 0
        rows = list(csv.DictReader(out.splitlines()))
        assert len(rows) == 8


class TestCompare:
    def test_byte_identical_reruns(self, tmp_path, capsys):
        out_a = tmp_path / "a.csv"
        out_b = tmp_path / "b.csv"
        for out in (out_a, out_b):
            code, _, _ = run_cli(
                ["compare", "--paths", "10", "--seed", "1",
                 "--out", str(out)], capsys)
            assert code == 0
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_surface_files_written(self, tmp_path, capsys):
        prefix = tmp_path / "surf"
        code, _, _ = run_cli(
            ["compare", "--paths", "10", "--seed", "1",
             "--out", str(tmp_path / "c.csv"), "--surface-out", str(prefix)],
            capsys)
        assert code == 0
        frozen = (tmp_path / "surf_frozen.dat").read_text()
        assert frozen.startswith("# caplet implied-vol difference")
        assert (tmp_path / "surf_taylor.dat").exists()

    def test_schemes_must_include_full(self, capsys):
        code, _, err = run_cli(
            ["compare", "--paths", "10", "--seed", "1",
             "--schemes", "frozen,taylor"], capsys)
        assert code == 2
        assert "full" in err


class TestParser:
    def test_unknown_scheme_exits_with_usage(self):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["price-caplets", "--scheme", "euler"])
        assert exc.value.code == 2

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_entry_point_is_exposed(self):
        import importlib.metadata as md
        eps = md.entry_points()
        scripts = eps.select(group="console_scripts", name="levylibor")
        assert any(ep.value == "levylibor.cli:main" for ep in scripts)
