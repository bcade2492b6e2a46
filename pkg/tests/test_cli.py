"""Command-line surface: flags, formats, exit codes, reproducibility."""

import csv
import io
import json

import pytest

from optmean.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, build_parser, main


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_csv(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def footer_stats(text):
    stats = {}
    for line in text.splitlines():
        if line.startswith("# ") and "=" in line:
            key, _, value = line[2:].partition("=")
            stats[key] = value
    return stats


class TestEstimate:
    def test_optimal_approx_value(self, capsys):
        code, out, _ = run_cli([
            "estimate", "--scenario", "s1", "--n", "40", "--min", "2.25",
            "--median", "16", "--max", "74.25", "--method", "optimal-approx"],
            capsys)
        assert code == EXIT_OK
        row = parse_csv(out)[0]
        assert float(row["value"]) == pytest.approx(20.471, abs=1e-3)
        assert row["method"] == "optimal_approx"

    def test_hozo_threshold_value(self, capsys):
        code, out, _ = run_cli([
            "estimate", "--scenario", "s1", "--n", "40", "--min", "2.25",
            "--median", "16", "--max", "74.25", "--method", "hozo"], capsys)
        assert code == EXIT_OK
        assert float(parse_csv(out)[0]["value"]) == 16.0

    def test_missing_median_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["estimate", "--scenario", "s1", "--n", "40", "--min", "2.25",
                  "--max", "74.25"])
        assert excinfo.value.code == EXIT_USAGE

    def test_json_format(self, capsys):
        code, out, _ = run_cli([
            "estimate", "--scenario", "s2", "--n", "40", "--q1", "1",
            "--median", "2", "--q3", "3", "--method", "wan", "--format", "json"],
            capsys)
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["result"]["value"] == pytest.approx(2.0)
        assert doc["config"]["seed"] is not None

    def test_custom_weight(self, capsys):
        code, out, _ = run_cli([
            "estimate", "--scenario", "s1", "--n", "40", "--min", "0",
            "--median", "10", "--max", "20", "--method", "weighted",
            "--weight", "0.25"], capsys)
        assert code == EXIT_OK
        row = parse_csv(out)[0]
        assert float(row["value"]) == pytest.approx(0.25 * 10 + 0.75 * 10)
        assert row["method"] == "custom_weight"

    def test_sd_method(self, capsys):
        code, out, _ = run_cli([
            "estimate", "--scenario", "s1", "--n", "40", "--min", "2.25",
            "--median", "16", "--max", "74.25", "--method", "wan-sd"], capsys)
        assert code == EXIT_OK
        assert float(parse_csv(out)[0]["value"]) == pytest.approx(16.695, abs=1e-3)

    def test_batch_mode(self, tmp_path, capsys):
        src = tmp_path / "summaries.csv"
        src.write_text(
            "scenario,n,min,q1,median,q3,max\n"
            "s1,40,2.25,,16,,74.25\n"
            "s2,40,,1,2,3,\n")
        code, out, _ = run_cli([
            "estimate", "--input", str(src), "--method", "optimal-approx"], capsys)
        assert code == EXIT_OK
        rows = parse_csv(out)
        assert len(rows) == 2
        assert float(rows[0]["value"]) == pytest.approx(20.471, abs=1e-3)
        assert float(rows[1]["value"]) == pytest.approx(2.0)

    def test_batch_mode_bad_row_is_data_error(self, tmp_path, capsys):
        src = tmp_path / "summaries.csv"
        src.write_text("scenario,n,min,q1,median,q3,max\ns1,40,9,,2,,74\n")
        code, _, err = run_cli([
            "estimate", "--input", str(src)], capsys)
        assert code == EXIT_DATA
        assert "line 2" in err

    def test_missing_input_file_is_data_error(self, capsys):
        code, _, err = run_cli(["estimate", "--input", "no-such-file.csv"], capsys)
        assert code == EXIT_DATA


class TestWeights:
    def test_s3_exact_pair_at_n5(self, capsys):
        code, out, _ = run_cli([
            "weights", "--scenario", "s3", "--n", "5"], capsys)
        assert code == EXIT_OK
        row = parse_csv(out)[0]
        assert float(row["exact_w1"]) == pytest.approx(0.4, abs=0.002)
        assert float(row["exact_w2"]) == pytest.approx(0.4, abs=0.002)

    def test_s2_approx_column(self, capsys):
        code, out, _ = run_cli(["weights", "--scenario", "s2", "--n", "5"], capsys)
        row = parse_csv(out)[0]
        assert float(row["approx_w1"]) == pytest.approx(0.778, abs=1e-9)

    def test_grid_matches_published_start(self, capsys):
        code, out, _ = run_cli([
            "weights", "--scenario", "s1", "--grid", "5:29:4"], capsys)
        assert code == EXIT_OK
        got = [float(r["exact_w1"]) for r in parse_csv(out)]
        published = [0.5514, 0.4346, 0.3682, 0.3232, 0.2903, 0.2642, 0.2435]
        assert got == pytest.approx(published, abs=0.002)

    def test_bad_grid_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["weights", "--scenario", "s1", "--grid", "6:20:2"])
        assert excinfo.value.code == EXIT_USAGE

    def test_n_and_grid_together_rejected(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["weights", "--scenario", "s1", "--n", "5", "--grid", "5:9:4"])
        assert excinfo.value.code == EXIT_USAGE

    def test_mc_backend_small(self, capsys):
        code, out, _ = run_cli([
            "weights", "--scenario", "s1", "--n", "5", "--backend", "mc",
            "--reps", "50000", "--seed", "3"], capsys)
        assert code == EXIT_OK
        row = parse_csv(out)[0]
        assert float(row["exact_w1"]) == pytest.approx(0.5514, abs=0.03)
        assert row["backend"] == "mc"
        assert float(row["std_error"]) > 0


class TestFit:
    def test_regenerated_fit_json(self, capsys):
        code, out, _ = run_cli([
            "fit", "--scenario", "s2", "--grid", "5:61:4"], capsys)
        assert code == EXIT_OK
        doc = json.loads(out)
        fit = doc["fit"]
        assert fit["model"].startswith("w(n) = 0.7")
        assert fit["c2"] < 0
        assert fit["residual"] < 1e-3
        assert fit["n_points"] == 15

    def test_fit_from_weight_table_file(self, tmp_path, capsys):
        table = tmp_path / "weights.csv"
        code, out, _ = run_cli([
            "weights", "--scenario", "s1", "--grid", "5:41:4",
            "--output", str(table)], capsys)
        assert code == EXIT_OK
        code, out, _ = run_cli([
            "fit", "--scenario", "s1", "--input", str(table)], capsys)
        assert code == EXIT_OK
        fit = json.loads(out)["fit"]
        assert fit["c1"] == pytest.approx(4.0, abs=1.0)
        assert fit["c2"] == pytest.approx(-0.75, abs=0.1)

    def test_underdetermined_input_is_data_error(self, tmp_path, capsys):
        table = tmp_path / "weights.csv"
        run_cli(["weights", "--scenario", "s1", "--grid", "5:9:4",
                 "--output", str(table)], capsys)
        code, _, err = run_cli([
            "fit", "--scenario", "s1", "--input", str(table)], capsys)
        assert code == EXIT_DATA
        assert "at least 4" in err


class TestSimulate:
    def test_small_run_shape(self, capsys):
        code, out, _ = run_cli([
            "simulate", "--distribution", "normal", "--scenario", "s1",
            "--grid", "5:9:4", "--reps", "2000", "--seed", "5"], capsys)
        assert code == EXIT_OK
        rows = parse_csv(out)
        assert {r["method"] for r in rows} == {"sample_mean", "hozo",
                                               "optimal_approx"}
        assert {r["n"] for r in rows} == {"5", "9"}
        control = [r for r in rows if r["method"] == "sample_mean"]
        assert all(float(r["rmse"]) == 1.0 for r in control)

    def test_method_list_flag(self, capsys):
        code, out, _ = run_cli([
            "simulate", "--distribution", "normal", "--scenario", "s2",
            "--methods", "sample_mean,wan", "--grid", "9:9:4", "--reps", "1000"],
            capsys)
        assert code == EXIT_OK
        assert {r["method"] for r in parse_csv(out)} == {"sample_mean", "wan"}

    def test_incompatible_method_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["simulate", "--distribution", "normal", "--scenario", "s1",
                  "--methods", "wan", "--grid", "5:9:4", "--reps", "1000"])
        assert excinfo.value.code == EXIT_USAGE


class TestMeta:
    def test_adaptive_profile_footer(self, capsys):
        code, out, _ = run_cli(["meta", "--profile", "table3"], capsys)
        assert code == EXIT_OK
        stats = footer_stats(out)
        assert float(stats["i_squared"]) == pytest.approx(34.847, abs=0.5)
        assert float(stats["q"]) == pytest.approx(9.2091, abs=0.05)

    def test_legacy_profile_footer(self, capsys):
        code, out, _ = run_cli(["meta", "--profile", "table2"], capsys)
        assert code == EXIT_OK
        stats = footer_stats(out)
        assert float(stats["q"]) == pytest.approx(11.6594, abs=0.05)
        assert float(stats["p_value"]) == pytest.approx(0.07, abs=0.005)

    def test_json_result(self, capsys):
        code, out, _ = run_cli(["meta", "--profile", "table3", "--format",
                                "json"], capsys)
        assert code == EXIT_OK
        doc = json.loads(out)
        assert len(doc["result"]["effects"]) == 7
        assert doc["result"]["effects"][0]["label"] == "Davies 1985"
        assert doc["result"]["pooled_d"] == pytest.approx(0.6257, abs=0.05)

    def test_malformed_study_file_is_data_error(self, tmp_path, capsys):
        src = tmp_path / "studies.csv"
        src.write_text("index,label,n_cases,n_controls,payload_type,"
                       "f01,f02,f03,f04,f05,f06,f07,f08,f09,f10,f11,note\n"
                       "1,x,10,10,meansd,bad,2,3,4,,,,,,,,\n")
        code, _, err = run_cli(["meta", "--input", str(src)], capsys)
        assert code == EXIT_DATA
        assert "line 2" in err


class TestReproducibility:
    def test_byte_identical_reruns(self, tmp_path, capsys):
        args = ["simulate", "--distribution", "exponential", "--scenario", "s1",
                "--grid", "5:13:4", "--reps", "2000", "--seed", "77"]
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        assert main(args + ["--output", str(first)]) == EXIT_OK
        assert main(args + ["--output", str(second)]) == EXIT_OK
        capsys.readouterr()
        assert first.read_bytes() == second.read_bytes()

    def test_header_echoes_configuration(self, capsys):
        code, out, _ = run_cli([
            "simulate", "--distribution", "normal", "--scenario", "s1",
            "--grid", "5:5:4", "--reps", "1000", "--seed", "123"], capsys)
        assert "# seed=123" in out
        assert "# reps=1000" in out
        assert "# distribution=normal" in out

    def test_env_var_seed_default(self, monkeypatch):
        monkeypatch.setenv("OPTMEAN_SEED", "31415")
        parser = build_parser()
        args = parser.parse_args(["simulate", "--distribution", "normal",
                                  "--scenario", "s1"])
        assert args.seed == 31415

    def test_explicit_seed_beats_env_var(self, monkeypatch):
        monkeypatch.setenv("OPTMEAN_SEED", "31415")
        parser = build_parser()
        args = parser.parse_args(["simulate", "--distribution", "normal",
                                  "--scenario", "s1", "--seed", "9"])
        assert args.seed == 9
