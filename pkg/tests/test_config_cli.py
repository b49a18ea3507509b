import json
import os

import pytest

from cxlsim import cli
from cxlsim.config import (ConfigError, merge_config, preset, preset_names,
                           validate_config)


class TestValidation:
    def test_negative_fifo_depth_names_field(self):
        cfg = preset("cxl-dmsim-a")
        cfg["bridge"]["req_fifo_depth"] = -1
        with pytest.raises(ConfigError, match="bridge.req_fifo_depth"):
            validate_config(cfg)

    def test_unknown_key_rejected(self):
        cfg = preset("local-ddr")
        cfg["host"]["turbo"] = True
        with pytest.raises(ConfigError, match="host.turbo"):
            validate_config(cfg)

    def test_unknown_workload_field_rejected(self):
        cfg = preset("local-ddr")
        cfg["workload"]["bogus"] = 1
        with pytest.raises(ConfigError, match="workload.bogus"):
            validate_config(cfg)

    def test_write_service_below_read_rejected(self):
        cfg = preset("local-ddr")
        cfg["host"]["local_medium"]["write_service_ns"] = 1.0
        with pytest.raises(ConfigError, match="write_service_ns"):
            validate_config(cfg)

    def test_all_presets_validate(self):
        for name in preset_names():
            assert validate_config(preset(name))

    def test_round_trip_is_identity(self):
        cfg = preset("cxl-dmsim-a")
        again = validate_config(json.loads(json.dumps(cfg)))
        assert again == cfg

    def test_merge_replaces_workload_of_other_kind(self):
        cfg = merge_config(preset("local-ddr"),
                           {"workload": {"kind": "kv_proxy", "ops": 10}})
        assert cfg["workload"] == {"kind": "kv_proxy", "ops": 10}

    def test_merge_patches_same_kind_workload(self):
        cfg = merge_config(preset("local-ddr"),
                           {"workload": {"samples": 5}})
        assert cfg["workload"]["samples"] == 5
        assert cfg["workload"]["kind"] == "latency_sweep"


def write_cfg(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


TINY_WORKLOAD = {"workload": {"kind": "latency_sweep", "array_kb": [16],
                              "samples": 50, "placement": "local"}}


class TestCli:
    def test_run_writes_report_and_curve(self, tmp_path):
        cfg = write_cfg(tmp_path, TINY_WORKLOAD)
        out = str(tmp_path / "out")
        rc = cli.main(["run", "--preset", "local-ddr", "--config", cfg,
                       "--out", out])
        assert rc == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["seed"] == 7
        assert report["workload"]["plateau_ns"] == 1.0
        lines = (tmp_path / "out" / "curve.csv").read_text().splitlines()
        assert lines[0] == "array_bytes,mean_load_to_use_ns"

    def test_seed_flag_overrides(self, tmp_path):
        cfg = write_cfg(tmp_path, TINY_WORKLOAD)
        out = str(tmp_path / "out")
        cli.main(["run", "--preset", "local-ddr", "--config", cfg,
                  "--out", out, "--seed", "99"])
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["seed"] == 99

    def test_invalid_config_exits_nonzero_naming_field(self, tmp_path, capsys):
        bad = preset("cxl-dmsim-a")
        bad["bridge"]["req_fifo_depth"] = -5
        cfg = write_cfg(tmp_path, bad)
        rc = cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "bridge.req_fifo_depth" in capsys.readouterr().err

    def test_malformed_json_reports_line(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{\n  \"schema_version\": 1,\n  oops\n}")
        rc = cli.main(["run", "--config", str(path), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert ":3:" in capsys.readouterr().err

    def test_missing_config_and_preset(self, capsys):
        rc = cli.main(["run", "--out", "/tmp/nowhere"])
        assert rc == 2

    def test_determinism_byte_identical_reports(self, tmp_path):
        cfg = write_cfg(tmp_path, TINY_WORKLOAD)
        cli.main(["run", "--preset", "local-ddr", "--config", cfg,
                  "--out", str(tmp_path / "r1")])
        cli.main(["run", "--preset", "local-ddr", "--config", cfg,
                  "--out", str(tmp_path / "r2")])
        assert ((tmp_path / "r1" / "report.json").read_bytes()
                == (tmp_path / "r2" / "report.json").read_bytes())

    def test_sweep_rows_and_determinism(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CXLSIM_THREADS", "2")
        cfg = write_cfg(tmp_path, {
            "workload": {"kind": "rdwr_sweep", "read_fractions": [1.0],
                         "ops": 600, "warm_ops": 100, "placement": "hdm"}})
        args = ["sweep", "--preset", "cxl-dmsim-a", "--config", cfg,
                "--param", "bridge.req_fifo_depth", "--grid", "13,26"]
        assert cli.main(args + ["--out", str(tmp_path / "s1")]) == 0
        assert cli.main(args + ["--out", str(tmp_path / "s2")]) == 0
        s1 = (tmp_path / "s1" / "sweep.csv").read_bytes()
        assert s1 == (tmp_path / "s2" / "sweep.csv").read_bytes()
        rows = s1.decode().splitlines()
        assert len(rows) == 3
        assert rows[1].startswith("bridge.req_fifo_depth,13")
        assert rows[2].startswith("bridge.req_fifo_depth,26")

    def test_sweep_non_numeric_param_rejected(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, TINY_WORKLOAD)
        rc = cli.main(["sweep", "--preset", "local-ddr", "--config", cfg,
                       "--param", "label", "--grid", "1,2",
                       "--out", str(tmp_path / "s")])
        assert rc == 2
        assert "not numeric" in capsys.readouterr().err

    def test_sweep_bad_grid_value(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, TINY_WORKLOAD)
        rc = cli.main(["sweep", "--preset", "local-ddr", "--config", cfg,
                       "--param", "seed", "--grid", "1,x",
                       "--out", str(tmp_path / "s")])
        assert rc == 2

    def test_report_latency_join(self, tmp_path):
        for label, preset_name in (("loc", "local-ddr"), ("asic", "cxl-dmsim-a")):
            cfg = write_cfg(tmp_path, {
                "label": label,
                "workload": {"kind": "latency_sweep", "array_kb": [16],
                             "samples": 50,
                             "placement": "local" if label == "loc" else "hdm"}},
                name=f"{label}.json")
            cli.main(["run", "--preset", preset_name, "--config", cfg,
                      "--out", str(tmp_path / label)])
        out = str(tmp_path / "fig.csv")
        rc = cli.main(["report", str(tmp_path / "loc"), str(tmp_path / "asic"),
                       "--figure", "latency", "--out", out])
        assert rc == 0
        lines = open(out).read().splitlines()
        assert lines[0] == "array_bytes,loc_ns,asic_ns"
        assert len(lines) == 2

    def test_report_rejects_mixed_workloads(self, tmp_path, capsys):
        cfg1 = write_cfg(tmp_path, TINY_WORKLOAD, name="a.json")
        cli.main(["run", "--preset", "local-ddr", "--config", cfg1,
                  "--out", str(tmp_path / "a")])
        cfg2 = write_cfg(tmp_path, {
            "workload": {"kind": "kv_proxy", "ops": 200, "warm_ops": 20,
                         "footprint_mb": 1}}, name="b.json")
        cli.main(["run", "--preset", "cxl-dmsim-a", "--config", cfg2,
                  "--out", str(tmp_path / "b")])
        rc = cli.main(["report", str(tmp_path / "a"), str(tmp_path / "b"),
                       "--figure", "latency", "--out", str(tmp_path / "f.csv")])
        assert rc == 2

    def test_presets_listing(self, capsys):
        assert cli.main(["presets"]) == 0
        out = capsys.readouterr().out.split()
        assert out == ["local-ddr", "cxl-dmsim-f", "cxl-dmsim-a", "cxl-ssd"]

    def test_presets_dump_is_valid_json(self, capsys):
        cli.main(["presets", "cxl-dmsim-a"])
        payload = json.loads(capsys.readouterr().out)
        assert payload["bridge"]["req_fifo_depth"] == 52
        assert payload["devices"][0]["device_proto_proc_lat_ns"] == 15.0

    def test_atomic_write_leaves_no_temp_files(self, tmp_path):
        target = tmp_path / "x" / "file.txt"
        cli.atomic_write(str(target), "hello")
        assert target.read_text() == "hello"
        assert [p.name for p in (tmp_path / "x").iterdir()] == ["file.txt"]

    def test_asic_preset_plateau_row_via_cli(self, tmp_path):
        cfg = write_cfg(tmp_path, {"workload": {
            "kind": "latency_sweep", "array_kb": [49152], "samples": 1200,
            "placement": "hdm"}})
        out = tmp_path / "asic"
        assert cli.main(["run", "--preset", "cxl-dmsim-a", "--config", cfg,
                         "--out", str(out)]) == 0
        header, row = (out / "curve.csv").read_text().splitlines()
        size, plateau = row.split(",")
        assert abs(float(plateau) - 284.0) <= 14.2


class TestReportFigures:
    @pytest.fixture()
    def dlrm_dirs(self, tmp_path):
        dirs = []
        for injectors in (2, 4):
            cfg = write_cfg(tmp_path, {
                "label": f"proxy{injectors}",
                "workload": {"kind": "dlrm_proxy", "injectors": injectors,
                             "queries_per_injector": 6, "lookups_per_query": 4,
                             "footprint_mb": 1, "placement": "hdm"}},
                name=f"dlrm{injectors}.json")
            out = tmp_path / f"dlrm{injectors}"
            cli.main(["run", "--preset", "cxl-dmsim-a", "--config", cfg,
                      "--out", str(out)])
            dirs.append(str(out))
        return dirs

    def test_table5_contains_all_ten_rows(self, tmp_path, dlrm_dirs):
        out = tmp_path / "table5.csv"
        rc = cli.main(["report", *dlrm_dirs, "--figure", "table5",
                       "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "statistic,proxy2,proxy4"
        names = [line.split(",")[0] for line in lines[1:]]
        assert names == ["Aggregate QPS", "core.loadToUse::mean",
                         "core.loadToUse::stdev", "core.loadToUse::0-9",
                         "core.loadToUse::min_value",
                         "core.loadToUse::max_value", "core.lsqFullEvents",
                         "l3.overallAvgMissLat", "bridge.reqRetryCounts",
                         "cxl.rsp::mean"]
        for line in lines[1:]:
            assert all(cell for cell in line.split(","))

    def test_rdwr_figure_projects_peaks(self, tmp_path):
        cfg = write_cfg(tmp_path, {"workload": {
            "kind": "rdwr_sweep", "read_fractions": [0.5, 1.0], "ops": 600,
            "warm_ops": 100, "placement": "hdm"}})
        out = tmp_path / "r"
        cli.main(["run", "--preset", "cxl-dmsim-a", "--config", cfg,
                  "--out", str(out)])
        fig = tmp_path / "rdwr.csv"
        assert cli.main(["report", str(out), "--figure", "rdwr",
                         "--out", str(fig)]) == 0
        lines = fig.read_text().splitlines()
        assert lines[0] == "read_fraction,cxl-dmsim-a_peak_bytes_per_sec"
        assert [line.split(",")[0] for line in lines[1:]] == ["0.5", "1"]

    def test_stream_and_ssd_figures(self, tmp_path):
        cfg = write_cfg(tmp_path, {"workload": {
            "kind": "stream", "kernel": "copy", "groups": 900,
            "warm_groups": 100, "placement": "local"}}, name="st.json")
        out = tmp_path / "st"
        cli.main(["run", "--preset", "local-ddr", "--config", cfg,
                  "--out", str(out)])
        fig = tmp_path / "stream.csv"
        assert cli.main(["report", str(out), "--figure", "stream",
                         "--out", str(fig)]) == 0
        assert fig.read_text().splitlines()[1].startswith("copy,")

        kv = write_cfg(tmp_path, {"workload": {
            "kind": "kv_proxy", "ops": 300, "warm_ops": 30,
            "footprint_mb": 1}}, name="kv.json")
        out2 = tmp_path / "kv"
        cli.main(["run", "--preset", "cxl-dmsim-a", "--config", kv,
                  "--out", str(out2)])
        fig2 = tmp_path / "ssd.csv"
        assert cli.main(["report", str(out2), "--figure", "ssd",
                         "--out", str(fig2)]) == 0
        assert fig2.read_text().startswith("label,throughput_ops_per_sec")
