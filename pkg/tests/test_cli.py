"""Command line interface: config validation, artifacts, determinism."""

import json

import pytest

from slabrank.cli import ExperimentConfig, ConfigError, main


def write_config(tmp_path, _name="config.json", **kw):
    path = tmp_path / _name
    path.write_text(json.dumps(kw))
    return str(path)


def small_config(tmp_path, _name="config.json", **kw):
    base = dict(case="TC1", scheme="SN", sizes=[4, 8], eps=1e-5,
                output_dir=str(tmp_path / "out"))
    base.update(kw)
    return write_config(tmp_path, _name, **base)


def test_solve_writes_artifacts(tmp_path):
    cfg = small_config(tmp_path)
    assert main(["solve", cfg]) == 0
    out = tmp_path / "out"
    assert (out / "table.csv").exists()
    assert (out / "trace_4_4.csv").exists()
    assert (out / "trace_8_8.csv").exists()
    table = (out / "table.csv").read_text()
    assert table.splitlines()[0] == \
        "J,N,N_it,err_L2,rate_L2,err_W2G,rate_W2G,rank_W,rank_U"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["converged"] is True
    constants = summary["derived_constants"][0]
    assert {"J", "N", "gamma1", "gamma2", "rho", "omega", "r_p",
            "lam", "Lam"} <= set(constants)
    trace = (out / "trace_4_4.csv").read_text()
    assert trace.splitlines()[0] == "k,rank,delta,eta,res_norm"


def test_floats_rendered_to_17_significant_digits(tmp_path):
    cfg = small_config(tmp_path)
    main(["solve", cfg])
    line = (tmp_path / "out" / "table.csv").read_text().splitlines()[1]
    err_l2 = line.split(",")[3]
    assert "." in err_l2 and "," not in err_l2
    assert len(err_l2.replace(".", "").replace("-", "").lstrip("0")) >= 16
    assert float(err_l2) == pytest.approx(float(err_l2))


def test_reruns_are_byte_identical(tmp_path):
    cfg_a = small_config(tmp_path, "a.json", output_dir=str(tmp_path / "a"))
    cfg_b = small_config(tmp_path, "b.json", output_dir=str(tmp_path / "b"))
    main(["solve", cfg_a])
    main(["solve", cfg_b])
    for name in ("table.csv", "trace_4_4.csv", "trace_8_8.csv"):
        assert (tmp_path / "a" / name).read_bytes() \
            == (tmp_path / "b" / name).read_bytes()


def test_output_dir_and_jobs_overrides(tmp_path):
    cfg = small_config(tmp_path)
    alt = tmp_path / "elsewhere"
    assert main(["solve", cfg, "--output-dir", str(alt), "--jobs", "2"]) == 0
    assert (alt / "table.csv").exists()
    # the config's own output directory is untouched by the override
    assert not (tmp_path / "out").exists()


def test_invalid_configs_exit_2(tmp_path):
    bad = [
        dict(case="TC9"),
        dict(scheme="XX"),
        dict(variant="magic"),
        dict(tolerance_rule="bogus"),
        dict(sizes=[]),
        dict(sizes=[16, 8]),
        dict(sizes=[8, 8]),
        dict(sizes=[1]),
        dict(eps=-1.0),
        dict(eps_sum=1.5),
        dict(theta=0.0),
        dict(nu=2.0),
        dict(jobs=0),
        dict(schema_version=99),
        dict(unknown_key=1),
        dict(sizes=[8], tau2=0.9),  # above (1 - rho)/2
    ]
    for overrides in bad:
        cfg = write_config(tmp_path, **overrides)
        assert main(["solve", cfg]) == 2, overrides


def test_unreadable_or_malformed_config_exits_2(tmp_path):
    assert main(["solve", str(tmp_path / "missing.json")]) == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["solve", str(broken)]) == 2
    array = tmp_path / "array.json"
    array.write_text("[1, 2]")
    assert main(["solve", str(array)]) == 2


def test_non_convergence_exits_3_with_partial_artifacts(tmp_path):
    cfg = small_config(tmp_path, sizes=[8], max_iter=3)
    assert main(["solve", cfg]) == 3
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["converged"] is False
    assert summary["failures"][0]["J"] == 8
    assert (tmp_path / "out" / "table.csv").exists()


def test_verify_passes_on_defaults(tmp_path):
    cfg = small_config(tmp_path, sizes=[4, 8])
    assert main(["verify", cfg]) == 0


def test_config_defaults_roundtrip(tmp_path):
    cfg = ExperimentConfig.from_file(write_config(tmp_path))
    assert cfg.case == "TC1" and cfg.variant == "st"
    assert cfg.sizes == [128, 256]
    with pytest.raises(ConfigError):
        ExperimentConfig(sizes=[4], case="nope").validate()
