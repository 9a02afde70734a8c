"""Command-line tests: every subcommand end to end on small inputs, exit
codes, config-file layering, and output artifacts."""

import json
import os
import re
import subprocess
import sys

import numpy as np
import pytest

from dvmbeam.cli import (
    EXIT_DIVERGED,
    EXIT_IO,
    EXIT_OK,
    EXIT_SHAPE,
    EXIT_USAGE,
    EXIT_VERIFY,
    main,
)
from dvmbeam.network import NetworkConfig, build_network, init_from_dvm, save_network
from dvmbeam.signals import load_dataset, transform_alpha


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def data8(work):
    path = work / "n8.bin"
    code = main(["gen-data", "--n", "8", "--freq-ghz", "24",
                 "--angles", "30,40", "--samples-per-angle", "20",
                 "--seed", "0", "--out", str(path)])
    assert code == EXIT_OK
    return path


@pytest.fixture(scope="module")
def data16(work):
    path = work / "n16.bin"
    code = main(["gen-data", "--n", "16", "--freq-ghz", "24",
                 "--samples-per-angle", "10", "--seed", "1", "--out", str(path)])
    assert code == EXIT_OK
    return path


@pytest.fixture(scope="module")
def data4_clean(work):
    path = work / "n4_clean.bin"
    code = main(["gen-data", "--n", "4", "--freq-ghz", "24",
                 "--samples-per-angle", "8", "--noise-std", "0",
                 "--seed", "2", "--out", str(path)])
    assert code == EXIT_OK
    return path


# ---------------------------------------------------------------------------
# gen-data


def test_gen_data_defaults(work, capsys):
    path = work / "full.bin"
    code = main(["gen-data", "--n", "16", "--freq-ghz", "24", "--out", str(path)])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "wrote 3000 samples" in out
    assert "target consistency: PASS" in out
    ds = load_dataset(str(path))
    assert ds.n == 16 and ds.n_samples == 3000
    assert sorted(set(np.round(np.degrees(ds.angle), 6))) == [30.0, 40.0, 50.0]


def test_gen_data_missing_flags(capsys):
    assert main(["gen-data", "--freq-ghz", "24", "--out", "x"]) == EXIT_USAGE
    assert "--n is required" in capsys.readouterr().err


def test_gen_data_zero_samples(work, capsys):
    code = main(["gen-data", "--n", "4", "--freq-ghz", "24",
                 "--samples-per-angle", "0", "--out", str(work / "z.bin")])
    assert code == EXIT_USAGE
    assert "samples-per-angle" in capsys.readouterr().err


def test_gen_data_negative_noise(work):
    assert main(["gen-data", "--n", "4", "--freq-ghz", "24",
                 "--noise-std", "-1", "--out", str(work / "z.bin")]) == EXIT_USAGE


def test_gen_data_deterministic(work):
    a, b = work / "det_a.bin", work / "det_b.bin"
    flags = ["gen-data", "--n", "4", "--freq-ghz", "27",
             "--samples-per-angle", "5", "--seed", "9"]
    assert main(flags + ["--out", str(a)]) == EXIT_OK
    assert main(flags + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_gen_data_csv_format(work):
    path = work / "tiny.csv"
    code = main(["gen-data", "--n", "4", "--freq-ghz", "24",
                 "--angles", "30", "--samples-per-angle", "6",
                 "--noise-std", "0", "--format", "csv", "--out", str(path)])
    assert code == EXIT_OK
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 7
    assert lines[0].startswith("sample_id,t,angle_deg,x_re_0")


def test_gen_data_tau_override(work):
    # tau = 1/(n * rate): passing tau = 1/64 at n=4 pins the rate to 16 GHz
    path = work / "tau.bin"
    tau = 1.0 / (4 * 16e9)
    code = main(["gen-data", "--n", "4", "--freq-ghz", "24", "--tau-s",
                 f"{tau:.18e}", "--samples-per-angle", "3", "--noise-std", "0",
                 "--out", str(path)])
    assert code == EXIT_OK
    ds = load_dataset(str(path))
    assert ds.sample_rate == pytest.approx(16e9, rel=1e-12)


# ---------------------------------------------------------------------------
# train


def test_train_ffnn_param_echo(data8, work, capsys):
    report_path = work / "ffnn_report.json"
    code = main(["train", "--data", str(data8), "--model", "ffnn",
                 "--epochs", "2", "--seed", "0",
                 "--out-report", str(report_path)])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "params: 1104" in out
    payload = json.loads(report_path.read_text())
    assert payload["param_count"] == 1104
    assert payload["resolved_config"]["model"] == "ffnn"
    assert payload["resolved_config"]["version"]
    assert payload["epochs_run"] == 2


def test_train_stnn_param_band(data16, capsys):
    code = main(["train", "--data", str(data16), "--model", "stnn",
                 "--p", "1", "--lambda", "5", "--epochs", "1", "--seed", "0"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    params = int(re.search(r"params: (\d+)", out).group(1))
    assert abs(params - 428) <= 0.15 * 428


def test_train_zero_epochs(data8, work, capsys):
    report_path = work / "zero.json"
    code = main(["train", "--data", str(data8), "--epochs", "0",
                 "--out-report", str(report_path)])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "epochs run: 0" in out
    payload = json.loads(report_path.read_text())
    assert payload["epochs_run"] == 0
    assert payload["train_mse"] == []
    assert payload["final_val_mse"] >= 0.0


def test_train_divergence_exit_code(data8, capsys):
    with np.errstate(all="ignore"):
        code = main(["train", "--data", str(data8), "--optimizer", "sgd",
                     "--lr", "1e6", "--epochs", "50", "--seed", "0"])
    assert code == EXIT_DIVERGED
    assert "diverged" in capsys.readouterr().err


def test_train_missing_data_flag(capsys):
    assert main(["train"]) == EXIT_USAGE


def test_train_unreadable_dataset(work, capsys):
    assert main(["train", "--data", str(work / "missing.bin")]) == EXIT_IO


def test_train_writes_model(data8, work):
    model_path = work / "m8.net"
    code = main(["train", "--data", str(data8), "--epochs", "1", "--seed", "1",
                 "--out-model", str(model_path)])
    assert code == EXIT_OK
    assert model_path.stat().st_size > 0


def test_train_report_reproducible(data8, work):
    outs = []
    for tag in ("r1", "r2"):
        path = work / f"{tag}.json"
        code = main(["train", "--data", str(data8), "--epochs", "3",
                     "--seed", "7", "--out-report", str(path)])
        assert code == EXIT_OK
        payload = json.loads(path.read_text())
        payload.pop("wall_time_s")
        outs.append(payload)
    assert outs[0] == outs[1]


# ---------------------------------------------------------------------------
# eval


@pytest.fixture(scope="module")
def exact_model(work):
    alpha = transform_alpha(24e9, 4)
    cfg = NetworkConfig(n=4, activation_slope=1.0, delay_alpha=1.0 + 0.0j)
    net = init_from_dvm(build_network(cfg), alpha)
    path = work / "exact4.net"
    save_network(net, str(path))
    return path


def test_eval_exact_model_on_clean_data(exact_model, data4_clean, capsys):
    code = main(["eval", "--model", str(exact_model), "--data", str(data4_clean)])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    mse = float(re.search(r"overall MSE: (\S+)", out).group(1))
    assert mse <= 1e-18
    assert out.count("angle") == 3  # per-angle breakdown


def test_eval_is_deterministic(exact_model, data4_clean, capsys):
    main(["eval", "--model", str(exact_model), "--data", str(data4_clean)])
    first = capsys.readouterr().out
    main(["eval", "--model", str(exact_model), "--data", str(data4_clean)])
    assert capsys.readouterr().out == first


def test_eval_shape_mismatch(exact_model, data8, capsys):
    code = main(["eval", "--model", str(exact_model), "--data", str(data8)])
    assert code == EXIT_SHAPE
    assert "n=4" in capsys.readouterr().err


def test_eval_missing_flags():
    assert main(["eval", "--model", "x"]) == EXIT_USAGE


# ---------------------------------------------------------------------------
# verify


def test_verify_passes(capsys):
    code = main(["verify", "--n-max", "32", "--trials", "3", "--seed", "0"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    for name in ("factorization-identity", "recursive-dft",
                 "exact-initialization", "gradient-check"):
        assert f"PASS  {name}" in out
    assert "all checks passed" in out


def test_verify_negative_control(capsys):
    # the hidden hook corrupts one twiddle; the table must name the
    # recursive-dft check as the offender and exit nonzero
    code = main(["verify", "--n-max", "4", "--trials", "1",
                 "--corrupt-twiddle"])
    out = capsys.readouterr().out
    assert code == EXIT_VERIFY
    assert "FAIL  recursive-dft" in out
    assert "verification failed: recursive-dft" in out


def test_verify_flag_validation():
    assert main(["verify", "--trials", "0"]) == EXIT_USAGE
    assert main(["verify", "--n-max", "3"]) == EXIT_USAGE


# ---------------------------------------------------------------------------
# bench


def test_bench_default_table(work, capsys):
    base = work / "red"
    code = main(["bench", "--out", str(base)])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "wrote" in out
    payload = json.loads((work / "red.json").read_text())
    rows = payload["rows"]
    assert [r["params_dense"] for r in rows] == [1104, 4256, 16704]
    assert abs(rows[2]["pr_flops_pct"] - 85.0) <= 5.0
    assert payload["resolved_config"]["version"]
    csv_lines = (work / "red.csv").read_text().strip().split("\n")
    assert len(csv_lines) == 1 + 2 * 3
    assert csv_lines[0].startswith("n,model,params")


def test_bench_rejects_bad_n():
    assert main(["bench", "--n-list", "6"]) == EXIT_USAGE


# ---------------------------------------------------------------------------
# top-level behavior


def test_version_flag(capsys):
    assert main(["--version"]) == EXIT_OK
    assert "dvmbeam" in capsys.readouterr().out


def test_no_subcommand_is_usage_error(capsys):
    assert main([]) == EXIT_USAGE


def test_threads_flag_validation():
    with pytest.raises(SystemExit) as err:
        main(["--threads", "0", "bench"])
    assert err.value.code == EXIT_USAGE


def test_threads_flag_sets_pool_env(work):
    saved = os.environ.get("OMP_NUM_THREADS")
    try:
        code = main(["--threads", "2", "bench", "--n-list", "8",
                     "--out", str(work / "thr")])
        assert code == EXIT_OK
        assert os.environ["OMP_NUM_THREADS"] == "2"
    finally:
        if saved is None:
            os.environ.pop("OMP_NUM_THREADS", None)
        else:
            os.environ["OMP_NUM_THREADS"] = saved


def test_config_file_supplies_defaults(work):
    cfg = work / "gen.conf"
    cfg.write_text(
        "# dataset defaults\n"
        "samples-per-angle = 2\n"
        "noise-std = 0\n"
        "seed = 3\n"
    )
    path = work / "from_conf.bin"
    code = main(["--config", str(cfg), "gen-data", "--n", "4",
                 "--freq-ghz", "24", "--out", str(path)])
    assert code == EXIT_OK
    assert load_dataset(str(path)).n_samples == 6  # 3 default angles x 2

    # explicit flags beat the file
    path2 = work / "from_conf2.bin"
    code = main(["--config", str(cfg), "gen-data", "--n", "4",
                 "--freq-ghz", "24", "--samples-per-angle", "3",
                 "--out", str(path2)])
    assert code == EXIT_OK
    assert load_dataset(str(path2)).n_samples == 9


def test_config_file_errors(work, capsys):
    bad = work / "bad.conf"
    bad.write_text("this line has no equals sign\n")
    assert main(["--config", str(bad), "bench"]) == EXIT_USAGE
    assert main(["--config", str(work / "nope.conf"), "bench"]) == EXIT_IO


def test_installed_entry_point(work):
    # the console script must resolve and run a real subcommand
    res = subprocess.run(
        [sys.executable, "-c",
         "import sys; from dvmbeam.cli import main; sys.exit(main(sys.argv[1:]))",
         "bench", "--n-list", "8", "--out", str(work / "ep")],
        capture_output=True, text=True,
    )
    assert res.returncode == 0
    assert "Pr(weights)" in res.stdout
