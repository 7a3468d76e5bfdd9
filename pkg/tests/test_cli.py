"""Command line interface: arguments, exit codes, output files."""

import shutil
import subprocess

import pytest

from vfls.cli import EXIT_ERROR, EXIT_ITERATION_CAP, EXIT_OK, main
from vfls.config import ProblemConfig, config_to_text


def write_config(path, **overrides):
    base = dict(
        nx=16,
        ny=16,
        stress_constraint=True,
        stress_limit=1.3,
        knot_interval=2.0,
        hole_rows=2,
        hole_cols=2,
        hole_radius=3.0,
        reinit_sweeps=5,
        max_iterations=5,
    )
    base.update(overrides)
    path.write_text(config_to_text(ProblemConfig(**base)))
    return path


def test_benchmarks_list(capsys):
    assert main(["benchmarks", "list"]) == EXIT_OK
    names = capsys.readouterr().out.split()
    assert names == [
        "lbracket-buckling",
        "lbracket-combined",
        "lbracket-stress",
        "square-buckling",
        "square-combined",
        "square-stress",
    ]


def test_run_hits_iteration_cap_and_writes_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path / "job.cfg")
    out = tmp_path / "results"
    code = main(["run", str(cfg), "--out", str(out), "--quiet"])
    captured = capsys.readouterr()
    assert code == EXIT_ITERATION_CAP
    assert "max-iterations after 5 iteration(s)" in captured.out
    assert (out / "convergence.csv").is_file()
    assert (out / "density.csv").is_file()
    assert (out / "density.pgm").is_file()
    assert (out / "von_mises.csv").is_file()
    history = (out / "convergence.csv").read_text().strip().splitlines()
    assert len(history) == 1 + 5


def test_run_converged_exits_zero(tmp_path, capsys):
    # A loose tolerance with a slack constraint converges immediately.
    cfg = write_config(
        tmp_path / "job.cfg",
        tolerance=10.0,
        stress_limit=100.0,
        max_iterations=50,
    )
    code = main(["run", str(cfg), "--out", str(tmp_path / "o"), "--quiet"])
    assert code == EXIT_OK
    assert "converged" in capsys.readouterr().out


def test_quiet_suppresses_progress(tmp_path, capsys):
    cfg = write_config(tmp_path / "job.cfg", max_iterations=2)
    main(["run", str(cfg), "--out", str(tmp_path / "a"), "--quiet"])
    quiet_out = capsys.readouterr().out
    assert "iter " not in quiet_out

    main(["run", str(cfg), "--out", str(tmp_path / "b")])
    loud_out = capsys.readouterr().out
    assert loud_out.count("iter ") == 2


def test_max_iter_override(tmp_path, capsys):
    cfg = write_config(tmp_path / "job.cfg", max_iterations=50)
    code = main(
        ["run", str(cfg), "--out", str(tmp_path / "o"), "--max-iter", "1",
         "--quiet"]
    )
    assert code == EXIT_ITERATION_CAP
    assert "after 1 iteration(s)" in capsys.readouterr().out


def test_missing_config_is_an_error(tmp_path, capsys):
    code = main(["run", str(tmp_path / "nope.cfg")])
    assert code == EXIT_ERROR
    assert capsys.readouterr().err.startswith("error:")


def test_malformed_config_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("mesh.nx = not_a_number\n")
    assert main(["run", str(bad)]) == EXIT_ERROR
    assert "error:" in capsys.readouterr().err


def test_unknown_benchmark_is_an_error(capsys):
    code = main(["benchmarks", "run", "no-such-problem"])
    assert code == EXIT_ERROR
    assert "no-such-problem" in capsys.readouterr().err


def test_negative_max_iter_is_an_error(tmp_path, capsys):
    cfg = write_config(tmp_path / "job.cfg")
    code = main(["run", str(cfg), "--max-iter", "-1"])
    assert code == EXIT_ERROR
    assert "nonnegative" in capsys.readouterr().err


def test_benchmark_run_with_cap(tmp_path, capsys):
    code = main(
        ["benchmarks", "run", "lbracket-stress", "--max-iter", "2",
         "--out", str(tmp_path / "o"), "--quiet"]
    )
    assert code == EXIT_ITERATION_CAP
    assert (tmp_path / "o" / "convergence.csv").is_file()


def test_check_gradients_reports_pass(tmp_path, capsys):
    cfg = write_config(tmp_path / "job.cfg")
    code = main(["check-gradients", str(cfg)])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    lines = [l for l in out.strip().splitlines() if l]
    assert len(lines) >= 2
    assert all("PASS" in l for l in lines)
    assert "max rel error" in lines[0]


def test_command_is_required():
    with pytest.raises(SystemExit):
        main([])


def test_console_script_installed():
    script = shutil.which("vfls")
    assert script is not None
    proc = subprocess.run(
        [script, "benchmarks", "list"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "lbracket-combined" in proc.stdout
