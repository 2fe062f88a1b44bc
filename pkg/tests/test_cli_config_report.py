import numpy as np
import pytest

from rkaao.cli import main
from rkaao.config import ExperimentConfig, parse_config
from rkaao.exceptions import ConfigError
from rkaao.report import CSV_HEADER, SolveReport, Trajectory, emit_report, read_report

HEADER = "problem,family,s,degree,l,n_t,dof,outer_iters,avg_stage_iters,v_error,p_error,t_total_s,t_theta_s,t_schur_s"


def test_parse_valid_with_defaults():
    cfg = parse_config("problem=heat-aao\nfamily=gauss\ns=2\ndegree=1\nl=3\ntf=2")
    assert cfg == ExperimentConfig(problem="heat-aao", family="gauss", s=2, degree=1, l=3, tf=2.0)
    assert cfg.tolerance == 1e-8 and cfg.restart == 10 and cfg.gamma == 1e-4


def test_comments_and_blank_lines():
    cfg = parse_config("# experiment\n\nproblem = stokes-seq  # inline\nl=4\n")
    assert cfg.problem == "stokes-seq" and cfg.l == 4 and cfg.fe_degree == 2


@pytest.mark.parametrize("text,line,fragment", [
    ("problem=heat-aao\nfamily=gauss\ns=banana", 3, "s expects int"),
    ("problem=heat-aao\ncolour=red", 2, "unknown key"),
    ("problem=heat-aao\nl=3\nl=4", 3, "duplicate"),
    ("problem=heat-aao\njust text", 2, "key=value"),
    ("problem=heat-aao\nfamily=gauss\ns=0", 3, "s must be"),
    ("problem=heat-aao\ninner=ilu", 2, "inner"),
    ("problem=stokes-seq\ndegree=1", 2, "degree"),
])
def test_line_numbered_errors(text, line, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value) and fragment in str(exc.value)


def test_missing_problem():
    with pytest.raises(ConfigError, match="problem"):
        parse_config("l=3")


def test_header_exact_and_empty_report():
    assert ",".join(CSV_HEADER) == HEADER
    assert emit_report([]) == HEADER + "\n"


def test_roundtrip_and_missing_fields(tmp_path):
    rep = SolveReport(problem="heat-seq", family="Gauss", s=2, degree=1, l=3, n_t=4, dof=98,
                      avg_stage_iters=7.5, v_error=7.5386e-3, t_total_s=0.0123456789)
    path = tmp_path / "r.csv"
    text = emit_report([rep], str(path))
    assert path.read_text() == text
    row = read_report(text)[0]
    assert row["outer_iters"] is None and row["p_error"] is None
    assert row["v_error"] == 7.5386e-3 and row["t_total_s"] == 0.0123457 and row["dof"] == 98
    assert emit_report([rep]).splitlines()[1].split(",")[8] == "7.5"
    assert rep.rounded_stage_iters == 8


def test_trajectory_times_strictly_increasing():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), [np.zeros(1)] * 2)


def _cfg(tmp_path, text):
    p = tmp_path / "exp.cfg"
    p.write_text(text)
    return str(p)


def test_cli_tableau(capsys):
    assert main(["tableau", "radau", "2"]) == 0
    out = capsys.readouterr().out
    assert "singular values" in out and "min Re" in out


def test_cli_solve_writes_csv(tmp_path):
    out = tmp_path / "out.csv"
    assert main(["solve", "--config", _cfg(tmp_path, "problem=heat-aao\nl=2"), "--out", str(out)]) == 0
    rows = read_report(out.read_text())
    assert rows[0]["problem"] == "heat-aao" and rows[0]["outer_iters"] > 0


def test_cli_nonconvergence_exit_two(tmp_path, capsys):
    assert main(["solve", "--config", _cfg(tmp_path, "problem=heat-seq\nl=3\nmax_iters=1")]) == 2
    assert "not converged" in capsys.readouterr().err


def test_cli_config_error_exit_one(tmp_path, capsys):
    assert main(["solve", "--config", _cfg(tmp_path, "problem=heat-seq\nwibble=1")]) == 1
    assert "line 2" in capsys.readouterr().err
    assert main(["solve"]) == 1
    assert main(["solve", "--config", str(tmp_path / "absent.cfg")]) == 1
    assert main(["tableau", "dopri", "3"]) == 1


def test_cli_info(tmp_path, capsys):
    assert main(["info", "--config", _cfg(tmp_path, "problem=heat-aao\nl=3")]) == 0
    out = capsys.readouterr().out
    assert "unknowns: 637" in out and "n_t: 4" in out


def test_cli_spectrum(tmp_path):
    out = tmp_path / "ev.csv"
    assert main(["spectrum", "--family", "lobatto", "--s", "3", "--l", "2", "--tau", "0.5", "--out", str(out)]) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    z = data[:, 0] + 1j * data[:, 1]
    assert z.size == 27 and np.abs(z).max() <= 1 + 1e-8 and z.real.min() > 0


def test_cli_bench(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--config", _cfg(tmp_path, "problem=heat-aao\nl=2"), "--threads", "2", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("threads,") and len(lines) == 3
    assert main(["bench", "--config", _cfg(tmp_path, "problem=heat-seq\nl=2")]) == 1


def test_cli_help_lists_defaults(capsys):
    with pytest.raises(SystemExit):
        main(["solve", "--help"])
    assert "tolerance=1e-8" in capsys.readouterr().out
