import json
import subprocess
import sys

import pytest

from weierdim.cli import main
from weierdim.core import parse_kernel_config

CEXP_CFG = """# phi(x) = (cos 2 pi x, sin 2 pi x)
d=2
b=2
lambda=0.8
coeff 1 1 0.5 0
coeff 2 1 0 -0.5
"""

DEGENERATE_CFG = """d=1
b=2
lambda=0.7
coeff 1 1 -0.5 0
coeff 1 2 0.35 0
"""

COS3_CFG = """d=1
b=3
lambda=1/2
coeff 1 1 0.5 0
"""

TELESCOPING_CFG = """d=1
b=2
lambda=0.7
coeff 1 1 0.5 0
coeff 1 2 -0.35 -0.15
coeff 1 4 0 0.105
"""


@pytest.fixture
def cfg(tmp_path):
    def write(text, name="k.cfg"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    return write


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_q_summary_lines(cfg, capsys):
    code, out, _ = run(capsys, "q", cfg(CEXP_CFG))
    assert code == 0 and out.startswith("q=0 sigma_gap=") and " m=" in out
    code, out, _ = run(capsys, "q", cfg(DEGENERATE_CFG))
    assert code == 0 and out.startswith("q=1 ")
    code, out, _ = run(capsys, "q", cfg(DEGENERATE_CFG), "--lambda", "0.75")
    assert out.startswith("q=0 ")


def test_q_json(cfg, capsys):
    code, out, _ = run(capsys, "q", cfg(CEXP_CFG), "--json")
    data = json.loads(out)
    assert code == 0 and data["q"] == 0 and data["certified"]


def test_malformed_config_reports_line(cfg, capsys):
    bad = DEGENERATE_CFG.replace("coeff 1 2 0.35 0", "coeff 1 two 0.35 0")
    code, _, err = run(capsys, "q", cfg(bad))
    assert code == 2 and "line 5" in err


def test_missing_config_and_bad_flags(tmp_path, cfg, capsys):
    assert run(capsys, "q", tmp_path / "nope.cfg")[0] == 2
    assert run(capsys, "q")[0] == 2
    assert run(capsys, "frobnicate", cfg(CEXP_CFG))[0] == 2
    no_lam = CEXP_CFG.replace("lambda=0.8\n", "")
    code, _, err = run(capsys, "q", cfg(no_lam))
    assert code == 2 and "lambda" in err
    assert run(capsys, "q", cfg(CEXP_CFG), "--lambda", "0.4")[0] == 2
    assert run(capsys, "q", cfg(CEXP_CFG), "--threads", "0")[0] == 2


def test_invalid_kernel_exit_3(cfg, capsys):
    const = "d=1\nb=2\ncoeff 1 0 1.0 0\n"
    code, _, err = run(capsys, "scan", cfg(const), "--grid-n", "200")
    assert code == 3 and "invalid kernel" in err
    imag0 = "d=1\nb=2\ncoeff 1 0 1.0 0.5\n"
    assert run(capsys, "kernel-check", cfg(imag0))[0] == 3


def test_scan_outputs(cfg, tmp_path, capsys):
    out_csv = tmp_path / "scan.csv"
    code, out, _ = run(capsys, "scan", cfg(DEGENERATE_CFG), "--out", out_csv)
    assert code == 0
    assert out.startswith("p'=0 grid_n=10000 degenerate=1")
    lam = float(out.splitlines()[1].split()[0].split("=")[1])
    assert lam == pytest.approx(0.7, abs=1e-6)
    rows = out_csv.read_text().splitlines()
    assert rows[0] == "lambda,q,sigma_min" and len(rows) == 10_001
    code, out, _ = run(capsys, "scan", cfg(CEXP_CFG), "--grid-n", "500")
    assert out.startswith("p'=0 grid_n=500 degenerate=0")
    assert run(capsys, "scan", cfg(CEXP_CFG), "--grid-n", "50")[0] == 2
    assert run(capsys, "scan", cfg(CEXP_CFG), "--lambda-range", "0.3", "0.9")[0] == 2


def test_predict(cfg, capsys):
    code, out, _ = run(capsys, "predict", cfg(COS3_CFG))
    assert code == 0 and out.startswith("predicted=1.369070 branch=affine q=0")
    code, out, _ = run(capsys, "predict", cfg(CEXP_CFG), "--q", "2", "--json")
    assert json.loads(out)["predicted"] == 1.0


def test_report_examples(cfg, capsys):
    code, out, _ = run(capsys, "report", cfg(COS3_CFG), "--levels", "2", "6")
    assert code == 0
    assert out.startswith("predicted=1.369070 branch=affine q=0")
    assert "box_slope=" in out
    code, out, _ = run(capsys, "report", cfg(TELESCOPING_CFG), "--no-box")
    assert out.startswith("predicted=1.000000 branch=affine q=1")


def test_report_guard_exit_4(cfg, capsys):
    code, _, err = run(capsys, "report", cfg(CEXP_CFG), "--levels", "2", "20")
    assert code == 4 and "lower the finest level" in err


def test_report_files(cfg, tmp_path, capsys):
    js, cs = tmp_path / "r.json", tmp_path / "r.csv"
    code, _, _ = run(capsys, "report", cfg(COS3_CFG), "--levels", "2", "5", "--out", js, "--csv", cs)
    data = json.loads(js.read_text())
    assert code == 0 and data["levels"] == [2, 3, 4, 5]
    assert cs.read_text().splitlines()[0] == "n,N_n,stable"


def test_boxdim_and_entropy(cfg, tmp_path, capsys):
    code, out, _ = run(capsys, "boxdim", cfg(COS3_CFG), "--levels", "1", "5")
    assert code == 0 and out.startswith("n=1 N=25")
    dump = tmp_path / "m.csv"
    code, out, _ = run(capsys, "entropy-dim", cfg(CEXP_CFG), "--samples", "5000", "--levels", "1", "5", "--dump", dump)
    assert code == 0 and out.startswith("entropy_slope=") and "ly_dim=" in out
    assert dump.read_text().startswith("# dim=2 points=5000 ")
    code, out, _ = run(capsys, "entropy-dim", cfg(CEXP_CFG), "--measure", "graph", "--samples", "5000", "--json")
    assert json.loads(out)["measure"] == "graph"


def test_psi_command(cfg, tmp_path, capsys):
    out_cfg = tmp_path / "psi.cfg"
    code, out, _ = run(capsys, "psi", cfg(DEGENERATE_CFG), "--out", out_cfg)
    assert code == 0 and out.startswith("success=true")
    psi = parse_kernel_config(out_cfg.read_text())
    assert psi.coefficient_maps()[0][1] == pytest.approx(0.5)
    code, out, _ = run(capsys, "psi", cfg(DEGENERATE_CFG), "--lambda", "0.8")
    assert code == 0 and out.startswith("success=false")


def test_kernel_check_round_trip(cfg, tmp_path, capsys):
    canon = tmp_path / "canon.cfg"
    code, out, _ = run(capsys, "kernel-check", cfg(TELESCOPING_CFG), "--out", canon)
    assert code == 0 and out.startswith("ok d=1 b=2 max_freq=4 constant=false")
    first = parse_kernel_config(TELESCOPING_CFG)
    again = parse_kernel_config(canon.read_text())
    assert again.coefficient_maps() == first.coefficient_maps()
    code, _, _ = run(capsys, "kernel-check", str(canon), "--out", tmp_path / "canon2.cfg")
    assert (tmp_path / "canon2.cfg").read_text() == canon.read_text()


@pytest.mark.parametrize(
    "argv",
    [
        ["report", "--levels", "2", "5", "--entropy", "--samples", "4000", "--entropy-levels", "1", "5", "--json"],
        ["entropy-dim", "--samples", "3000", "--levels", "1", "4", "--json"],
        ["scan", "--grid-n", "300", "--json"],
    ],
)
def test_determinism(cfg, capsys, tmp_path, argv):
    path = cfg(CEXP_CFG)
    outs = []
    for i in range(2):
        target = tmp_path / f"o{i}"
        code, out, _ = run(capsys, argv[0], path, *argv[1:], "--out", target)
        assert code == 0
        outs.append((out, target.read_bytes()))
    assert outs[0] == outs[1]


def test_module_entry_point(cfg):
    res = subprocess.run(
        [sys.executable, "-m", "weierdim", "q", cfg(CEXP_CFG)], capture_output=True, text=True, check=False
    )
    assert res.returncode == 0 and res.stdout.startswith("q=0 ")
