import math

import numpy as np
import pytest

from mixdenoise.cli import format_report, main, parse_suite, UsageError
from mixdenoise.image_core import load_pgm, psnr, save_pgm


@pytest.fixture
def gradient_pgm(tmp_path):
    yy, xx = np.mgrid[:40, :40]
    img = (40 + 4 * xx + yy).astype(float)
    path = tmp_path / "clean.pgm"
    save_pgm(img, path)
    return path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_corrupt_identity(tmp_path, gradient_pgm, capsys):
    out = tmp_path / "n.pgm"
    code, _, _ = run(["corrupt", "--input", gradient_pgm, "--output", out, "--sigma", 0, "--rate", 0], capsys)
    assert code == 0
    assert out.read_bytes() == gradient_pgm.read_bytes()
    assert not load_pgm(tmp_path / "n.mask.pgm").any()
    meta = (tmp_path / "n.meta.txt").read_text()
    assert "sigma = 0.0" in meta and "kind = sp" in meta


def test_corrupt_deterministic(tmp_path, gradient_pgm, capsys):
    args = ["--input", gradient_pgm, "--sigma", 10, "--rate", 0.3, "--seed", 4, "--kind", "rv"]
    run(["corrupt", "--output", tmp_path / "a.pgm", *args], capsys)
    run(["corrupt", "--output", tmp_path / "b.pgm", *args], capsys)
    assert (tmp_path / "a.pgm").read_bytes() == (tmp_path / "b.pgm").read_bytes()
    assert (tmp_path / "a.mask.pgm").read_bytes() == (tmp_path / "b.mask.pgm").read_bytes()
    assert set(np.unique(load_pgm(tmp_path / "a.mask.pgm"))) <= {0.0, 255.0}


@pytest.mark.parametrize("bad", [["--rate", "1.5"], ["--rate", "0.1", "--kind", "gauss"]])
def test_corrupt_usage_errors(tmp_path, gradient_pgm, capsys, bad):
    code, _, err = run(["corrupt", "--input", gradient_pgm, "--output", tmp_path / "x.pgm", "--sigma", 1, *bad], capsys)
    assert code == 2 and "error" in err


def test_missing_input_is_usage_error(tmp_path, capsys):
    code, _, err = run(["evaluate", tmp_path / "nope.pgm", tmp_path / "nope.pgm"], capsys)
    assert code == 2 and "no such file" in err


def test_bad_pgm_is_usage_error(tmp_path, capsys):
    p = tmp_path / "bad.pgm"
    p.write_bytes(b"P5 1 1 65535\n\x00\x00")
    code, _, err = run(["evaluate", p, p], capsys)
    assert code == 2 and "unsupported maxval" in err


def test_evaluate(tmp_path, gradient_pgm, capsys):
    code, out, _ = run(["evaluate", gradient_pgm, gradient_pgm], capsys)
    assert code == 0 and "PSNR: inf" in out and "MSE: 0.000000" in out
    shifted = tmp_path / "s.pgm"
    save_pgm(load_pgm(gradient_pgm) + 10, shifted)
    code, out, _ = run(["evaluate", gradient_pgm, shifted], capsys)
    assert "PSNR: 28.13 dB" in out
    small = tmp_path / "small.pgm"
    save_pgm(np.zeros((3, 3)), small)
    code, _, err = run(["evaluate", gradient_pgm, small], capsys)
    assert code == 2 and "size mismatch" in err


def test_evaluate_matches_corrupt(tmp_path, gradient_pgm, capsys):
    noisy = tmp_path / "n.pgm"
    run(["corrupt", "--input", gradient_pgm, "--output", noisy, "--sigma", 10, "--rate", 0.3, "--seed", 1], capsys)
    _, out, _ = run(["evaluate", gradient_pgm, noisy], capsys)
    want = psnr(load_pgm(gradient_pgm), load_pgm(noisy))
    assert f"PSNR: {want:.2f} dB" in out


def test_detect(tmp_path, capsys):
    img = np.full((20, 20), 120.0)
    img[5, 5] = 0
    img[10, 12] = 255
    src = tmp_path / "d.pgm"
    save_pgm(img, src)
    out = tmp_path / "m.pgm"
    code, text, _ = run(["detect", "--input", src, "--output", out, "--kind", "sp", "--wmax", 9], capsys)
    assert code == 0 and "suspect: 2" in text and "reliable: 398" in text
    mask = load_pgm(out)
    assert mask[5, 5] == 255 and mask[10, 12] == 255 and mask.sum() == 510
    code, text, _ = run(["detect", "--input", src, "--output", out, "--kind", "rv", "--delta-factor", 0.5], capsys)
    assert code == 0 and "suspect: 2" in text
    code, _, _ = run(["detect", "--input", src, "--output", out, "--wmax", 8], capsys)
    assert code == 2


SMALL_CFG = """\
solver.inner_iters = 2
solver.outer_iters = 2
nonlocal.block_size = 4
nonlocal.group_size = 4
nonlocal.window = 11
nonlocal.step = 3
"""


def test_denoise_and_trace(tmp_path, gradient_pgm, capsys):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL_CFG)
    noisy = tmp_path / "n.pgm"
    run(["corrupt", "--input", gradient_pgm, "--output", noisy, "--sigma", 10, "--rate", 0.3, "--seed", 1], capsys)
    out = tmp_path / "o.pgm"
    trace = tmp_path / "trace.txt"
    args = ["denoise", "--input", noisy, "--output", out, "--sigma", 10, "--config", cfg, "--trace", trace]
    code, _, _ = run(args, capsys)
    assert code == 0
    clean = load_pgm(gradient_pgm)
    assert psnr(clean, load_pgm(out)) > psnr(clean, load_pgm(noisy)) + 5
    lines = trace.read_text().splitlines()
    assert lines[0].startswith("#") and len(lines) == 1 + 4
    first = out.read_bytes()
    run(args, capsys)
    assert out.read_bytes() == first


def test_denoise_requires_sigma(tmp_path, gradient_pgm, capsys):
    code, _, _ = run(["denoise", "--input", gradient_pgm, "--output", tmp_path / "o.pgm"], capsys)
    assert code == 2


def test_denoise_bad_config(tmp_path, gradient_pgm, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("solver.beta = -1\n")
    code, _, err = run(["denoise", "--input", gradient_pgm, "--output", tmp_path / "o.pgm", "--sigma", 10, "--config", cfg], capsys)
    assert code == 2 and "beta" in err
    cfg.write_text("nonlocal.group_size = 5000\n")
    code, _, _ = run(["denoise", "--input", gradient_pgm, "--output", tmp_path / "o.pgm", "--sigma", 10, "--config", cfg], capsys)
    assert code == 2


def test_parse_suite(tmp_path):
    cases = parse_suite("# header\nimgs/a.pgm, sp, 0.3, 10, 1, 31.0\n\n/abs/b.pgm, rv, 0.2, 10, 2\n", tmp_path)
    assert len(cases) == 2
    assert cases[0].image == str(tmp_path / "imgs" / "a.pgm") and cases[0].min_psnr == 31.0
    assert cases[1].image == "/abs/b.pgm" and cases[1].min_psnr is None
    for bad in ("a.pgm, sp, 0.3", "a.pgm, sp, 2.0, 10, 1", "a.pgm, zz, 0.3, 10, 1"):
        with pytest.raises(UsageError):
            parse_suite(bad)


def test_benchmark_empty_suite(tmp_path, capsys):
    suite = tmp_path / "empty.txt"
    suite.write_text("# nothing\n")
    code, out, _ = run(["benchmark", suite, "--jobs", 1], capsys)
    assert code == 0
    rows = [l for l in out.splitlines() if not l.startswith("#")]
    assert rows == ["image,kind,r,noisy_psnr,denoised_psnr,runtime_s,min_psnr,status,error"]


def test_benchmark_isolates_failures(tmp_path, gradient_pgm, capsys):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL_CFG)
    suite = tmp_path / "suite.txt"
    suite.write_text(f"{gradient_pgm}, sp, 0.3, 10, 1, 20\nmissing.pgm, sp, 0.3, 10, 1\n{gradient_pgm}, rv, 0.2, 10, 1\n")
    report = tmp_path / "report.csv"
    figs = tmp_path / "figs"
    code, out, _ = run(
        ["benchmark", suite, "--config", cfg, "--output", report, "--figures", figs, "--jobs", 2], capsys
    )
    assert code == 1
    text = report.read_text()
    assert text == out
    header = [l for l in text.splitlines() if l.startswith("#")]
    assert any(l.startswith("# nonlocal.block_size = 4") for l in header)
    rows = [l.split(",") for l in text.splitlines() if not l.startswith("#")][1:]
    assert [r[0] for r in rows] == ["clean", "missing", "clean"]
    assert [r[7] for r in rows] == ["pass", "error", "ok"]
    assert float(rows[0][4]) > float(rows[0][3])
    assert "FileNotFoundError" in rows[1][8]
    assert (figs / "psnr_summary.png").stat().st_size > 0
    assert len(list(figs.glob("00_*.png"))) == 1


def test_format_report_infinite():
    row = dict(image="a", kind="sp", rate=0.1, noisy_psnr=math.inf, denoised_psnr=None,
               runtime_s=None, min_psnr=None, status="ok", error="")
    text = format_report([row], ["x = 1"])
    assert text.splitlines()[0] == "# x = 1"
    assert text.splitlines()[2] == "a,sp,0.1,inf,,,,ok,"


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "mixdenoise", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "mixdenoise" in proc.stdout
