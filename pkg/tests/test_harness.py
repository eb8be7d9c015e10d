import json
import math

import numpy as np
import pytest

from whiteconv import cli
from whiteconv.analysis import CSV_FIELDS
from whiteconv.core import InvalidParameterError
from whiteconv.harness.config import ConfigError, load_config
from whiteconv.harness.experiments import (PT_FIELDS, PhaseTransitionCell, contour_points,
                                           run_bounds_report, run_experiment,
                                           run_phase_transition)
from whiteconv.harness.imaging import (ConvolutionOperator2D, Haar2D, run_coded_aperture,
                                       synthetic_scene)
from whiteconv.harness.io import read_csv, read_pgm, to_csv, write_pgm


# ---------------------------------------------------------------- config

def test_yaml_and_overrides(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("n: 64\nm: [16, 32]\ns: 2\ntrials: 5\nmax_iterations: 300\nbasis: dct\n")
    cfg = load_config(p, trials=7, basis=None)
    assert cfg.n == 64 and cfg.m_grid == (16, 32) and cfg.s_grid == (2,)
    assert cfg.trials == 7 and cfg.basis == "dct"
    assert cfg.solver_config().max_iterations == 300


def test_grid_strings():
    cfg = load_config(m="8, 16,32", r="0.5,1")
    assert cfg.m_grid == (8, 16, 32) and cfg.r_grid == (0.5, 1.0)


@pytest.mark.parametrize("kw", [{"trials": 0}, {"m": ""}, {"format": "xml"},
                                {"omega": "random"}, {"bogus": 1}, {"penalty": -1.0},
                                {"workers": 0}, {"experiment": "nope"}])
def test_bad_config(kw):
    with pytest.raises(InvalidParameterError):
        load_config(**kw)


def test_config_must_be_mapping(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_echo_omits_workers():
    a, b = load_config(workers=1).echo(), load_config(workers=3).echo()
    assert a == b and "workers" not in a
    json.dumps(a)


# ---------------------------------------------------------------- io

def test_csv_round_trip(tmp_path):
    rows = [{"a": 1, "b": 0.1, "c": True, "d": None}, {"a": 2, "b": 1e-300, "c": False, "d": "x"}]
    p = tmp_path / "t.csv"
    p.write_text(to_csv(rows, ("a", "b", "c", "d")))
    back = read_csv(p)
    assert [float(r["b"]) for r in back] == [0.1, 1e-300]
    assert [r["c"] for r in back] == ["true", "false"]
    assert back[0]["d"] == "" and back[1]["d"] == "x"


def test_pgm_round_trip(tmp_path):
    img = np.round(np.random.default_rng(0).uniform(0, 1, (8, 12)) * 255) / 255
    p = tmp_path / "x.pgm"
    write_pgm(p, img)
    assert np.array_equal(read_pgm(p), img)


def test_pgm_header_comments_and_16bit(tmp_path):
    p = tmp_path / "y.pgm"
    pix = np.array([[0, 1000], [65535, 7]], dtype=">u2")
    p.write_bytes(b"P5\n# made by hand\n2 2\n65535\n" + pix.tobytes())
    assert np.allclose(read_pgm(p), pix / 65535)


def test_pgm_rejects_ascii(tmp_path):
    p = tmp_path / "z.pgm"
    p.write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(InvalidParameterError):
        read_pgm(p)


# ---------------------------------------------------------------- phase transition

def test_full_sampling_always_succeeds():
    cells = run_phase_transition(load_config(n=64, m=64, s=1, trials=50))
    assert cells[0].success_rate == 1.0 and cells[0].reliable


def test_information_floor_fails():
    cells = run_phase_transition(load_config(n=64, m=4, s=4, trials=20))
    assert cells[0].success_rate <= 0.1


def test_invalid_cells_are_skipped():
    cells = run_phase_transition(load_config(n=64, m="5,200,64", s="2,70", trials=3))
    status = {(c.S, c.m): c.status for c in cells}
    assert status[(2, 5)] == status[(2, 200)] == status[(70, 64)] == "skipped"
    assert status[(2, 64)] == "ok"
    assert all(0 <= c.successes <= c.trials for c in cells)
    assert all(c.success_rate == (c.successes / c.trials if c.trials else 0.0) for c in cells)


def test_explicit_omega_file(tmp_path):
    f = tmp_path / "omega.txt"
    f.write_text("0 3 5 9 12 17 20 22 25 28 30 33 40 47 51 60\n")
    cells = run_phase_transition(load_config(n=64, m=16, s=1, trials=5,
                                             omega=f"explicit:{f}"))
    assert cells[0].status == "ok" and cells[0].trials == 5


def test_workers_do_not_change_output():
    base = dict(n=64, m="16,32", s="2,4", trials=6, seed=5, certificate=True)
    a = run_experiment(load_config(workers=1, **base))
    b = run_experiment(load_config(workers=2, **base))
    assert a == b
    assert a.splitlines()[0] == ",".join(PT_FIELDS)


def test_contour_interpolation():
    mk = lambda S, m, p: PhaseTransitionCell(64, m, S, 10, int(10 * p), p, None)
    cells = [mk(2, 8, 0.0), mk(2, 16, 0.4), mk(2, 32, 0.8), mk(4, 16, 0.6), mk(8, 16, 0.1)]
    pts = contour_points(cells, 0.5)
    assert pts == [(2, pytest.approx(20.0)), (4, 16.0)]


# ---------------------------------------------------------------- bounds report

def test_bounds_report_reproducible():
    cfg = load_config(experiment="bounds", n=256, s="1,2,4,8")
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert a == b
    rows = run_bounds_report(cfg)
    g = {r["S"]: r["m_bound"] for r in rows if r["ensemble"] == "gaussian"}
    bern = {r["S"]: r["m_bound"] for r in rows if r["ensemble"] == "bernoulli"}
    assert g[4] == 88 and all(bern[S] >= g[S] for S in g)


def test_bounds_report_fits_K(tmp_path):
    cells = [PhaseTransitionCell(256, m, S, 10, 0, p, None)
             for S, seq in {1: [(8, .2), (16, .9)], 2: [(16, .3), (32, .7)],
                            4: [(32, .1), (64, .6)], 8: [(64, .2), (128, .8)]}.items()
             for m, p in seq]
    pt = tmp_path / "pt.csv"
    pt.write_text(to_csv([c.as_dict() for c in cells], PT_FIELDS))
    rows = run_bounds_report(load_config(experiment="bounds", n=256, s="4", pt_data=str(pt)))
    fit = [r for r in rows if r["kind"] == "fitted_K"]
    assert len(fit) == 1 and len(fit[0]["points"].split(";")) == 4
    assert 0 < fit[0]["K"] < math.inf and fit[0]["residual"] >= 0


# ---------------------------------------------------------------- concentration

def test_concentration_csv_schema(tmp_path):
    out = tmp_path / "c.csv"
    run_experiment(load_config(experiment="concentration", n=64, m=16, s=2, trials=100,
                               r="0.5,1,100"), out=out)
    rows = read_csv(out)
    assert tuple(rows[0]) == CSV_FIELDS and len(rows) == 3
    assert rows[-1]["empirical"] == "0.0"


def test_concentration_json_has_config(tmp_path):
    text = run_experiment(load_config(experiment="concentration", n=64, m=16, s=2,
                                      trials=100, r="1", format="json"))
    doc = json.loads(text)
    assert doc["config"]["n"] == 64 and "tables" in doc["summary"]


# ---------------------------------------------------------------- coded aperture

def test_operator2d_adjoint():
    rng = np.random.default_rng(0)
    op = ConvolutionOperator2D(rng.standard_normal((16, 16)), 2)
    x, y = rng.standard_normal(256), rng.standard_normal(64)
    assert abs(op.forward(x) @ y - x @ op.adjoint(y)) < 1e-10 * np.linalg.norm(x) * np.linalg.norm(y)


def test_operator2d_gram_eigenvalues():
    rng = np.random.default_rng(1)
    op = ConvolutionOperator2D(rng.standard_normal((8, 8)), 2)
    A = np.column_stack([op.forward(e) for e in np.eye(64)])
    assert np.allclose(np.sort(op.gram_eigenvalues().ravel()), np.linalg.eigvalsh(A @ A.T),
                       atol=1e-9)


def test_haar2d_orthonormal():
    b = Haar2D(8)
    P = np.column_stack([b.synthesize(e) for e in np.eye(64)])
    assert np.allclose(P.T @ P, np.eye(64), atol=1e-12)


def test_rate_one_noiseless():
    res = run_coded_aperture(synthetic_scene(32), "gaussian", 1, seed=0, noise_db=None)
    assert res.relative_error < 1e-3


def test_zero_image():
    res = run_coded_aperture(np.zeros((16, 16)), "gaussian", 4, seed=0, noise_db=30.0)
    assert np.array_equal(res.reconstruction, np.zeros((16, 16)))


@pytest.mark.parametrize("img, rate", [(np.zeros((8, 16)), 4), (np.zeros((24, 24)), 4),
                                       (np.zeros((512, 512)), 4), (np.zeros((16, 16)), 3)])
def test_coded_aperture_rejects(img, rate):
    with pytest.raises(ValueError):
        run_coded_aperture(img, "gaussian", rate)


def test_coded_aperture_writes_pgm(tmp_path):
    out = tmp_path / "rec.pgm"
    text = run_experiment(load_config(experiment="coded-aperture", side=16, trials=1,
                                      penalty=10.0), image_out=out)
    assert read_pgm(out).shape == (16, 16)
    assert text.startswith("seed,side,rate")


# ---------------------------------------------------------------- cli

def test_cli_coherence(capsys):
    assert cli.main(["coherence", "--basis", "spikes", "--n", "64"]) == 0
    assert capsys.readouterr().out.strip() == "1.0"


def test_cli_sense_recover(tmp_path, capsys):
    inst = tmp_path / "i.json"
    assert cli.main(["sense", "--n", "64", "--m", "32", "--s", "2", "--out", str(inst)]) == 0
    assert cli.main(["recover", str(inst)]) == 0
    assert json.loads(capsys.readouterr().out)["exact"] is True


def test_cli_phase_transition_file(tmp_path):
    out = tmp_path / "pt.csv"
    assert cli.main(["phase-transition", "--n", "32", "--m", "16", "--s", "1", "--trials", "3",
                     "--out", str(out)]) == 0
    assert read_csv(out)[0]["trials"] == "3"


def test_cli_config_error_exit_code():
    assert cli.main(["phase-transition", "--omega", "bogus"]) == 1
    assert cli.main(["concentration", "--trials", "10"]) == 1
    assert cli.main(["bounds", "--delta", "2"]) == 1


def test_cli_numerical_error_exit_code(monkeypatch):
    from whiteconv.core import NumericalError

    def boom(*a, **k):
        raise NumericalError("forced")
    monkeypatch.setattr(cli, "run_experiment", boom)
    assert cli.main(["bounds"]) == 2
