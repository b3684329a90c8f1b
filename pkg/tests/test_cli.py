from __future__ import annotations

import csv
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from shadowham.cli import fit_loglog, load_config, main, ConfigError


def write_ini(path: Path, text: str) -> str:
    path.write_text(text)
    return str(path)


def read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def report(out: Path) -> dict[tuple[str, str], str]:
    return {(r["parameters"], r["metric"]): r["value"] for r in read_csv(out / "report.csv")}


def metric(out: Path, name: str, **params) -> list[str]:
    want = {f"{k}={v}" for k, v in params.items()}
    return [r["value"] for r in read_csv(out / "report.csv")
            if r["metric"] == name and want <= set(r["parameters"].split(";"))]


# -- config handling --------------------------------------------------------------

def test_unknown_key_is_a_config_error(tmp_path, capsys):
    cfg = write_ini(tmp_path / "bad.ini", "[experiment]\nkind = simulate\n\n[run]\neta = 0.1\nbogus = 3\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "bad.ini:6" in err and "bogus" in err


def test_unknown_section_and_bad_value(tmp_path):
    cfg = write_ini(tmp_path / "a.ini", "[nope]\nx = 1\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
    cfg = write_ini(tmp_path / "b.ini", "[run]\neta = fast\n")
    with pytest.raises(ConfigError) as info:
        load_config(cfg, "simulate")
    assert info.value.line == 2


def test_kind_mismatch_and_missing_file(tmp_path):
    cfg = write_ini(tmp_path / "k.ini", "[experiment]\nkind = regret\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path)]) == 2


def test_seed_override_changes_hash(tmp_path):
    cfg = write_ini(tmp_path / "s.ini", "[experiment]\nseed = 5\n")
    a = load_config(cfg, "regret")
    b = load_config(cfg, "regret", seed_override=6)
    assert a.seed == 5 and b.seed == 6 and a.hash != b.hash


def test_fit_loglog():
    slope, intercept, degenerate = fit_loglog([1, 10, 100], [3.0, 0.3, 0.03])
    assert slope == pytest.approx(-1.0) and not degenerate
    assert fit_loglog([1, 2, 3], [1e-16, 1e-16, 1e-16])[2]


# -- simulate --------------------------------------------------------------------

def test_simulate_logcosh_traces(tmp_path):
    cfg = write_ini(tmp_path / "f.ini", "[run]\neta = 0.05\nsteps = 1000\np0 = 1\nq0 = 1\norders = 0, 1, 2, 3\n")
    out = tmp_path / "o"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    assert metric(out, "peak_to_peak_strictly_decreasing") == ["1"]
    init = float(metric(out, "initial_value", order=1)[0])
    assert abs(init - 0.85316) <= 1e-4
    ET.parse(out / "mh_trace.svg")
    rows = read_csv(out / "mh_values.csv")
    assert len(rows) == 1001 and list(rows[0]) == ["step", "mh_0", "mh_1", "mh_2", "mh_3"]


def test_simulate_quadratic_flat(tmp_path):
    cfg = write_ini(tmp_path / "q.ini", "[hamiltonian]\nfamily = quadratic\na = 1\nb = 1\n"
                                        "[run]\neta = 0.5\nsteps = 10000\np0 = 1\nq0 = 0\n")
    out = tmp_path / "o"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    assert float(metric(out, "closed_form_max_relative_drift")[0]) <= 1e-9


def test_simulate_zero_steps_header_only(tmp_path):
    cfg = write_ini(tmp_path / "z.ini", "[run]\nsteps = 0\norders = 0, 1\n")
    out = tmp_path / "o"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "mh_values.csv").read_bytes() == b"step,mh_0,mh_1\r\n"
    assert len((out / "trajectory.csv").read_text().splitlines()) == 2


def test_simulate_is_deterministic(tmp_path):
    cfg = write_ini(tmp_path / "d.ini", "[run]\nsteps = 50\norders = 0, 2\n")
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        assert main(["simulate", "--config", cfg, "--out", str(o)]) == 0
    for name in ("report.csv", "mh_values.csv", "trajectory.csv", "mh_trace.svg"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


# -- order-sweep -------------------------------------------------------------

def test_order_sweep_rate_slopes(tmp_path):
    cfg = write_ini(tmp_path / "o.ini", "[checks]\nmetric = rate\nslope_offset = 2\nslope_tol = 0.3\n")
    out = tmp_path / "o"
    assert main(["order-sweep", "--config", cfg, "--out", str(out)]) == 0
    fits = read_csv(out / "fits.csv")
    for row in fits:
        if row["metric"] == "rate":
            assert float(row["phi_hat"]) <= float(row["phi_bound"])


def test_order_sweep_quadratic_flags_degenerate_fits(tmp_path):
    cfg = write_ini(tmp_path / "q.ini", "[hamiltonian]\nfamily = quadratic\n[run]\norders = 1, 3\n")
    out = tmp_path / "o"
    assert main(["order-sweep", "--config", cfg, "--out", str(out)]) == 0
    assert set(metric(out, "degenerate_fit")) == {"1"}


def test_order_sweep_needs_three_etas(tmp_path):
    cfg = write_ini(tmp_path / "e.ini", "[run]\netas = 0.1, 0.05\n")
    assert main(["order-sweep", "--config", cfg, "--out", str(tmp_path)]) == 2


# -- symbolic commands ---------------------------------------------------------

def test_phi(tmp_path, capsys):
    assert main(["phi", "--order", "3", "--out", str(tmp_path)]) == 0
    printed = [line.split("\t")[1] for line in capsys.readouterr().out.splitlines()[1:]]
    assert printed == ["1", "3", "49/12", "197/36"]
    assert [r["phi"] for r in read_csv(tmp_path / "phi.csv")] == printed


@pytest.mark.parametrize("order", [3, 5])
def test_cancel_verify(tmp_path, order):
    assert main(["cancel-verify", "--order", str(order), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "cancellation.csv")
    assert [r["status"] for r in rows] == ["pass"] * (order + 1)


def test_cancel_verify_budget(tmp_path):
    assert main(["cancel-verify", "--order", "5", "--max-seconds", "0", "--out", str(tmp_path)]) == 1
    assert len(read_csv(tmp_path / "cancellation.csv")) == 1


def test_mh_dump(capsys):
    assert main(["mh", "dump", "--order", "1"]) == 0
    assert capsys.readouterr().out == "-1/2 * f_1 * g_1\n"
    assert main(["mh", "dump", "--order", "-1"]) == 2


def test_combinatorics_verify(tmp_path):
    assert main(["combinatorics-verify", "--out", str(tmp_path)]) == 0
    assert {r["status"] for r in read_csv(tmp_path / "combinatorics.csv")} == {"pass"}


# -- games and figures ---------------------------------------------------------------

def test_regret_command(tmp_path):
    cfg = write_ini(tmp_path / "r.ini", "[experiment]\nseed = 7\n[game]\nkind = matching_pennies\n"
                                        "[run]\nKs = 100, 1000, 10000\n"
                                        "[checks]\nidentity_tol = 1e-9\nmax_envelope_slope = -0.6\n"
                                        "require_decreasing = yes\n")
    out = tmp_path / "o"
    assert main(["regret", "--config", cfg, "--out", str(out), "--jobs", "2"]) == 0
    rows = read_csv(out / "regret.csv")
    assert [int(r["K"]) for r in rows] == [100, 1000, 10000]
    assert all(float(r["regret_formula_residual"]) <= 1e-9 for r in rows)


def test_quad_mh(tmp_path):
    assert main(["quad-mh", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "quad_mh.csv")
    assert list(rows[0]) == ["a", "b", "eta", "T"]
    for svg in tmp_path.glob("*.svg"):
        ET.parse(svg)


def test_examples_fig_bounded_and_divergent(tmp_path):
    ok = write_ini(tmp_path / "ok.ini", "[run]\nexponents = 1.5, 4\nsteps = 2000\nstarts = 0.3:0.2\n")
    assert main(["examples-fig", "--config", ok, "--out", str(tmp_path / "a")]) == 0
    bad = write_ini(tmp_path / "bad.ini", "[run]\nexponents = 4\nsteps = 10\nstarts = 1:1\n")
    out = tmp_path / "b"
    assert main(["examples-fig", "--config", bad, "--out", str(out)]) == 1
    assert metric(out, "bounded") == ["0"]
