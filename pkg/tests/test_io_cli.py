import json

import numpy as np
import pytest

from beltrami import expr as ex
from beltrami.catalog import EXAMPLE_IDS, get_example
from beltrami.cli import main
from beltrami.flow import Streamline, trace_streamline
from beltrami.io import (GridSample, SpecParseError, SpecSchemaError, dump_field_spec, load_field_spec,
                         parse_field_spec, sample_grid, spec_from_entry, write_csv, write_vtk)

B0_SPEC = """[field]
name = b0
kind = vector_field
box = -2, 2, -2, 2, -2, 2

[components]
w_x = sin(z)
w_y = cos(z)
w_z = 0

[expected]
hhat = 1
div = 0
"""

EX5_TRIPLE = """[field]
name = ex5
kind = ortho_triple

[coordinates]
ell = z
psi = (x-y)/sqrt(2)
theta = exp(x+y)/sqrt(2)   ; planar eikonal solution

[expected]
hhat = exp(x+y)
"""

EX5_PLANAR = """[field]
name = ex5p
kind = planar_frame

[planar]
n = 1/sqrt(2), 1/sqrt(2), 0
g = exp(sqrt(2)*s)
G = exp(sqrt(2)*s)/sqrt(2)
"""


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return p
    return _write


def test_load_b0(write):
    s = load_field_spec(write("b0.ini", B0_SPEC))
    assert s.kind == "vector_field" and s.name == "b0"
    assert s.exprs["w_x"] == ex.parse("sin(z)")
    assert s.box == ((-2, 2),) * 3


def test_load_triple(write):
    s = load_field_spec(write("ex5.ini", EX5_TRIPLE))
    assert s.kind == "ortho_triple"
    w = s.vector_field()
    p = get_example("ex5").samples(20)
    assert np.max(np.abs(w(p) - get_example("ex5").field(p))) <= 1e-15


def test_load_planar(write):
    s = load_field_spec(write("p.ini", EX5_PLANAR))
    t = s.triple()
    p = get_example("ex5").samples(20)
    assert np.allclose(t.theta(p), np.exp(p[:, 0] + p[:, 1]) / np.sqrt(2), rtol=1e-13)


def test_missing_key_is_named(write):
    with pytest.raises(SpecSchemaError) as err:
        load_field_spec(write("bad.ini", B0_SPEC.replace("w_z = 0\n", "")))
    assert err.value.missing == ["w_z"]
    assert "w_z" in str(err.value)


def test_expression_error_has_location(write):
    with pytest.raises(SpecParseError) as err:
        load_field_spec(write("bad.ini", B0_SPEC.replace("cos(z)", "cos z")))
    assert err.value.line == 8
    assert "offset" in str(err.value)


def test_malformed_document(write):
    with pytest.raises(SpecParseError) as err:
        load_field_spec(write("bad.ini", "w_x = 1\n"))
    assert err.value.line == 1
    with pytest.raises(SpecParseError):
        load_field_spec(write("bad.ini", B0_SPEC.replace("vector_field", "tensor")))


def test_non_utf8(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_bytes(b"[field]\nname = \xff\n")
    with pytest.raises(SpecParseError, match="UTF-8"):
        load_field_spec(p)


@pytest.mark.parametrize("text", [B0_SPEC, EX5_TRIPLE, EX5_PLANAR])
def test_round_trip(text):
    a = parse_field_spec(text)
    b = parse_field_spec(dump_field_spec(a))
    assert a.exprs == b.exprs and a.expected == b.expected and a.guard == b.guard
    assert a.box == b.box and a.planar == b.planar and a.kind == b.kind


@pytest.mark.parametrize("eid", EXAMPLE_IDS)
def test_catalog_entries_round_trip(eid):
    e = get_example(eid)
    for kind in (("vector_field", "ortho_triple") if e.triple is not None else ("vector_field",)):
        s = spec_from_entry(e, kind)
        back = parse_field_spec(dump_field_spec(s))
        assert back.exprs == s.exprs and back.guard.text == s.guard.text


def test_grid_b0():
    g = sample_grid(get_example("b0").field, ((-2, 2),) * 3, 17, extras=("hhat",))
    assert g.values.shape == (17 ** 3, 3) and not g.mask.any()
    assert np.allclose(g.scalars["hhat"], 1.0)


def test_grid_masks_axis():
    e = get_example("ex1")
    g = sample_grid(e.field, ((-1, 1),) * 3, 5, extras=("theta", "L_theta"), triple=e.triple)
    pts = g.points()
    axis = np.hypot(pts[:, 0], pts[:, 1]) < 0.05
    assert axis.any() and np.all(g.mask[axis])
    assert np.all(np.isnan(g.values[g.mask])) and np.all(np.isnan(g.scalars["theta"][g.mask]))
    assert np.all(np.isfinite(g.values[~g.mask]))


def test_grid_resolution_precondition():
    with pytest.raises(ValueError):
        sample_grid(get_example("b0").field, ((-1, 1),) * 3, 1)


def test_vtk_output(tmp_path):
    g = sample_grid(get_example("b0").field, ((-2, 2),) * 3, 17, extras=("hhat",))
    path = tmp_path / "b0.vtk"
    write_vtk(g, path)
    lines = path.read_text().splitlines()
    assert lines[3] == "DATASET STRUCTURED_POINTS"
    assert "POINT_DATA 4913" in lines
    assert "SCALARS hhat double 1" in lines
    write_vtk(g, tmp_path / "again.vtk")
    assert (tmp_path / "again.vtk").read_bytes() == path.read_bytes()


def test_streamline_csv(tmp_path):
    e = get_example("b0")
    s = trace_streamline(e.field, (1, 0, 0), 2, triple=e.triple)
    path = tmp_path / "s.csv"
    write_csv(s, path)
    rows = path.read_text().splitlines()
    assert rows[0] == "t,x,y,z,theta,L_theta"
    assert len(rows) == len(s.times) + 1
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.allclose(data[:, 5], 1.0)


def test_empty_outputs_raise(tmp_path):
    with pytest.raises(ValueError):
        write_vtk(GridSample(((0, 1),) * 3, (), np.empty((0, 3))), tmp_path / "e.vtk")
    with pytest.raises(ValueError):
        write_csv(Streamline([], []), tmp_path / "e.csv")


def test_cli_verify(write, capsys):
    assert main(["verify", str(write("b0.ini", B0_SPEC)), "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["classification"] == "nontrivial_beltrami" and out["passed"]


def test_cli_verify_failure(write):
    bad = B0_SPEC.replace("hhat = 1", "hhat = 2")
    assert main(["verify", str(write("b0.ini", bad))]) == 1


def test_cli_construct(write, capsys):
    assert main(["construct", str(write("ex5.ini", EX5_TRIPLE))]) == 0
    text = capsys.readouterr().out
    spec = parse_field_spec(text)
    assert spec.kind == "vector_field"
    assert main(["construct", str(write("ex5.ini", EX5_TRIPLE)), "--star"]) == 0


def test_cli_planar(capsys):
    assert main(["planar", "--n", "1/sqrt(2),1/sqrt(2),0", "--g", "exp(sqrt(2)*s)"]) == 0
    assert main(["planar", "--n", "1/sqrt(2),-1/sqrt(2),0", "--g", "cos(sqrt(2)*s)"]) == 1
    assert main(["planar", "--n", "1/sqrt(2),-1/sqrt(2),0", "--g", "cos(sqrt(2)*s)",
                 "--allow-sign-change"]) == 0


def test_cli_trace(write, tmp_path, capsys):
    csv = tmp_path / "t.csv"
    assert main(["trace", str(write("ex5.ini", EX5_TRIPLE)), "--x0", "0,0,0", "--t-end", "5",
                 "--csv", str(csv), "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["theta_drift"] <= 1e-9
    assert csv.read_text().startswith("t,x,y,z,theta,L_theta\n")


def test_cli_sample(write, tmp_path):
    vtk = tmp_path / "b0.vtk"
    assert main(["sample", str(write("b0.ini", B0_SPEC)), "--res", "5", "--extras", "hhat",
                 "--vtk", str(vtk)]) == 0
    assert "POINT_DATA 125" in vtk.read_text()
    assert main(["sample", str(write("b0.ini", B0_SPEC)), "--res", "1"]) == 2


def test_cli_catalog(capsys):
    assert main(["catalog", "list"]) == 0
    assert main(["catalog", "show", "ex4"]) == 0
    shown = capsys.readouterr().out
    assert "kind = vector_field" in shown
    assert main(["catalog", "verify-all"]) == 0
    assert main(["catalog", "show", "nope"]) == 2


def test_cli_bad_spec(write, capsys):
    assert main(["verify", str(write("bad.ini", B0_SPEC.replace("w_z = 0\n", "")))]) == 2
    assert "w_z" in capsys.readouterr().err
