import dataclasses

import pytest

from vfls.config import (
    ConfigError,
    ProblemConfig,
    config_to_text,
    load_config,
    parse_config_text,
)


def test_defaults_validate():
    ProblemConfig().validate()


def test_parse_overrides_and_comments():
    cfg = parse_config_text(
        """
        # compressed square at reduced scale
        mesh.nx = 150
        mesh.ny = 150          # trailing comment
        constraints.stress_limit = 1.3
        constraints.buckling = true
        bspline.degree_x = 3
        """
    )
    assert cfg.nx == 150
    assert cfg.ny == 150
    assert cfg.stress_limit == 1.3
    assert cfg.buckling_constraint is True
    assert cfg.degree_x == 3
    # Untouched fields keep their defaults.
    assert cfg.nu == ProblemConfig().nu


def test_parse_bool_spellings():
    for raw, expected in [("true", True), ("ON", True), ("1", True),
                          ("false", False), ("No", False), ("0", False)]:
        cfg = parse_config_text(f"output.vtk = {raw}")
        assert cfg.write_vtk is expected
    with pytest.raises(ConfigError, match="boolean"):
        parse_config_text("output.vtk = maybe")


def test_parse_rejects_unknown_key():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("mesh.size = 10")


def test_parse_rejects_duplicate_key():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("mesh.nx = 10\nmesh.nx = 20")


def test_parse_rejects_malformed_line():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("just some words")


def test_parse_rejects_bad_number():
    with pytest.raises(ConfigError, match="expected float"):
        parse_config_text("mesh.h = wide")
    with pytest.raises(ConfigError, match="expected int"):
        parse_config_text("mesh.nx = 10.5")


def test_int_accepts_integral_float_spelling():
    cfg = parse_config_text("mesh.nx = 120.0")
    assert cfg.nx == 120


def test_round_trip_through_text():
    cfg = ProblemConfig(nx=64, ny=48, stress_limit=0.65, p=10.0,
                        lbracket=True, out_dir="results")
    again = parse_config_text(config_to_text(cfg))
    assert again == cfg


def test_load_config_reads_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("mesh.nx = 40\nmesh.ny = 30\n")
    cfg = load_config(path)
    assert (cfg.nx, cfg.ny) == (40, 30)


@pytest.mark.parametrize(
    "field_name,value,match",
    [
        ("nx", 0, "mesh.nx"),
        ("h", -1.0, "mesh.h"),
        ("cutout_fraction", 1.0, "cutout_fraction"),
        ("E_min", 2.0, "E_min"),
        ("nu", 0.5, "material.nu"),
        ("stress_limit", 0.0, "stress_limit"),
        ("p", 0.9, "aggregation.p"),
        ("gamma", 0.0, "aggregation.gamma"),
        ("n_modes", 0, "n_modes"),
        ("knot_interval", 0.0, "knot_interval"),
        ("v_max", 0.0, "v_max"),
        ("coeff_bound", -0.1, "coeff_bound"),
        ("move_limit", 1.5, "move_limit"),
        ("max_iterations", -1, "max_iterations"),
        ("tolerance", 0.0, "tolerance"),
        ("hole_rows", -1, "hole_rows"),
        ("band_width", -0.5, "band_width"),
        ("reinit_sweeps", -2, "reinit_sweeps"),
    ],
)
def test_validate_rejects_out_of_range(field_name, value, match):
    cfg = dataclasses.replace(ProblemConfig(), **{field_name: value})
    with pytest.raises(ConfigError, match=match):
        cfg.validate()


def test_validate_requires_some_constraint():
    cfg = dataclasses.replace(
        ProblemConfig(), stress_constraint=False, buckling_constraint=False
    )
    with pytest.raises(ConfigError, match="at least one"):
        cfg.validate()


def test_validate_caps_velocity_by_cfl():
    cfg = dataclasses.replace(ProblemConfig(), h=1.0, v_max=0.51)
    with pytest.raises(ConfigError, match="CFL"):
        cfg.validate()
    dataclasses.replace(ProblemConfig(), h=1.0, v_max=0.5).validate()


def test_hole_radius_only_required_with_holes():
    dataclasses.replace(
        ProblemConfig(), hole_rows=0, hole_cols=0, hole_radius=-1.0
    ).validate()
    cfg = dataclasses.replace(ProblemConfig(), hole_radius=0.0)
    with pytest.raises(ConfigError, match="hole_radius"):
        cfg.validate()


def test_effective_band_width_defaults_to_two_h():
    cfg = dataclasses.replace(ProblemConfig(), h=0.5, band_width=0.0)
    assert cfg.effective_band_width == 1.0
    cfg = dataclasses.replace(ProblemConfig(), band_width=1.25)
    assert cfg.effective_band_width == 1.25
