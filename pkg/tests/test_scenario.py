import json
from pathlib import Path

import numpy as np
import pytest

from biphoton.cli import main
from biphoton.elements import Phase
from biphoton.errors import AssemblyError, ConfigError
from biphoton.grid import PlaneKind
from biphoton.report import read_map, sha256_of, to_db
from biphoton.scenario import assemble_arms, parse_config, parse_config_dict, run_scenario

PRESETS = Path(__file__).resolve().parent.parent / "presets"

BASE_CONFIG = """
[grid]
n = 16
ndim = 2
pitch_um = 4.0

[pump]
fwhm_um = 24.0

[crystal]
length_mm = 0.8
slices = 3
phase_matching = "type1_degenerate"
pump_wavelength_nm = 355.0
down_wavelength_nm = 710.0
refractive_index = 1.6

[[signal_arm.elements]]
kind = "lens_fourier"
focal_length_mm = 75.0

[[idler_arm.elements]]
kind = "lens_fourier"
focal_length_mm = 75.0

[outputs]
maps = ["sum", "difference"]
figures = false

[run]
mode = "serial"
"""


@pytest.fixture
def base_config(tmp_path):
    path = tmp_path / "base.toml"
    path.write_text(BASE_CONFIG)
    return path


class TestConfigParsing:
    def test_parses_base(self, base_config):
        config = parse_config(base_config)
        assert config.grid.n == 16
        assert config.crystal.slices == 3
        assert config.run.mode == "serial"

    def test_missing_key_is_named(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text(BASE_CONFIG.replace('fwhm_um = 24.0\n', ""))
        with pytest.raises(ConfigError, match="pump.fwhm_um"):
            parse_config(path)

    def test_toml_syntax_error(self, tmp_path):
        path = tmp_path / "syntax.toml"
        path.write_text("[grid\nn=16")
        with pytest.raises(ConfigError, match="parse error"):
            parse_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "absent.toml")

    def test_unknown_map_name(self, base_config):
        import tomli

        data = tomli.loads(BASE_CONFIG)
        data["outputs"]["maps"] = ["sum", "bogus"]
        with pytest.raises(ConfigError, match="bogus"):
            parse_config_dict(data)

    def test_scatterer_requires_seed(self):
        import tomli

        data = tomli.loads(BASE_CONFIG)
        data["scatterers"] = {"plane": "nf"}
        with pytest.raises(ConfigError, match="seed_nf"):
            parse_config_dict(data)

    def test_rejects_unknown_element_kind(self):
        import tomli

        data = tomli.loads(BASE_CONFIG)
        data["signal_arm"]["elements"][0] = {"kind": "prism"}
        with pytest.raises(ConfigError, match="prism"):
            parse_config_dict(data)


class TestScattererInsertion:
    def _config(self, n_lenses: int, plane: str):
        import tomli

        data = tomli.loads(BASE_CONFIG)
        lens = {"kind": "lens_fourier", "focal_length_mm": 75.0}
        data["signal_arm"]["elements"] = [dict(lens) for _ in range(n_lenses)]
        data["idler_arm"]["elements"] = [dict(lens) for _ in range(n_lenses)]
        data["scatterers"] = {"plane": plane, "seed_nf": 1, "seed_ff": 2}
        return parse_config_dict(data)

    def test_ff_mask_goes_to_first_far_field_plane(self):
        config = self._config(3, "ff")
        signal, _ = assemble_arms(config)
        kinds = [type(e).__name__ for e in signal.elements]
        assert kinds == ["LensFourier", "Phase", "LensFourier", "LensFourier"]
        planes = signal.plane_grids()
        assert planes[1].plane_kind is PlaneKind.FAR_FIELD

    def test_nf_mask_goes_to_last_interior_near_field_plane(self):
        config = self._config(3, "nf")
        signal, _ = assemble_arms(config)
        kinds = [type(e).__name__ for e in signal.elements]
        assert kinds == ["LensFourier", "LensFourier", "Phase", "LensFourier"]

    def test_both_masks_order_ff_then_nf(self):
        config = self._config(3, "both")
        signal, idler = assemble_arms(config)
        kinds = [type(e).__name__ for e in signal.elements]
        assert kinds == ["LensFourier", "Phase", "LensFourier", "Phase", "LensFourier"]
        # the same seeded masks are shared between the arms
        s_masks = [e for e in signal.elements if isinstance(e, Phase)]
        i_masks = [e for e in idler.elements if isinstance(e, Phase)]
        for sm, im in zip(s_masks, i_masks):
            assert sm is im

    def test_nf_mask_on_identity_arm_goes_to_input(self):
        config = self._config(0, "nf")
        signal, _ = assemble_arms(config)
        assert [type(e).__name__ for e in signal.elements] == ["Phase"]

    def test_ff_mask_without_far_field_plane_fails(self):
        config = self._config(0, "ff")
        with pytest.raises(AssemblyError, match="far-field"):
            assemble_arms(config)


class TestRunScenario:
    def test_outputs_and_manifest(self, base_config, tmp_path):
        out = tmp_path / "out"
        payload = run_scenario(base_config, out)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["results"]["total_weight"] > 0
        listed = {entry["path"] for entry in manifest["outputs"]}
        assert {"sum.f64", "sum.hdr", "sum.pgm", "difference.f64", "metrics.csv"} <= listed
        # every listed output carries a correct checksum
        for entry in manifest["outputs"]:
            assert sha256_of(out / entry["path"]) == entry["sha256"]
        assert payload["results"]["maps"]["sum"]["total"] == pytest.approx(1.0, abs=1e-10)

    def test_map_round_trip(self, base_config, tmp_path):
        out = tmp_path / "out"
        run_scenario(base_config, out)
        values, pitch, kind = read_map(out, "sum")
        assert values.shape == (16, 16)
        assert kind == "sum"
        assert values.sum() == pytest.approx(1.0, abs=1e-10)
        header = (out / "sum.hdr").read_text().splitlines()
        assert header[0] == "BIPHOTON-MAP v1"

    def test_serial_reruns_are_byte_identical(self, tmp_path):
        config = tmp_path / "cfg.toml"
        config.write_text(
            BASE_CONFIG.replace('[outputs]', '[scatterers]\nplane = "nf"\nseed_nf = 3\n\n[outputs]')
        )
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        run_scenario(config, out1)
        run_scenario(config, out2)
        for name in ("sum", "difference"):
            assert (out1 / f"{name}.f64").read_bytes() == (out2 / f"{name}.f64").read_bytes()

    def test_seed_override_changes_arrays(self, tmp_path):
        config = tmp_path / "cfg.toml"
        config.write_text(
            BASE_CONFIG.replace('[outputs]', '[scatterers]\nplane = "nf"\nseed_nf = 3\n\n[outputs]')
        )
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        run_scenario(config, out1)
        run_scenario(config, out2, seed_override=99)
        assert (out1 / "sum.f64").read_bytes() != (out2 / "sum.f64").read_bytes()

    def test_pgm_preview_format(self, base_config, tmp_path):
        out = tmp_path / "out"
        run_scenario(base_config, out)
        blob = (out / "sum.pgm").read_bytes()
        assert blob.startswith(b"P5\n16 16\n255\n")
        assert len(blob) == len(b"P5\n16 16\n255\n") + 256

    def test_figures_written_when_enabled(self, tmp_path):
        config = tmp_path / "cfg.toml"
        config.write_text(BASE_CONFIG.replace("figures = false", "figures = true"))
        out = tmp_path / "out"
        run_scenario(config, out)
        assert (out / "sum.png").exists()
        assert (out / "metrics.csv").read_text().startswith("metric,value")


class TestCli:
    def test_run_exit_zero(self, base_config, tmp_path, capsys):
        code = main(["run", str(base_config), "--output-dir", str(tmp_path / "o")])
        assert code == 0
        assert "total weight" in capsys.readouterr().out

    def test_config_error_exit_2(self, tmp_path, capsys):
        path = tmp_path / "broken.toml"
        path.write_text(BASE_CONFIG.replace("fwhm_um = 24.0\n", ""))
        code = main(["run", str(path), "--output-dir", str(tmp_path / "o")])
        assert code == 2
        assert "pump.fwhm_um" in capsys.readouterr().err

    def test_assembly_error_exit_3(self, tmp_path, capsys):
        # identity arms have no far-field plane for the requested scatterer
        path = tmp_path / "bad_chain.toml"
        config = BASE_CONFIG.replace(
            '[outputs]', '[scatterers]\nplane = "ff"\nseed_ff = 2\n\n[outputs]'
        )
        for arm in ("signal_arm", "idler_arm"):
            config = config.replace(
                f'[[{arm}.elements]]\nkind = "lens_fourier"\nfocal_length_mm = 75.0\n',
                f"[{arm}]\nelements = []\n",
            )
        path.write_text(config)
        code = main(["run", str(path), "--output-dir", str(tmp_path / "o")])
        assert code == 3
        assert "far-field" in capsys.readouterr().err

    def test_guard_error_exit_4(self, base_config, tmp_path, capsys):
        # oracle-check on a non-guard-size grid trips the size guard
        code = main(["oracle-check", str(base_config)])
        assert code == 4
        assert "size guard" in capsys.readouterr().err

    def test_numerical_error_exit_5(self, tmp_path, capsys):
        path = tmp_path / "overflow.toml"
        path.write_text(BASE_CONFIG.replace("[pump]", "[pump]\namplitude = 1e200"))
        code = main(["run", str(path), "--output-dir", str(tmp_path / "o")])
        assert code == 5
        assert "numerical" in capsys.readouterr().err

    def test_oracle_check_passes_on_guard_size(self, capsys):
        code = main(["oracle-check", str(PRESETS / "oracle_small.toml")])
        out = capsys.readouterr().out
        assert code == 0
        assert "PASS" in out

    def test_bench_runs_and_reports_slope(self, tmp_path, capsys):
        code = main(
            ["bench", "--n", "8", "12", "--m", "2", "--repeats", "1",
             "--output-dir", str(tmp_path / "b")]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "slope" in out
        assert (tmp_path / "b" / "bench.csv").exists()
        assert (tmp_path / "b" / "bench.png").exists()

    def test_serial_flag_forces_serial(self, tmp_path):
        config = tmp_path / "cfg.toml"
        config.write_text(BASE_CONFIG.replace('mode = "serial"', 'mode = "parallel"'))
        out1 = tmp_path / "o1"
        out2 = tmp_path / "o2"
        main(["run", str(config), "--output-dir", str(out1), "--serial"])
        main(["run", str(config), "--output-dir", str(out2), "--serial"])
        assert (out1 / "sum.f64").read_bytes() == (out2 / "sum.f64").read_bytes()


class TestPresets:
    @pytest.mark.parametrize(
        "name",
        ["fig5a", "fig5b", "fig5c", "fig5d", "fig6_none", "fig6_nf", "fig6_both", "fig6_ff"],
    )
    def test_preset_parses_and_assembles(self, name):
        config = parse_config(PRESETS / f"{name}.toml")
        signal, idler = assemble_arms(config)
        assert signal.output_grid == idler.output_grid


def test_to_db_floors_and_scales():
    values = np.array([[1.0, 0.1], [1e-6, 0.0]])
    db = to_db(values, floor_db=-40.0)
    assert db[0, 0] == 0.0
    assert db[0, 1] == pytest.approx(-10.0)
    assert db[1, 0] == -40.0
    assert db[1, 1] == -40.0
