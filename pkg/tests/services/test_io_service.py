import json

import numpy as np
import pytest

from scattomo.exceptions import ConfigValidationError
from scattomo.schemas.experiment_schemas import NoiseDemoConfig, ReconstructConfig
from scattomo.schemas.waveguide_schemas import GridAxis, SampledSurface
from scattomo.services import io_service


@pytest.fixture
def surface():
    axes = (
        GridAxis(name="khat", origin=101.0, step=0.5, count=2),
        GridAxis.centered("delta_p", 0.0, 0.2, 0.1),
        GridAxis.centered("delta_k", 0.0, 0.1, 0.1),
    )
    values = np.arange(30).reshape(2, 5, 3) * (1 - 0.5j)
    return SampledSurface(axes=axes, values=values)


class TestCsv:
    """Plain CSV tables."""

    def test_cells_are_formatted(self, tmp_path):
        path = io_service.write_csv(tmp_path / "nested" / "t.csv", ("a", "b", "c", "d"), [(0.1, 3, True, None)])
        assert path.read_text(encoding="utf-8") == "a,b,c,d\n0.1,3,true,\n"
        assert io_service.read_csv(path) == [{"a": "0.1", "b": "3", "c": "true", "d": ""}]

    def test_row_length_must_match_header(self, tmp_path):
        with pytest.raises(ValueError):
            io_service.write_csv(tmp_path / "t.csv", ("a", "b"), [(1,)])

    def test_rewrite_is_byte_identical(self, tmp_path):
        rows = [(1 / 3, 2.0e-17, np.float64(7.25))]
        first = io_service.write_csv(tmp_path / "a.csv", ("x", "y", "z"), rows).read_bytes()
        second = io_service.write_csv(tmp_path / "b.csv", ("x", "y", "z"), rows).read_bytes()
        assert first == second


class TestSurfaceFiles:
    def test_rows_are_khat_major_then_delta_k(self, surface):
        rows = io_service.t_surface_rows(surface)
        assert len(rows) == 30
        assert rows[0][:3] == pytest.approx((101.0, -0.1, -0.2))
        assert rows[1][:3] == pytest.approx((101.0, -0.1, -0.1))
        assert rows[5][:3] == pytest.approx((101.0, 0.0, -0.2))

    def test_scale_applies_to_values(self, surface, tmp_path):
        path = io_service.write_t_surface(tmp_path / "s.csv", surface, scale=2.0)
        last = io_service.read_csv(path)[-1]
        assert float(last["re"]) == pytest.approx(58.0)
        assert float(last["abs2"]) == pytest.approx(4 * abs(29 * (1 - 0.5j)) ** 2)

    def test_read_back(self, surface, tmp_path):
        restored = io_service.read_t_surface(io_service.write_t_surface(tmp_path / "s.csv", surface))
        assert restored.axis_names == ("khat", "delta_p", "delta_k")
        assert np.allclose(restored.values, surface.values)

    def test_empty_surface_file(self, tmp_path):
        path = io_service.write_csv(tmp_path / "s.csv", io_service.T_SURFACE_COLUMNS, [])
        with pytest.raises(ConfigValidationError):
            io_service.read_t_surface(path)


class TestConfigs:
    """JSON configuration loading and the seed override."""

    def test_defaults_without_a_file(self):
        assert io_service.load_config(None, None, ReconstructConfig) == ReconstructConfig()

    def test_seed_override(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"seed": 3, "power": 0.02}), encoding="utf-8")
        config = io_service.load_config(str(path), 11, ReconstructConfig)
        assert config.seed == 11
        assert config.power == 0.02

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigValidationError) as exc_info:
            io_service.load_config(str(tmp_path / "absent.json"), None, ReconstructConfig)
        assert exc_info.value.exit_code == 2

    @pytest.mark.parametrize(
        "content",
        [
            "{not json",
            json.dumps({"ports": 1}),
            json.dumps({"unknown_field": 1}),
        ],
    )
    def test_invalid_config(self, tmp_path, content):
        path = tmp_path / "c.json"
        path.write_text(content, encoding="utf-8")
        with pytest.raises(ConfigValidationError):
            io_service.load_config(str(path), None, ReconstructConfig)

    def test_json_document_round_trip(self, tmp_path):
        config = NoiseDemoConfig(shots=(10, 100), repeats=5)
        path = io_service.write_json(tmp_path / "noise.json", config)
        assert io_service.load_model(path, NoiseDemoConfig) == config
