"""
Tests for grid file ingestion and export
"""
import numpy as np
import pytest
from numpy.testing import assert_array_equal

from stdml.core.exceptions import ConfigurationError, ValidationError
from stdml.services.grid_file_service import GridFileService
from tests.conftest import make_dataset

GOOD = """# grid_spacing=0.5
# source=survey
row,col,Y0,Y1,D,elevation
1,0,0.3,0.4,0,12.0
0,0,0.1,NA,1,10.0
0,1,0.2,0.25,1,11.0
1,1,NA,0.5,0,13.5
"""


def six_cells(d_values):
    rows = ["row,col,Y0,Y1,D"]
    for k, d in enumerate(d_values):
        rows.append(f"{k // 3},{k % 3},{k}.0,{k}.5,{d}")
    return "# grid_spacing=1.0\n" + "\n".join(rows) + "\n"


class TestIngest:
    def test_four_pixels(self):
        data, header = GridFileService.read_text(GOOD)
        assert data.n == 4
        assert (data.grid.m_rows, data.grid.m_cols) == (2, 2)
        assert data.grid.spacing == 0.5
        assert header == {"grid_spacing": "0.5", "source": "survey"}
        assert_array_equal(data.y0, [0.1, 0.2, 0.3, np.nan])
        assert_array_equal(data.y1, [np.nan, 0.25, 0.4, 0.5])
        assert_array_equal(data.d, [1, 1, 0, 0])
        assert data.covariate_names == ["elevation"]
        assert_array_equal(data.X[:, 0], [10.0, 11.0, 12.0, 13.5])
        assert data.blocks is None

    def test_non_binary_treatment_names_line(self):
        with pytest.raises(ValidationError) as exc:
            GridFileService.read_text(six_cells([0, 1, 0, 1, 2, 0]))
        assert [e["line"] for e in exc.value.errors] == [7]
        assert exc.value.exit_code == 2

    def test_duplicate_cell(self):
        text = six_cells([0, 1, 0, 1, 0, 1]).replace("1,1,4.0", "0,1,4.0")
        with pytest.raises(ValidationError) as exc:
            GridFileService.read_text(text)
        messages = [e["message"] for e in exc.value.errors]
        assert any("duplicate cell (0, 1), first seen on line 4" in m for m in messages)

    def test_unparseable_values_itemized(self):
        text = six_cells([0, 1, 0, 1, 0, 1]).replace("2.0,2.5", "abc,2.5").replace("5.0,5.5", "5.0,x")
        with pytest.raises(ValidationError) as exc:
            GridFileService.read_text(text)
        assert [(e["line"], e["column"]) for e in exc.value.errors] == [(5, "Y0"), (8, "Y1")]

    def test_missing_column(self):
        with pytest.raises(ValidationError) as exc:
            GridFileService.read_text("row,col,Y0,Y1\n0,0,1,2\n")
        assert "missing required column 'D'" in exc.value.errors[0]["message"]

    def test_incomplete_grid(self):
        lines = six_cells([0, 1, 0, 1, 0, 1]).splitlines()
        with pytest.raises(ValidationError):
            GridFileService.read_text("\n".join(lines[:-1]) + "\n")

    def test_missing_treatment_rejected(self):
        with pytest.raises(ValidationError):
            GridFileService.read_text(six_cells([0, 1, "NA", 1, 0, 1]))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            GridFileService.ingest(tmp_path / "absent.csv")


class TestExport:
    @pytest.mark.parametrize("seed", range(100))
    def test_export_ingest_identity(self, seed):
        data = make_dataset(m=8, seed=seed, p=seed % 4, missing=0.2, blocks=seed % 2 == 0)
        text = GridFileService.export_text(data, {"seed": seed})
        back, header = GridFileService.read_text(text)
        assert header["seed"] == str(seed)
        assert back.grid == data.grid
        assert_array_equal(back.y0, data.y0)
        assert_array_equal(back.y1, data.y1)
        assert_array_equal(back.d, data.d)
        assert_array_equal(back.X, data.X)
        assert back.covariate_names == data.covariate_names
        if data.blocks is None:
            assert back.blocks is None
        else:
            assert_array_equal(back.blocks.labels, data.blocks.labels)

    def test_file_round_trip(self, tmp_path, pixel_sim):
        data, truth = pixel_sim
        path = GridFileService.export(data, tmp_path / "grid.csv", {"scenario": truth.scenario})
        back = GridFileService.ingest(path)
        assert_array_equal(back.y0, data.y0)
        assert_array_equal(back.X, data.X)
        assert GridFileService.export_text(back, {"scenario": truth.scenario}) == path.read_text()

    def test_missing_written_as_na(self):
        data = make_dataset(m=4, seed=1, missing=0.5)
        body = GridFileService.export_text(data).splitlines()
        assert any(",NA," in line for line in body)
        assert "nan" not in "\n".join(body)

    def test_truth_text(self, block_sim):
        data, truth = block_sim
        text = GridFileService.truth_text(data, truth, {"seed": 5})
        assert "# scenario=block-nu2" in text
        header_row = [line for line in text.splitlines() if not line.startswith("#")][0]
        assert header_row == "row,col,X1,X2,X3,X4,X5,propensity,block_effect,oracle_Y0,oracle_Y1"

    def test_summary(self, linear_dataset):
        text = GridFileService.format_summary(linear_dataset)
        assert text.startswith("pixels: 64 (8x8)\n")
        assert "covariates: X1,X2\n" in text
