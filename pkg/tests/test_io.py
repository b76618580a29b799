import json

import numpy as np
import pytest

from bcnmf.core import LikelihoodSpec, NegativeEntry, TrainConfig
from bcnmf.io import (
    IoError,
    ManifestMismatch,
    ParseError,
    format_float,
    read_labels,
    read_matrix,
    read_model,
    write_labels,
    write_matrix,
    write_model,
)
from bcnmf.simulate import make_planted
from bcnmf.trainer import fit

MTX_HEADER = "%%MatrixMarket matrix coordinate integer general\n"


class TestCSV:
    def test_basic(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1,2\n3,4")
        np.testing.assert_array_equal(read_matrix(p), [[1, 2], [3, 4]])

    def test_header_detected(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("s1,s2,s3\n1,2,3\n4,5,6\n")
        assert read_matrix(p).shape == (2, 3)

    def test_negative_entry_location(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1,2\n3,-1\n")
        with pytest.raises(NegativeEntry, match=r"\(1, 1\)"):
            read_matrix(p)

    def test_negative_allowed_for_signed_outputs(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1,-2\n")
        assert read_matrix(p, allow_negative=True)[0, 1] == -2

    def test_bad_cell_line_and_column(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1,2\n3,x\n")
        with pytest.raises(ParseError) as exc:
            read_matrix(p)
        assert (exc.value.line, exc.value.column) == (2, 2)

    def test_ragged(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1,2\n3\n")
        with pytest.raises(ParseError) as exc:
            read_matrix(p)
        assert exc.value.line == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            read_matrix(tmp_path / "none.csv")

    def test_full_precision_round_trip(self, tmp_path, rng):
        A = rng.uniform(0, 1, (5, 4)) * np.logspace(-300, 300, 4)
        p = tmp_path / "m.csv"
        write_matrix(p, A)
        np.testing.assert_array_equal(read_matrix(p), A)
        assert float(format_float(np.pi)) == np.pi

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        write_matrix(tmp_path / "m.csv", np.ones((2, 2)))
        assert [p.name for p in tmp_path.iterdir()] == ["m.csv"]

    def test_labels_round_trip(self, tmp_path):
        write_labels(tmp_path / "l.csv", [0, 1, 1, 3])
        np.testing.assert_array_equal(read_labels(tmp_path / "l.csv"), [0, 1, 1, 3])


class TestMTX:
    def test_documented_example(self, tmp_path):
        p = tmp_path / "a.mtx"
        p.write_text(MTX_HEADER + "% comment\n3 3 2\n1 1 5\n3 2 7\n")
        A = read_matrix(p)
        expected = np.zeros((3, 3))
        expected[0, 0], expected[2, 1] = 5, 7
        np.testing.assert_array_equal(A, expected)

    def test_duplicates_add(self, tmp_path):
        p = tmp_path / "a.mtx"
        p.write_text(MTX_HEADER + "2 2 2\n1 2 1\n1 2 2\n")
        assert read_matrix(p)[0, 1] == 3

    @pytest.mark.parametrize(
        "body, line",
        [
            ("3 3\n", 2),
            ("2 2 1\n3 1 5\n", 3),
            ("2 2 1\n1 x 5\n", 3),
            ("2 2 2\n1 1 5\n", 3),
        ],
    )
    def test_errors_carry_line(self, tmp_path, body, line):
        p = tmp_path / "a.mtx"
        p.write_text(MTX_HEADER + body)
        with pytest.raises(ParseError) as exc:
            read_matrix(p)
        assert exc.value.line == line

    @pytest.mark.parametrize("header", ["%%MatrixMarket matrix array real general\n",
                                        "%%MatrixMarket matrix coordinate complex general\n",
                                        "%%MatrixMarket matrix coordinate real symmetric\n", "1 1 1\n"])
    def test_unsupported_header(self, tmp_path, header):
        p = tmp_path / "a.mtx"
        p.write_text(header + "1 1 1\n1 1 1\n")
        with pytest.raises(ParseError):
            read_matrix(p)

    def test_negative_rejected(self, tmp_path):
        p = tmp_path / "a.mtx"
        p.write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n2 1 -3.5\n")
        with pytest.raises(NegativeEntry, match=r"\(1, 0\)"):
            read_matrix(p)


@pytest.fixture(scope="module")
def fitted():
    sim = make_planted(8, 2, 12, 10, 1, noise=0.1, seed=2)
    cfg = TrainConfig(rank=2, alpha=0.5, seed=3)
    model, report = fit(sim.X, sim.Y, LikelihoodSpec.gaussian(), cfg)
    return model, report, cfg


class TestModelDirectory:
    def test_round_trip_exact(self, tmp_path, fitted):
        model, report, cfg = fitted
        write_model(model, report, tmp_path, LikelihoodSpec.gaussian(), cfg)
        back = read_model(tmp_path)
        for name in ("W", "HX", "HY"):
            assert np.max(np.abs(getattr(back, name) - getattr(model, name))) <= 1e-15

    def test_manifest_fields(self, tmp_path, fitted):
        model, report, cfg = fitted
        write_model(model, report, tmp_path, LikelihoodSpec.zinb(4.0, 0.2), cfg)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert list(manifest)[:10] == ["K", "M", "N_X", "N_Y", "alpha", "likelihood", "theta", "pi", "seed", "tol"]
        assert manifest["termination"] == report.termination.value
        assert manifest["iterations"] == len(manifest["objective_trace"]) == report.iterations_run
        assert (manifest["likelihood"], manifest["theta"], manifest["pi"]) == ("zinb", 4.0, 0.2)

    def test_converged_run_recorded(self, tmp_path, fitted):
        model, report, cfg = fitted
        assert report.termination.value == "Converged"
        write_model(model, report, tmp_path, LikelihoodSpec.gaussian(), cfg)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["termination"] == "Converged"
        assert manifest["objective_trace"] == report.objective_trace

    def test_manifest_mismatch(self, tmp_path, fitted):
        model, report, cfg = fitted
        write_model(model, report, tmp_path, LikelihoodSpec.gaussian(), cfg)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        manifest["K"] = 3
        (tmp_path / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(ManifestMismatch):
            read_model(tmp_path)

    def test_rewrite_is_byte_identical(self, tmp_path, fitted):
        model, report, cfg = fitted
        write_model(model, report, tmp_path / "a", LikelihoodSpec.gaussian(), cfg)
        write_model(model, report, tmp_path / "b", LikelihoodSpec.gaussian(), cfg)
        for name in ("W.csv", "HX.csv", "HY.csv", "manifest.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
