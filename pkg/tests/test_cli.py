"""Scene serialization round trips and the command-line entry points."""

import json
import subprocess
import sys

import numpy as np

from superchern.dk import DKCocycle, curvature_class
from superchern.forms import Grading, TorusChart, sup_norm
from superchern.scenes import random_omega, random_superconnection
from superchern.serialize import (
    cocycle_from_dict,
    cocycle_to_dict,
    decode_array,
    encode_array,
    form_from_dict,
    form_to_dict,
    load_scene,
    save_scene,
    superconnection_from_dict,
    superconnection_to_dict,
)
from superchern.superconn import Superconnection

CH1 = TorusChart(1, 16)
CH2 = TorusChart(2, 16)
G11 = Grading.balanced(1, 1)


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "superchern.cli", *args],
        capture_output=True,
        text=True,
        timeout=600,
    )


class TestSerialization:
    def test_array_roundtrip(self, rng):
        arr = rng.standard_normal((3, 4, 2)) + 1j * rng.standard_normal((3, 4, 2))
        for enc in ("b64", "lists"):
            back = decode_array(encode_array(arr, enc))
            assert np.allclose(back, arr)

    def test_fourier_expansion(self):
        chart = TorusChart(1, 16)
        payload = {
            "enc": "fourier",
            "shape": [1, 1],
            "modes": [
                {"k": [1], "re": [[0.0]], "im": [[-0.5]]},
                {"k": [-1], "re": [[0.0]], "im": [[0.5]]},
            ],
        }
        field = decode_array(payload, chart)
        x = chart.coordinate(0)
        assert np.allclose(field[..., 0, 0], np.sin(2 * np.pi * x))

    def test_form_roundtrip(self, rng):
        from superchern.scenes import random_scalar_form

        form = random_scalar_form(rng, CH2, {0, 1, 2}, 1.0)
        back = form_from_dict(form_to_dict(form))
        assert sup_norm(back - form) < 1e-14

    def test_superconnection_roundtrip(self, rng):
        a = random_superconnection(rng, CH2, G11)
        back = superconnection_from_dict(superconnection_to_dict(a))
        assert sup_norm(back.coeff - a.coeff) < 1e-14
        assert back.grading == a.grading

    def test_affine_roundtrip(self):
        from superchern.scenes import dirac_twist_superconnection

        a = dirac_twist_superconnection(CH1, 2, modes=2)
        back = superconnection_from_dict(superconnection_to_dict(a))
        assert sup_norm(back.coeff - a.coeff) < 1e-14
        assert set(back.affine) == {0}
        assert np.allclose(back.affine[0], a.affine[0])

    def test_cocycle_roundtrip(self, rng, tmp_path):
        c = DKCocycle(
            random_superconnection(rng, CH1, G11), random_omega(rng, CH1)
        )
        path = tmp_path / "cocycle.json"
        save_scene(path, cocycle_to_dict(c))
        back = cocycle_from_dict(load_scene(path))
        assert sup_norm(back.A.coeff - c.A.coeff) < 1e-14
        assert sup_norm(back.omega - c.omega) < 1e-14


class TestCLI:
    def test_verify_pass_and_determinism(self, tmp_path):
        out1 = tmp_path / "r1.json"
        out2 = tmp_path / "r2.json"
        r1 = run_cli("verify", "spectral-lemmas", "--out", str(out1))
        r2 = run_cli("verify", "spectral-lemmas", "--out", str(out2))
        assert r1.returncode == 0 and r2.returncode == 0
        d1 = json.loads(out1.read_text())
        d2 = json.loads(out2.read_text())
        assert d1["schema"] == 1
        assert d1["content_hash"] == d2["content_hash"]
        assert d1["passed"]
        assert all("anchor" in rec for rec in d1["records"])

    def test_verify_zero_tolerance_fails(self):
        res = run_cli("verify", "spectral-lemmas", "--tol", "0")
        assert res.returncode == 1

    def test_unknown_suite_is_input_error(self):
        res = run_cli("verify", "no-such-suite")
        assert res.returncode == 2

    def test_csv_output(self, tmp_path):
        out = tmp_path / "r.csv"
        res = run_cli("verify", "spectral-lemmas", "--format", "csv", "--out", str(out))
        assert res.returncode == 0
        header = out.read_text().splitlines()[0]
        assert header.startswith("name,anchor,residual")

    def test_spectral_table(self, tmp_path):
        out = tmp_path / "table.csv"
        res = run_cli("spectral", "table", "--cutoffs", "8,16", "--out", str(out))
        assert res.returncode == 0
        lines = out.read_text().splitlines()
        assert lines[0].split(",")[:2] == ["table", "N"]
        assert len(lines) > 10

    def test_dk_apply_chain(self, tmp_path, rng):
        from superchern.scenes import gapped_superconnection
        from superchern.serialize import encode_array

        c = DKCocycle(
            gapped_superconnection(rng, CH1, gap=1.0, wiggle=0.1, phase_amp=0.3, amp1=0.3),
            random_omega(rng, CH1, 0.4, 1),
        )
        scene = tmp_path / "c.json"
        save_scene(scene, cocycle_to_dict(c))
        chain = tmp_path / "chain.json"
        save_scene(
            chain,
            {
                "type": "relation_chain",
                "ops": [{"op": "collapse", "tol": 1e-10}],
            },
        )
        out = tmp_path / "out.json"
        res = run_cli(
            "dk",
            "apply-chain",
            "--cocycle",
            str(scene),
            "--chain",
            str(chain),
            "--out",
            str(out),
        )
        assert res.returncode == 0, res.stderr
        result = cocycle_from_dict(load_scene(out))
        assert result.rank == 0
        assert (
            sup_norm(curvature_class(result) - curvature_class(c)) < 1e-8
        )

    def test_relative_index_cli(self, tmp_path):
        chart = TorusChart(2, 128)
        x, y = chart.coordinate(0), chart.coordinate(1)
        q = np.exp(2j * np.pi * x) + np.exp(2j * np.pi * y) - 1.0
        t0 = np.zeros(chart.shape + (2, 2), dtype=complex)
        t0[..., 1, 0] = q
        t0[..., 0, 1] = np.conj(q)
        a = Superconnection.from_terms(chart, G11, t0)
        scene = tmp_path / "scene.json"
        save_scene(
            scene,
            {
                "type": "superconnection_scene",
                "superconnection": superconnection_to_dict(a),
                "oracle_boxes": [
                    {"center": [1 / 6, 5 / 6], "radius": 0.23},
                    {"center": [5 / 6, 1 / 6], "radius": 0.23},
                ],
            },
        )
        sets = tmp_path / "sets.json"
        save_scene(
            sets,
            {
                "type": "open_set",
                "kind": "complement",
                "boxes": [
                    {"center": [1 / 6, 5 / 6], "core": 0.10, "support": 0.26},
                    {"center": [5 / 6, 1 / 6], "core": 0.10, "support": 0.26},
                ],
            },
        )
        out = tmp_path / "chi.json"
        res = run_cli(
            "relative",
            "index",
            "--scene",
            str(scene),
            "--open-set",
            str(sets),
            "--c-frac",
            "0.75",
            "--alpha",
            "6.0",
            "--out",
            str(out),
        )
        assert res.returncode == 0, res.stderr
        rep = load_scene(out)
        assert rep["core_sup"] < 1e-3  # coarse grid for CLI speed
        assert len(rep["oracle_boxes"]) == 2
        windings = [b["winding"] for b in rep["oracle_boxes"]]
        assert sorted(windings) == [-1, 1]

    def test_scene_parse_failure(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        res = run_cli("dk", "apply-chain", "--cocycle", str(bad), "--chain", str(bad))
        assert res.returncode == 2
