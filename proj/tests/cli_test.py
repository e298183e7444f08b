"""End-to-end checks of the flab binary: exit codes, schemas, determinism."""

import json
import os
import pathlib
import subprocess
import sys
import tempfile
import unittest

import jsonschema
import referencing

FLAB = sys.argv.pop(1)
ROOT = pathlib.Path(sys.argv.pop(1))
SCHEMAS = {p.stem: json.loads(p.read_text()) for p in (ROOT / "schemas").glob("*.json")}
REGISTRY = referencing.Registry().with_resources(
    (s["$id"], referencing.Resource.from_contents(s)) for s in SCHEMAS.values()
)


def run(*args, env=None):
    e = dict(os.environ)
    e.update(env or {})
    return subprocess.run([FLAB, *args], capture_output=True, text=True, env=e)


def validate(doc, schema):
    jsonschema.Draft202012Validator(SCHEMAS[schema], registry=REGISTRY).validate(doc)


class Check(unittest.TestCase):
    def test_pass_report_is_schema_valid(self):
        r = run("check", "cross_engine", "--metric", "fubini_study", "--n", "2", "--samples", "10")
        self.assertEqual(r.returncode, 0, r.stderr)
        doc = json.loads(r.stdout)
        validate(doc, "report.schema")
        self.assertEqual(doc["status"], "pass")

    def test_exit_codes(self):
        self.assertEqual(run("check", "kahler", "--metric", "hermitian_nonkahler", "--samples", "20").returncode, 1)
        self.assertEqual(run("check", "cross_engine", "--metric", "hermitian_nonkahler", "--samples", "10").returncode, 2)
        r = run("compare", "diameter", "--metric", "euclidean", "--lambda", "0")
        self.assertEqual(r.returncode, 3)
        self.assertIn("λ must be positive", r.stderr)
        self.assertEqual(run("check", "nope", "--metric", "euclidean").returncode, 3)
        self.assertEqual(run("check", "kahler", "--metric", "no_such_metric").returncode, 3)

    def test_byte_identical_across_runs_and_threads(self):
        args = ("check", "j_invariance", "--metric", "complex_minkowski_quartic", "--samples", "30", "--seed", "5")
        a = run(*args, env={"FLAB_THREADS": "1"})
        b = run(*args, env={"FLAB_THREADS": "3"})
        c = run(*args)
        self.assertEqual(a.stdout, b.stdout)
        self.assertEqual(a.stdout, c.stdout)

    def test_out_file_and_csv(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "r.csv")
            r = run("check", "parallelism", "--metric", "complex_hyperbolic", "--samples", "5", "--out", path,
                    "--format", "csv")
            self.assertEqual(r.returncode, 0, r.stderr)
            lines = pathlib.Path(path).read_text().splitlines()
            self.assertEqual(lines[0], "check,kind,count,max,mean,tolerance,pass")
            self.assertEqual(len(lines), 4)

    def test_metric_file(self):
        r = run("check", "homogeneity", "--metric", str(ROOT / "metrics" / "conformal_flat.json"), "--samples", "5")
        self.assertEqual(r.returncode, 0, r.stderr)
        for p in (ROOT / "metrics").glob("*.json"):
            validate(json.loads(p.read_text()), "metric.schema")


class Compare(unittest.TestCase):
    def test_laplacian_csv_rows(self):
        r = run("compare", "laplacian", "--metric", "euclidean", "--n", "2", "--lambda", "0", "--directions", "2",
                "--radii", "0.5:1.5:3", "--format", "csv")
        self.assertEqual(r.returncode, 0, r.stderr)
        lines = r.stdout.splitlines()
        self.assertTrue(lines[0].startswith("direction,r,box_perp,"))
        self.assertEqual(len(lines), 1 + 2 * 3)

    def test_laplacian_json_and_plotdata(self):
        r = run("compare", "laplacian", "--metric", "fubini_study", "--n", "2", "--lambda", "1", "--directions", "1",
                "--radii", "0.4:1.2:3")
        self.assertEqual(r.returncode, 0, r.stderr)
        validate(json.loads(r.stdout), "report.schema")
        p = run("compare", "laplacian", "--metric", "fubini_study", "--n", "2", "--lambda", "1", "--directions", "1",
                "--radii", "0.5:1.6:3", "--format", "plotdata")
        self.assertIn("# hvv_bound", p.stdout)
        self.assertIn("# pole at 1.6", p.stdout)

    def test_hypothesis_unverified(self):
        r = run("compare", "laplacian", "--metric", "fubini_study", "--n", "2", "--lambda", "3", "--directions", "1",
                "--radii", "0.3:0.6:2")
        self.assertEqual(r.returncode, 2)
        self.assertEqual(json.loads(r.stdout)["status"], "hypothesis_unverified")

    def test_volume_small_budget(self):
        r = run("compare", "volume", "--metric", "euclidean", "--n", "1", "--lambda", "0", "--samples", "2500",
                "--radii", "0.5:1:2")
        self.assertEqual(r.returncode, 0, r.stderr)
        doc = json.loads(r.stdout)
        validate(doc, "report.schema")
        self.assertEqual(doc["table"]["columns"][0], "r")


class Geodesic(unittest.TestCase):
    def test_json_and_csv(self):
        r = run("geodesic", "--metric", "fubini_study", "--n", "1", "--from", "[0,0]", "--dir", "[1,0]", "--len", "0.5",
                "--format", "json")
        self.assertEqual(r.returncode, 0, r.stderr)
        doc = json.loads(r.stdout)
        validate(doc, "geodesic.schema")
        self.assertAlmostEqual(doc["x_end"][0], 0.5463024898437905, places=8)
        c = run("geodesic", "--metric", "euclidean", "--n", "1", "--from", "[0,0]", "--dir", "[0.6,0.8]", "--len", "1")
        self.assertEqual(c.stdout.splitlines()[0], "t,x1,x2,xdot1,xdot2")

    def test_unit_speed_required(self):
        args = ("geodesic", "--metric", "euclidean", "--n", "1", "--from", "[0,0]", "--dir", "[3,0]", "--len", "1")
        self.assertEqual(run(*args).returncode, 3)
        self.assertEqual(run(*args, "--normalize").returncode, 0)


class Tensors(unittest.TestCase):
    def test_dump_is_schema_valid(self):
        r = run("tensors", "--metric", "fubini_study", "--n", "1", "--at", '{"z":[[0.1,0.2]],"v":[[1,0]]}')
        self.assertEqual(r.returncode, 0, r.stderr)
        doc = json.loads(r.stdout)
        validate(doc, "tensors.schema")
        self.assertAlmostEqual(doc["complex"]["holomorphic_curvature"], 4, places=9)
        real = run("tensors", "--metric", "fubini_study", "--n", "1", "--at", '{"x":[0.1,0.2],"y":[1,0]}')
        self.assertEqual(json.loads(real.stdout), doc)

    def test_bad_point(self):
        self.assertEqual(run("tensors", "--metric", "euclidean", "--n", "2", "--at", '{"x":[0],"y":[1]}').returncode, 3)


if __name__ == "__main__":
    unittest.main(verbosity=2)
