#!/usr/bin/env python3
"""End-to-end run of the tetflat CLI: synth -> flatten -> resample -> metrics.

usage: cli_end_to_end.py <tetflat> <scratch dir> <schemas dir>
"""
import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema
import numpy as np

CLI, SCRATCH, SCHEMAS = sys.argv[1], pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])
failures = []


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def run(*args, expect=0):
    p = subprocess.run([CLI, "--threads", "2", *map(str, args)], capture_output=True, text=True)
    check(p.returncode == expect, f"{' '.join(map(str, args[:1]))} exits {expect} (got {p.returncode})")
    if p.returncode != expect:
        sys.stderr.write(p.stdout + p.stderr)
    return p


def load(path):
    with open(path) as f:
        return json.load(f)


def read_tetgen(stem):
    node = np.loadtxt(f"{stem}.node", skiprows=1)
    ele = np.loadtxt(f"{stem}.ele", skiprows=1, dtype=np.int64)
    return node[:, 1:4], ele[:, 1:5]


def read_raw_json(stem):
    h = load(f"{stem}.json")
    data = np.fromfile(f"{stem}.raw", dtype=np.float64)
    return h, data.reshape(h["dims"][::-1])  # [k, j, i]


manifest_schema = load(SCHEMAS / "manifest.schema.json")
report_schema = load(SCHEMAS / "report.schema.json")

shutil.rmtree(SCRATCH, ignore_errors=True)
SCRATCH.mkdir(parents=True)
slab = SCRATCH / "slab"

# -- synth -----------------------------------------------------------------
run("synth", "--kind", "slab", "--length", 40, "--width", 24, "--thickness", 8, "--bend", 1.2,
    "--nx", 8, "--ny", 5, "--nz", 2, "--out", slab)
check(pathlib.Path(f"{slab}.node").exists() and pathlib.Path(f"{slab}.ele").exists(), "synth writes a TetGen pair")

# -- flatten ---------------------------------------------------------------
flat = SCRATCH / "flat"
run("flatten", "--mesh", f"{slab}.node", "--margin-mm", 5, "--out", flat)
m = load(f"{flat}.manifest.json")
jsonschema.validate(m, manifest_schema)
check(m["exit_code"] == 0 and m["subcommand"] == "flatten", "flatten manifest records success")
check(m["config"].get("lambda") == 1.0, "flatten manifest records the default lambda")
check(len(m["inputs"]) == 2 and all(len(i["sha256"]) == 64 for i in m["inputs"]), "manifest hashes both mesh files")
r = load(f"{flat}.json")
check(r["converged"] is True, "flatten converged")
check(r["dirichlet_excess_percent"] >= 0, "flatten reports a non-negative excess")

# -- resample a ramp ---------------------------------------------------------
z, tets = read_tetgen(f"{flat}_z")
x, tets_x = read_tetgen(f"{flat}_x")
check(np.array_equal(tets, tets_x), "original and template meshes share connectivity")
lo, hi = z.min(axis=0) - 3.0, z.max(axis=0) + 3.0
spacing = 1.5
dims = [int(np.ceil((hi[a] - lo[a]) / spacing)) + 1 for a in range(3)]
kk, jj, ii = np.meshgrid(*[np.arange(d) for d in dims[::-1]], indexing="ij")
ramp = lo[2] + spacing * kk  # the world z coordinate
vol = SCRATCH / "ramp"
ramp.astype(np.float64).tofile(f"{vol}.raw")
with open(f"{vol}.json", "w") as f:
    json.dump({"dims": dims, "spacing": [spacing] * 3, "origin": lo.tolist(), "dtype": "float64"}, f)
res = SCRATCH / "pulled"
run("resample", "--volume", f"{vol}.raw", "--mesh-z", f"{flat}_z.node", "--mesh-x", f"{flat}_x.node",
    "--spacing", 1.0, "--out", f"{res}.raw")
h, out = read_raw_json(res)
check(h.get("metadata", {}).get("fill_value") == "nan", "outside voxels are NaN-filled")
finite = np.argwhere(np.isfinite(out))
check(len(finite) > 100, f"{len(finite)} voxels land inside the mesh")

# Independent recomputation: locate each sampled voxel by brute force in the
# template mesh and carry its barycentric weights over to the original mesh.
org, sp = np.array(h["origin"]), np.array(h["spacing"])
xt = x[tets]  # [T, 4, 3]
a = np.concatenate([np.transpose(xt, (0, 2, 1)), np.ones((len(tets), 1, 4))], axis=1)
inv = np.linalg.inv(a)
worst, checked = 0.0, 0
for k, j, i in finite[:: max(1, len(finite) // 400)]:
    p = org + sp * np.array([i, j, k])
    w = inv @ np.append(p, 1.0)
    inside = np.nonzero(w.min(axis=1) > 1e-9)[0]
    if len(inside) == 0:
        continue  # on a face or edge; the tie-break is the tool's business
    t = inside[0]
    expect = w[t] @ z[tets[t], 2]
    worst = max(worst, abs(out[k, j, i] - expect))
    checked += 1
check(checked > 50, f"{checked} voxels recomputed independently")
check(worst < 1e-6, f"ramp pull-back matches barycentric transport (max err {worst:.2e} mm)")

# -- metrics -----------------------------------------------------------------
rep = SCRATCH / "report"
args = ("metrics", "--mesh-z", f"{flat}_z.node", "--mesh-x", f"{flat}_x.node", "--parcellation", f"{flat}.json")
run(*args, "--out", rep)
report = load(f"{rep}.json")
jsonschema.validate(report, report_schema)
check(True, "metrics report validates against the schema")
check(report["template_rms_voxels"] is not None, "report carries the template rms with a parcellation")
check(abs(report["dirichlet_excess_percent"] - r["dirichlet_excess_percent"]) < 1e-9,
      "report excess equals the flatten result")
rep2 = SCRATCH / "report_again"
run(*args, "--out", rep2)
for suffix in (".json", "_tets.csv", "_triangles.csv", "_edges.csv", "_profiles.csv"):
    same = pathlib.Path(f"{rep}{suffix}").read_bytes() == pathlib.Path(f"{rep2}{suffix}").read_bytes()
    check(same, f"metrics{suffix} is byte-identical across runs")

# -- failures ------------------------------------------------------------------
missing = SCRATCH / "nope.node"
p = run("flatten", "--mesh", missing, "--out", SCRATCH / "bad", expect=3)
check(str(missing) in p.stderr, "data error names the missing path")
run("flatten", "--out", SCRATCH / "bad2", expect=2)
run("flatten", "--mesh", f"{slab}.node", "--lambda", "-1", "--out", SCRATCH / "bad3", expect=2)

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
