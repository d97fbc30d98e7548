"""
The command-line tool
=====================

Train, mesh, and score through ``ifsdf``, then replay the run from its
manifest. Every step writes plain files: XYZ in, OBJ/PLY out, CSV logs,
key=value manifests and reports.
"""
import subprocess
import sys
import tempfile
from pathlib import Path

from ifsdf.io import write_xyz
from ifsdf.shapes import sphere_points


def ifsdf(*args):
    cmd = [sys.executable, "-m", "ifsdf.cli", *map(str, args)]
    print("$ ifsdf", " ".join(map(str, args)))
    res = subprocess.run(cmd, capture_output=True, text=True)
    print(res.stdout + res.stderr, end="")
    return res.returncode


work = Path(tempfile.mkdtemp())
write_xyz(sphere_points(2000, 0.4, seed=0), work / "sphere.xyz")
(work / "run.cfg").write_text("sigma_n_deg=15\nalpha3=10\niterations=500\n")

ifsdf("train", work / "sphere.xyz", "--config", work / "run.cfg", "--out", work / "run", "--deterministic")
print((work / "run" / "manifest.txt").read_text().splitlines()[:6])
ifsdf("reconstruct", work / "run" / "model.ckpt", work / "sphere.obj", "--resolution", 128)
ifsdf("eval", work / "sphere.obj", work / "sphere.xyz", "--samples", 20000)

# Replaying the manifest reproduces the checkpoint byte for byte.
ifsdf("replay", work / "run" / "manifest.txt", work / "again")
same = (work / "run" / "model.ckpt").read_bytes() == (work / "again" / "model.ckpt").read_bytes()
print("replay identical:", same)

# A bad config is a usage error (exit code 2).
(work / "bad.cfg").write_text("alpha3=-1\n")
print("exit code:", ifsdf("train", work / "sphere.xyz", "--config", work / "bad.cfg", "--out", work / "x"))
