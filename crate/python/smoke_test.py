#!/usr/bin/env python3
"""Smoke test for the mindstate_py extension module.

Builds the cdylib (unless --no-build), loads it, and exercises the signal
pipeline, a classifier round trip, the evaluation formulas, and a streaming
session. Exits nonzero on the first failed check.
"""

import math
import random
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_extension() -> Path:
    if "--no-build" not in sys.argv:
        subprocess.run(
            ["cargo", "build", "--release", "-p", "mindstate-py"],
            cwd=ROOT,
            check=True,
        )
    release = ROOT / "target" / "release"
    for name in ("libmindstate_py.so", "libmindstate_py.dylib", "mindstate_py.dll"):
        built = release / name
        if built.is_file():
            stage = Path(tempfile.mkdtemp(prefix="mindstate_py_"))
            suffix = ".pyd" if name.endswith(".dll") else ".so"
            shutil.copy2(built, stage / f"mindstate_py{suffix}")
            return stage
    raise SystemExit(f"no built extension found under {release}")


sys.path.insert(0, str(build_extension()))
import mindstate_py  # noqa: E402

checks = 0


def check(name: str, condition: bool, detail: str = "") -> None:
    global checks
    if not condition:
        raise SystemExit(f"FAIL {name} {detail}")
    checks += 1
    print(f"ok {name}")


# evaluation formulas
ci = mindstate_py.confidence_interval(0.5, 1451)
check("confidence_interval", abs(ci - 0.02573) < 5e-6, f"got {ci}")
pot = mindstate_py.potential(0.749, 0.015)
check("potential", abs(pot - 49.9333) < 1e-3, f"got {pot}")

# signal pipeline: DC is removed, a bin-centered 10 Hz tone lands in alpha2
fs = 2048
dc = mindstate_py.high_pass([5.0] * fs, fs, 0.5)
check("high_pass_dc", max(abs(v) for v in dc) < 0.05)

tone = [math.sin(2 * math.pi * 10.0 * i / fs) for i in range(fs)]
frames = mindstate_py.frame_band_powers(tone, fs)
check("frame_count", len(frames) == 2, f"got {len(frames)}")
alpha2 = frames[0][3]
rest = max(v for b, v in enumerate(frames[0]) if b != 3)
check("alpha2_power", abs(alpha2 - 0.5) < 1e-9 and rest < 1e-12, f"alpha2={alpha2} rest={rest}")
check("band_table", "alpha2=10:11.75" in mindstate_py.default_band_table())

# three separable gaussian blobs in the band dimensions
rng = random.Random(42)
rows, labels = [], []
centers = [0.0, 5.0, 10.0]
for i in range(240):
    cls = i % 3
    row = [centers[cls] + rng.gauss(0.0, 0.1) for _ in range(8)] + [1.0, 0.0, 20.0]
    rows.append(row)
    labels.append(cls)

model = mindstate_py.Model.train("xgb", rows, labels, seed=42, epochs=20)
check("model_kind", model.kind == "xgb" and model.input_mode == "frame")
correct = sum(1 for r, l in zip(rows, labels) if model.predict(r)[0] == l)
check("train_accuracy", correct / len(rows) >= 0.99, f"{correct}/{len(rows)}")

idx, name, scores = model.predict(rows[0])
check("simplex_scores", abs(sum(scores) - 1.0) < 1e-9 and min(scores) >= 0.0)
check("label_names", name in ("engaged", "confused", "relaxed"))

# save / load round trip predicts identically
with tempfile.TemporaryDirectory() as td:
    path = str(Path(td) / "model.msm")
    model.save(path)
    loaded = mindstate_py.Model.load(path)
    for r in rows[:25]:
        check_row = model.predict(r)
        check_loaded = loaded.predict(r)
        if check_row != check_loaded:
            raise SystemExit(f"FAIL round_trip {check_row} != {check_loaded}")
check("save_load_round_trip", True)

# streaming: warm-up for 19 frames, then one decision per frame
stream = mindstate_py.Stream(model)
decisions = []
for i in range(25):
    out = stream.push(rows[i])
    if i < 19:
        check(f"warmup_{i}", out is None)
    elif out is not None:
        decisions.append(out)
check("decision_count", len(decisions) == 6, f"got {len(decisions)}")
check("first_decision_frame", decisions[0][0] == 19)
check("decision_latency", all(d[3] > 0.0 for d in decisions))

print(f"PASS: {checks} checks")
