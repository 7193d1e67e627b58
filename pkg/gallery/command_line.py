"""
The staged command line
=======================

Every stage reads and writes plain files under one output directory, so
runs can be resumed or inspected between steps.  The same calls work from
a shell as ``netpart <stage> ...``.
"""

import json
import os
import tempfile

from netpart import synth
from netpart.cli import main

out = tempfile.mkdtemp()
scenario = os.path.join(out, "scenario.json")
with open(scenario, "w") as fh:
    json.dump(synth.SynthScenario(rows=5, cols=5, region_count=4, seed=2).to_json(), fh)

main(["synth", "--scenario", scenario, "--out", out])
common = ["--records", os.path.join(out, "records.csv"), "--edges", os.path.join(out, "edges.csv"), "--out", out]
main(["encode", *common, "--paa", "72"])
main(["train", "--out", out, "--epochs", "20"])
main(["features", "--out", out])
for method in ("ae-hier", "spectral"):
    main(["partition", *common, "--method", method, "--k", "2..6"])
main(["evaluate", *common])

for root, _, files in sorted(os.walk(out)):
    if "gaf" in root:
        continue
    for name in sorted(files):
        print(os.path.relpath(os.path.join(root, name), out))
print(open(os.path.join(out, "comparison.csv")).read())
