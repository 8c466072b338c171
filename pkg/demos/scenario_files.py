"""Drive the command-line front end from Python: build a scenario,
run it, and read back the manifest.

    python demos/scenario_files.py /tmp/bazykin-demo
"""

import json
import sys

from bazykin.cli import run_scenario
from bazykin.cli.config import default_scenario, resolve

out = sys.argv[1] if len(sys.argv) > 1 else "demo-out"
sc = default_scenario("turing-curve")
sc["options"] = {"delta_range": [0.13, 0.138], "n": 9, "modes": [14, 16]}
code, summary = run_scenario(resolve(sc), out)
print("exit", code, summary)
man = json.load(open(f"{out}/manifest.json"))
for a in man["artifacts"]:
    print(f"{a['path']:20s} {a['bytes']:6d} bytes  {a['sha256'][:12]}")
