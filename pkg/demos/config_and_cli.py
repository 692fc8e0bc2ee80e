"""
Configuration files and the command line
========================================

Every analysis is described by a JSON document.  Built-in fixtures can be
written out, edited and run again through the ``gainphase`` command; the
same steps are available from Python through ``gainphase.cli.main``.
"""

import json
import os
import tempfile

from gainphase import cli
from gainphase.config import build_network, load_config
from gainphase.fixtures import fixture

work = tempfile.mkdtemp(prefix="gainphase_demo_")
path = os.path.join(work, "example3.json")

# gainphase fixtures --name example3 --emit example3.json
cli.main(["fixtures", "--name", "example3", "--emit", path])
doc = json.load(open(path))
print("devices:", [(d["id"], d["params"]["pll_bw"]) for d in doc["devices"]])

# Edit the document: slower PLL on converter 3.
doc["devices"][2]["params"]["pll_bw"] = 40.0
json.dump(doc, open(path, "w"), indent=2)

# gainphase analyze --config example3.json --out <dir>
out = os.path.join(work, "out")
code = cli.main(["analyze", "--config", path, "--out", out])
print("exit code:", code, "(0 certified, 2 not certified, 1 error)")
print("files:", sorted(os.listdir(out)))

# gainphase gscr / gainphase oracle
cli.main(["gscr", "--config", path])
cli.main(["oracle", "--config", path, "--out", out])

# The 68-bus fixture loads, but loads and line charging must be filled in.
cfg = fixture("bus68-partial")
net = build_network(cfg)
print("68-bus: %d nodes, %d device nodes, %d lines, %d placeholder entries"
      % (net.M, net.N, len(net.branches), len(cfg.meta["skipped_branches"])))
print("still to supply:", ", ".join(cfg.meta["user_supplied"]))

# Malformed input is reported with the offending field.
bad = dict(doc)
bad["network"] = dict(doc["network"], branches=[{"kind": "RL", "from": 1, "to": 4}])
json.dump(bad, open(path, "w"))
print("exit code for a line without susceptance:", cli.main(["gscr", "--config", path]))
