"""
The command line front end, driven in-process.

Everything the CLI does is also reachable through the library; the CLI
exists for experiment sweeps from shell scripts.  This demo writes a small
experiment config, runs it, regenerates its evidence files, and merges two
result CSVs into one table.  Exit codes: 0 success, 1 data or runtime
failure, 2 usage or config error.  EVT_THREADS caps the BLAS pools and
must be set before numpy is imported, which is why the real entry point
delays its heavy imports.

    python3 demos/05_cli_workflow.py
"""

import os
import sys
import tempfile
import textwrap

sys.stdout.reconfigure(line_buffering=True)  # keep stderr interleaved when piped
os.environ.setdefault("EVT_THREADS", "2")  # honoured by `evt` on startup

from evt import cli

workdir = tempfile.mkdtemp(prefix="evt_demo_")
config_path = os.path.join(workdir, "exp.ini")
with open(config_path, "w") as fh:
    fh.write(textwrap.dedent("""\
        [dataset]
        kind = synthetic
        clusters = 3
        per_cluster = 100
        dim = 6
        distance = 6
        sigma = 1.0
        seed = 1

        [arch]
        hidden = 16
        bottleneck = 3

        [train]
        lambda = 0.1
        pretrain_epochs = 200
        evidence_iters = 30
        transfer_epochs = 40
        batch_size = 64
        seed = 0

        [evidence]
        sources = mod:3
        """))
print(f"wrote {config_path}\n")

# run the experiment; --out collects report.csv, report.txt, model.evtk
out_a = os.path.join(workdir, "seed0")
code = cli.main(["run", "--config", config_path, "--out", out_a])
print(f"\n`evt run` exit code: {code}")
print("files:", sorted(os.listdir(out_a)))

# a second run with another seed, quietly
out_b = os.path.join(workdir, "seed1")
cli.main(["run", "--config", config_path, "--out", out_b,
          "--seed", "1", "--quiet"])

# the evidence files a run would construct, without training
ev_dir = os.path.join(workdir, "evidence")
print()
cli.main(["gen-evidence", "--config", config_path, "--out", ev_dir])

# merge both runs into one table
print()
code = cli.main(["report", os.path.join(out_a, "report.csv"),
                 os.path.join(out_b, "report.csv")])
print(f"`evt report` exit code: {code}")

# config mistakes are caught before any training starts
broken = os.path.join(workdir, "broken.ini")
with open(broken, "w") as fh:
    fh.write("[dataset]\nkind = digits\n[train]\nmomentum = 0.9\n")
code = cli.main(["run", "--config", broken])
print(f"\nmisspelled key exit code: {code} (2 means config error)")
