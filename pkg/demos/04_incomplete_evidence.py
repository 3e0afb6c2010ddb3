"""
Incomplete evidence on the bundled digits: percent and class protocols.

Percent incompleteness keeps evidence for a uniform M = p * N subset;
class incompleteness deletes whole categories from an otherwise complete
source.  Transfer only trains on the evidenced rows, so both protocols
shrink the fine-tuning set; the question is how gracefully the gains
degrade.  Expect the percent sweep to be monotone and the class removals
to stay close to the complete run.

    python3 demos/04_incomplete_evidence.py     (about 40 seconds)
"""

import time

from evt.data import bundled_digits
from evt.pipeline import TrainConfig, pretrain_primary, run_experiment
from evt.report import render_table

ARCH = (128, 32, 10)
config = TrainConfig(evidence_weight=0.3, pretrain_epochs=500,
                     transfer_epochs=100, batch_size=256,
                     evidence_ae_iters=200, seed=0)

bundle = bundled_digits()
print(f"dataset: {bundle.n} digits, {bundle.dim} features")

t0 = time.perf_counter()
pretrained = pretrain_primary(bundle.features, [bundle.dim, *ARCH], config)
print(f"pretrain: {time.perf_counter() - t0:.0f}s")

reports = []

# part 1: hash-mod-4 evidence observed for 10%, 30%, all samples
for p in (0.1, 0.3, 1.0):
    out = run_experiment(bundle, [("hash", 4)], ("percent", p), config,
                         arch=ARCH, pretrained=pretrained)
    reports.append(out.report)
    print(f"hash:4 percent={p:<4g} ACC {out.report.post_acc:.4f} "
          f"({100 * out.report.acc_delta:+.2f})")

# part 2: label evidence with whole classes removed
for remove in ((), (9,), (8, 9)):
    protocol = ("classes", remove) if remove else ("none",)
    out = run_experiment(bundle, [("labels",)], protocol, config,
                         arch=ARCH, pretrained=pretrained)
    reports.append(out.report)
    shown = "complete" if not remove else f"minus {set(remove)}"
    print(f"labels {shown:12s} ACC {out.report.post_acc:.4f} "
          f"({100 * out.report.acc_delta:+.2f})")

print()
print(render_table(reports, title="digits: incomplete evidence protocols, k=10"))
