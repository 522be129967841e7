"""The whole pipeline in miniature: render a small digit corpus, run the
4-stage hybrid training, evaluate both views, and emit the map plots.

Uses a rendered stand-in corpus (DejaVu glyphs with jitter and noise) so the
demo runs anywhere; point --data-dir at the real IDX files via the CLI for
the full-scale version of the same workflow.
"""

import os
import tempfile

from trisim import cli, fixtures
from trisim.trainer import TrainConfig

OUT_DIR = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT_DIR, exist_ok=True)

data_dir = os.path.join(tempfile.gettempdir(), "trisim_demo_digits")
fixtures.write_idx_corpus(data_dir, train_per_class=60, test_per_class=15,
                          seed=1)
print(f"corpus at {data_dir} (600 train / 150 test rendered digits)")

run_dir = os.path.join(OUT_DIR, "pipeline_run")
config = TrainConfig(seed=0, tiny_epochs=60, large_iters=250)
manifest = cli.cmd_train("hybrid", config, data_dir, run_dir, dim=3, k=5)
print("stage seconds:", {k: round(v, 1)
                         for k, v in manifest["stage_seconds"].items()})
print("view-1 accuracy:", round(manifest["metrics"]["view1_accuracy"], 4))

cli.cmd_eval(manifest["checkpoint"], data_dir, view=2, k=5)

export = os.path.join(OUT_DIR, "unfolded.csv")
cli.cmd_export(manifest["checkpoint"], data_dir, "unfolded", export)
for path in cli.cmd_plot(export, "map", os.path.join(OUT_DIR, "digit_map.svg")):
    print(f"wrote {path}")

sphere = os.path.join(OUT_DIR, "sphere.csv")
cli.cmd_export(manifest["checkpoint"], data_dir, "sphere", sphere)
print(f"wrote {sphere}")
