"""Small helpers shared by the demo scripts."""

import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

OUT = Path(os.environ.get("IONLAB_DEMO_OUT", Path(__file__).with_name("out")))
# scale every Monte Carlo ensemble, e.g. IONLAB_DEMO_SCALE=0.1 for a quick look
SCALE = float(os.environ.get("IONLAB_DEMO_SCALE", "1"))


def n_seq(n):
    return max(1, int(round(n * SCALE)))


def save(fig, name):
    OUT.mkdir(parents=True, exist_ok=True)
    path = OUT / name
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    print(f"saved {path}")
