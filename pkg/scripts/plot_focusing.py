"""Plot both layers of a ``.bspt`` map written by ``beamspot focusing``.

Usage: python scripts/plot_focusing.py map.bspt [out.png]
"""
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from beamspot.gridsweep import read_bspt


def main(argv):
    if not 1 <= len(argv) <= 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    fmap = read_bspt(argv[0])
    extent = (fmap.x[0], fmap.x[-1], fmap.y[0], fmap.y[-1])
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5), sharey=True)
    for ax, name in zip(axes, ("signal", "distortion")):
        layer = fmap.layer(name)
        with np.errstate(divide="ignore", invalid="ignore"):
            db = 10 * np.log10(layer)
        img = ax.imshow(db, origin="lower", extent=extent, vmin=-20, vmax=20, cmap="viridis")
        ax.set_title(f"{name} focusing")
        ax.set_xlabel("x [m]")
        fig.colorbar(img, ax=ax, label="dB re cell mean")
    axes[0].set_ylabel("y [m]")
    out = argv[1] if len(argv) == 2 else argv[0].rsplit(".", 1)[0] + ".png"
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
