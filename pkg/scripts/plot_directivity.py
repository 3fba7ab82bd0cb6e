"""Plot a directivity CSV written by ``beamspot directivity``.

Usage: python scripts/plot_directivity.py curves.csv [out.png]
"""
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def main(argv):
    if not 1 <= len(argv) <= 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    with open(argv[0], newline="") as fh:
        rows = list(csv.DictReader(fh))
    theta = np.array([float(r["theta_deg"]) for r in rows])
    fig, ax = plt.subplots(figsize=(7, 4))
    for column, label in (("signal_db", "signal"), ("distortion3_db", "3rd-order distortion")):
        ax.plot(theta, [float(r[column]) for r in rows], label=label)
    ax.set_xlabel("angle from array axis [deg]")
    ax.set_ylabel("directivity [dB]")
    ax.set_xlim(theta.min(), theta.max())
    ax.set_ylim(bottom=-30)
    ax.grid(alpha=0.3)
    ax.legend()
    out = argv[1] if len(argv) == 2 else argv[0].rsplit(".", 1)[0] + ".png"
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
