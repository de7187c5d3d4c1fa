"""
A single node tracking two targets
==================================

One image sensor, two targets moving side by side, and the particle
multi-Bernoulli track-before-detect filter. The last frame and the
estimated tracks are saved to ``demos/output/local_filter.svg``.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from gcimb.config import scenario1
from gcimb.mbfilter import LocalFilter, extract_estimates, initialize_tracks
from gcimb.metrics import ospa
from gcimb.tbd import generate_frame

cfg = scenario1(d_e=6)
truth = cfg.truth()
rng = np.random.default_rng(1)
filt = LocalFilter(cfg.sensor, cfg.motion, cfg.filter, rng)
mb = initialize_tracks(truth.at(0), cfg.filter, rng, cfg.sensor.dx)

track = []
for k in range(truth.n_steps):
    frame = generate_frame(truth.at(k), cfg.sensor, rng, k)
    mb = filt.step(mb, frame, first=(k == 0))
    est = extract_estimates(mb, cfg.filter)
    track.append(est)
    if k % 5 == 0:
        print(f"scan {k:2d}: r = {np.round(mb.existence, 3)}, OSPA {ospa(est[:, :2], truth.at(k)[:, :2]):.3f} m")

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)
fig, ax = plt.subplots(figsize=(5, 5))
ax.imshow(frame.intensities.T, origin="lower", cmap="gray")
for i in range(2):
    ax.plot(truth.states[:, i, 0], truth.states[:, i, 1], "g-", lw=1)
pts = np.vstack(track)
ax.plot(pts[:, 0], pts[:, 1], "r.", ms=3)
ax.set_title("last frame, truth (green) and estimates (red)")
fig.savefig(out / "local_filter.svg")
print("saved", out / "local_filter.svg")
