"""
More sensors, smaller error
===========================

Three targets and a chain of one, two or three sensors. Each node fuses its
neighbours with Metropolis weights. In mode M2 the fused posterior is fed
back into the local filter for the next scan.
"""

from gcimb.cli import table1

runs = 10  # the acceptance run uses 50
table = table1(runs=runs, seed=0)
print(f"mean OSPA over nodes, scans and {runs} runs")
print(f"{'sensors':>8} {'1':>7} {'2':>7} {'3':>7}")
for mode in ("M1", "M2"):
    print(f"{mode:>8} " + " ".join(f"{table[mode, n]:7.4f}" for n in (1, 2, 3)))
