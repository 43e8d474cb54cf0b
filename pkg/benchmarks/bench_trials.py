"""Per-trial wall time for each mode and chain at the default scenario."""
import argparse
import time

from cfisac import harness
from cfisac.scenario import MODES, ScenarioConfig


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    for mode in MODES:
        cfg = ScenarioConfig().with_mode(mode)
        for chains in (("comm",), ("radar",), ("comm", "radar")):
            harness.run_trials(cfg, 1, chains=chains)  # warm the waveform cache
            t0 = time.perf_counter()
            harness.run_trials(cfg, args.trials, workers=args.workers, chains=chains)
            dt = (time.perf_counter() - t0) / args.trials
            print("%-6s %-12s %8.2f ms/trial" % (mode, "+".join(chains), 1e3 * dt))


if __name__ == "__main__":
    main()
