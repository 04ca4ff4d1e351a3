#!/usr/bin/env python3
"""Dump phi(s) and mu(s) curves plus the profile constants for a few models.

Writes one CSV per model into --out (plot with any external tool); prints the
profile constants to stdout.
"""
import argparse
import csv
import math
import os

import numpy as np

from kinetic_brw import spectral

MODELS = {
    "power_uniform_boundary": spectral.PowerUniform(2, 1.0 + math.sqrt(2.0)),
    "deterministic_0.3": spectral.Deterministic((0.3, 0.3)),
    "kac_angle": spectral.KacAngle(),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/spectral")
    ap.add_argument("--s-max", type=float, default=4.0)
    ap.add_argument("--points", type=int, default=401)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    for name, model in MODELS.items():
        prof = spectral.find_gamma_star(model)
        print(f"{name}: gamma*={prof.gamma_star:.12g} phi={prof.phi_at:.12g} "
              f"mu={prof.mu_at:.12g} phi''={prof.phi_second_at:.12g} c={prof.c_gamma:.12g}")
        path = os.path.join(args.out, f"{name}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "phi", "mu"])
            for s in np.linspace(0.0, args.s_max, args.points):
                ph = spectral.phi_value(model, float(s))
                w.writerow([repr(float(s)), repr(ph), repr(ph / s if s > 0 else math.nan)])
        print(f"  wrote {path}")


if __name__ == "__main__":
    main()
