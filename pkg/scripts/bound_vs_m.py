"""Bound values against sample size for a trained model's S2 profile; prints CSV."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from mvpb import bounds as B
from mvpb.dataio import SynthConfig, synth_population
from mvpb.estimators import kl_budget
from mvpb.fusion import TrainConfig, train


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--separation", type=float, default=4.0)
    ap.add_argument("--noise", type=float, default=1.0)
    ap.add_argument("--m", type=int, default=300)
    ap.add_argument("--min-margin", type=float, default=0.5)
    ap.add_argument("--delta", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--xi-variant", action="store_true")
    args = ap.parse_args(argv)

    S = synth_population(SynthConfig(separation=args.separation, noise=args.noise, size=args.m, seed=args.seed))
    model = train(S, TrainConfig(seed=args.seed, min_margin=args.min_margin, delta=args.delta))
    kl = kl_budget(model.posterior, model.prior)
    print("m,empirical_gibbs,kl_total,mcallester,catoni,seeger,gibbs_upper,mv_factor2_upper,cbound_upper")
    for m in np.unique(np.geomspace(50, 100_000, 25).astype(int)):
        rep = B.full_report(B.BoundInputs(model.train_profile, kl, int(m), args.delta), xi_variant=args.xi_variant)
        it = rep.intermediates
        cb = "" if rep.cbound_upper is None else f"{rep.cbound_upper:.6f}"
        print(f"{m},{it['empirical_gibbs']:.6f},{kl.total:.6f},{it['mcallester']:.6f},{it['catoni']:.6f},"
              f"{it['seeger']:.6f},{rep.gibbs_upper:.6f},{rep.mv_factor2_upper:.6f},{cb}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
