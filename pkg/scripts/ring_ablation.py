"""Sweep the pruning ring size N on synthetic pairs and report mean metrics.

Usage::

    python3 scripts/ring_ablation.py --rings 0 1 2 3 --cases 5
"""

import json

from synthetic_benchmark import common_parser, config_from, make_cases, run_cases, summarise


def main():
    ap = common_parser(__doc__)
    ap.add_argument("--rings", type=int, nargs="+", default=[0, 1, 2, 3])
    ap.add_argument("--lambda", dest="lam", type=float, default=0.5)
    args = ap.parse_args()
    cases = make_cases(args.cases, args.seed, args.base_subdiv, args.prior_noise, args.feature_noise)
    for ring in args.rings:
        s = summarise(run_cases(cases, config_from(args, lam=args.lam, ring=ring)))
        print(json.dumps({"ring": ring, **s}))


if __name__ == "__main__":
    main()
