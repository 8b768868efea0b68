"""Sweep the overlap weight lambda on synthetic pairs and report mean metrics.

Usage::

    python3 scripts/lambda_ablation.py --lambdas 0 0.1 0.3 0.5 1.0 --cases 5
"""

import json

from synthetic_benchmark import common_parser, config_from, make_cases, run_cases, summarise


def main():
    ap = common_parser(__doc__)
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0.0, 0.1, 0.3, 0.5, 1.0])
    ap.add_argument("--ring", type=int, default=2)
    args = ap.parse_args()
    cases = make_cases(args.cases, args.seed, args.base_subdiv, args.prior_noise, args.feature_noise)
    for lam in args.lambdas:
        s = summarise(run_cases(cases, config_from(args, lam=lam, ring=args.ring)))
        print(json.dumps({"lambda": lam, **s}))


if __name__ == "__main__":
    main()
