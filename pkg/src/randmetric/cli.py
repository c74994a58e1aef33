"""Command-line entry point: ``python3 -m randmetric <subcommand> [flags]``.

Exit codes: 0 on pass (or when a run gives no verdict), 2 when a statistical
verdict fails, 1 on errors.
"""

import argparse
import json
import os
import sys

from . import harness
from .errors import RandMetricError
from .fields import GridSpec, assemble_metric, sample_angular, sample_radial, write_metric_field
from .distances import lipschitz_rho, omega2_sq
from .geomlab import integrability_certificate

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def _common(p):
    p.add_argument("--config", help="JSON config file (flags override its values)")
    p.add_argument("--seed", type=int, help="root seed (u64)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--samples", type=int, help="number of samples N")
    p.add_argument("--grid", type=int, help="grid points per axis m")
    p.add_argument("--schedule", help="decay schedule, e.g. power:s=2 or heat:t=0.5")
    p.add_argument("--schedule2", help="decay schedule of the angular part")
    p.add_argument("--n", type=int, help="dimension")
    p.add_argument("--lam-max", type=int, dest="lam_max", help="largest basis eigenvalue")
    p.add_argument("--q", type=int, help="required continuity order for the regularity gate")


def build_parser():
    ap = argparse.ArgumentParser(prog="randmetric", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in harness.EXPERIMENTS:
        p = sub.add_parser(name)
        _common(p)
        if name == "sandwich":
            p.add_argument("--k", type=int, help="number of eigenvalues")
            p.add_argument("--no-angular", action="store_true", help="radial part only")
        else:
            p.add_argument("--angular", action="store_true", help="include the angular part")
    p = sub.add_parser("sample", help="dump one metric field")
    _common(p)
    p.add_argument("--no-angular", action="store_true")
    p = sub.add_parser("certify-integrability")
    p.add_argument("--c", type=float, required=True, help="growth constant of h")
    p.add_argument("--sigma-sq", type=float, required=True, dest="sigma_sq")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--kind", choices=("diameter", "eigenvalue"), default="diameter")
    p.add_argument("--N", type=int, default=1, dest="start", help="first summation index")
    p.add_argument("--beta", type=float, default=0.0, help="offset with lambda_k(g0) = exp(2 beta)")
    p.add_argument("--out", help="write the certificate JSON here (default: stdout)")
    return ap


def _config(args):
    overrides = {
        "experiment": args.command,
        "seed": args.seed,
        "out": args.out,
        "samples": args.samples,
        "m": args.grid,
        "schedule": args.schedule,
        "schedule2": args.schedule2,
        "n": args.n,
        "lam_max": args.lam_max,
        "q": args.q,
        "k": getattr(args, "k", None),
    }
    if getattr(args, "angular", False):
        overrides["angular"] = True
    if args.command in ("sandwich", "sample"):
        overrides["angular"] = not args.no_angular
    if args.config:
        return harness.ExperimentConfig.from_json(args.config, **overrides)
    return harness.ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def _certify(args):
    cert = integrability_certificate(args.c, args.sigma_sq, args.alpha, args.n, args.kind, args.start,
                                     beta=args.beta)
    text = json.dumps(harness._jsonable(cert.to_dict()), indent=2, sort_keys=True)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "certificate.json"), "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_PASS


def _sample(args):
    cfg = _config(args)
    if args.samples is None:
        cfg.samples = 1
    s = harness.setup(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    seed = harness.sample_seeds(cfg.seed, 1)[0]
    radial = sample_radial(s.basis, s.schedule, s.grid, seed)
    angular = sample_angular(s.basis, s.schedule2, s.grid, seed) if cfg.angular else None
    mf = assemble_metric(radial, angular)
    path = os.path.join(cfg.out, f"metric_{seed}.bin")
    write_metric_field(path, mf)
    summary = {"path": path, "seed": seed, "omega2_sq": omega2_sq(radial, s.grid),
               "rho": lipschitz_rho(radial, s.grid), **mf.provenance}
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_PASS


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "certify-integrability":
            return _certify(args)
        if args.command == "sample":
            return _sample(args)
        cfg = _config(args)
        man = harness.EXPERIMENTS[args.command](cfg)
    except (RandMetricError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(json.dumps({"experiment": man.experiment, "verdict": man.verdict, "summary": man.summary},
                     indent=2, sort_keys=True))
    return EXIT_FAIL if man.verdict is False else EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
