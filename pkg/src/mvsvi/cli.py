"""Command-line interface.

Subcommands::

    mvsvi run <scenario> [--threads K] [--output-dir DIR]
    mvsvi validate <scenario>        # check the scenario file, print canonical form
    mvsvi list-registry
    mvsvi replay <report> [--threads K] [--output-dir DIR]
    mvsvi selftest                   # quick numerical self-checks

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 self-test failure.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import math
import sys

import numpy as np
from scipy.integrate import quad

from .coefficients import COEFFICIENT_REGISTRY, custom, toy_cubic
from .config import (
    EXPERIMENT_PARAMS,
    builtin_scenarios,
    canonical_text,
    config_hash,
    load_config,
    parse_config,
)
from .convex import PSI_REGISTRY, YosidaView, build_psi
from .errors import ConfigError, MVSVIError
from .initial import INIT_REGISTRY
from .measures import EmpiricalMeasure, wasserstein
from .report import read_report_config
from .runner import run_scenario
from .validation import validate_assumption1, validate_assumption2
from .yamada_watanabe import YWFunction

log = logging.getLogger("mvsvi")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_SELFTEST = 0, 2, 3, 4


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mvsvi", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_exec_opts(p):
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (results do not depend on it)")
        p.add_argument("--output-dir", default=None,
                       help="overrides $MVSVI_OUTPUT_DIR and the scenario's output_dir")

    p = sub.add_parser("run", help="run a scenario file or built-in scenario")
    p.add_argument("scenario")
    add_exec_opts(p)
    p = sub.add_parser("validate", help="check a scenario file without running it")
    p.add_argument("scenario")
    sub.add_parser("list-registry", help="list coefficients, psi, initial laws, experiments")
    p = sub.add_parser("replay", help="re-run the scenario embedded in a report")
    p.add_argument("report")
    add_exec_opts(p)
    sub.add_parser("selftest", help="fast numerical self-checks")
    return ap


def _cmd_run(args) -> int:
    cfg = load_config(args.scenario)
    rep = run_scenario(cfg, threads=args.threads, output_dir=args.output_dir)
    print(rep.render().split("\n--- ")[0].rstrip())
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.scenario)
    print(f"# config_hash: {config_hash(cfg)}")
    print(canonical_text(cfg), end="")
    return EXIT_OK


def _cmd_list(args) -> int:
    print("coefficients:", ", ".join(sorted(COEFFICIENT_REGISTRY)))
    print("psi:", ", ".join(sorted(PSI_REGISTRY)))
    print("initial:", ", ".join(sorted(INIT_REGISTRY)))
    print("experiments:")
    for kind, schema in EXPERIMENT_PARAMS.items():
        params = ", ".join(f"{k}" + ("" if d is ... else f"={d}") for k, (d, _, _) in schema.items())
        print(f"  {kind}: {params}")
    print("built-in scenarios:", ", ".join(sorted(n[:-9] for n in builtin_scenarios())))
    return EXIT_OK


def _cmd_replay(args) -> int:
    text, recorded = read_report_config(args.report)
    cfg = parse_config(text, args.report)
    if config_hash(cfg) != recorded:
        raise ConfigError(f"embedded scenario hash {config_hash(cfg)} does not match "
                          f"recorded {recorded}")
    rep = run_scenario(cfg, threads=args.threads, output_dir=args.output_dir)
    print(rep.render().split("\n--- ")[0].rstrip())
    return EXIT_OK


def _selftest_checks():
    """Small versions of the library's core identities; each yields (name, ok)."""
    rng = np.random.default_rng(0)
    x = rng.uniform(-50, 50, 2000)
    ok = True
    for kind, params in (("interval", {"lo": -1.0, "hi": 2.0}), ("abs", {"scale": 1.5}),
                         ("quadratic", {"curvature": 2.0}),
                         ("max_affine", {"pieces": [[-1.0, 0.0], [0.5, 0.0], [2.0, -3.0]]})):
        psi = build_psi(kind, params)
        for n in (1.0, 100.0):
            v = YosidaView(psi, n)
            j = v.resolvent(x)
            env = v.envelope(x)
            rhs = psi.value(j) + v.gradient(x) ** 2 / (2 * n)
            ok &= bool(np.all(np.abs(env - rhs) <= 1e-10 * np.maximum(1, np.abs(env))))
    yield "Moreau envelope identity", ok

    f = YWFunction(0.1, 2.0)
    lo, hi = f.support
    kink = lo * math.sqrt(f.delta)
    total = quad(lambda z: float(f.weight(z)), lo, hi, points=[kink], epsabs=1e-13)[0]
    yield "Yamada-Watanabe weight integrates to 1", abs(total - 1) < 1e-10

    ok = True
    for _ in range(100):
        n = int(rng.integers(1, 6))
        a, b = rng.normal(size=n), rng.normal(size=n)
        for p in (1.0, 2.0):
            brute = min(np.mean(np.abs(a - b[list(perm)]) ** p)
                        for perm in itertools.permutations(range(n))) ** (1 / p)
            ok &= math.isclose(wasserstein(EmpiricalMeasure(a), EmpiricalMeasure(b), p), brute,
                               rel_tol=0, abs_tol=1e-12)
    yield "Wasserstein equals brute-force optimal pairing", ok

    yield "toy pair satisfies the measure-free conditions", validate_assumption1(toy_cubic()).passed
    broken = custom("-x", "x", C=10.0, alpha=0.0)
    yield "unbounded diffusion is flagged", not validate_assumption2(broken).passed


def _cmd_selftest(args) -> int:
    failed = 0
    for name, ok in _selftest_checks():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failed += not ok
    return EXIT_OK if failed == 0 else EXIT_SELFTEST


_COMMANDS = {
    "run": _cmd_run,
    "validate": _cmd_validate,
    "list-registry": _cmd_list,
    "replay": _cmd_replay,
    "selftest": _cmd_selftest,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MVSVIError, ArithmeticError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
