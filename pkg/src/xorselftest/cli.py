"""Command-line front end.

Subcommands ``analyze``, ``robustness``, ``jordan`` and ``ghz`` read a game,
matrix or device file, run the corresponding analysis and print a JSON report
(CSV for robustness samples on request).

Exit codes: 0 success, 1 a GHZ bound was violated, 2 invalid input,
3 warning under ``--strict``, 4 game failed the robustness gate.
"""

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .game import BUILTIN_GAMES, XorGame, h_alpha
from .ghz import (
    check_all_qubit_bounds,
    check_entangled_bound,
    load_device,
    random_canonical_device,
    random_qubit_device,
)
from .jordan import block_decompose, load_pair
from .optimizer import MaximaSet, OptimizerConfig, find_global_maxima
from .robustness import RobustnessCertificate, run_robustness_experiment
from .verdict import ANGLE_TOL, Verdict, classify

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INPUT = 2
EXIT_STRICT = 3
EXIT_GATE = 4

CLASS_NAMES = {"t": "T", "s": "S", "qubit": "qubit", "canonical": "canonical"}

log = logging.getLogger(__name__)


class InputError(Exception):
    """Bad user input; reported on stderr with exit code 2."""


@dataclass
class AnalysisReport:
    tool_version: str
    input_digest: str
    input_source: str
    seed: int
    config: dict
    verdict: Verdict
    maxima: MaximaSet
    robustness: RobustnessCertificate | None = None
    timings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "tool_version": self.tool_version,
            "input_digest": self.input_digest,
            "input_source": self.input_source,
            "seed": self.seed,
            "config": dict(self.config),
            "verdict": self.verdict.to_dict(),
            "maxima": self.maxima.to_dict(),
            "robustness": None if self.robustness is None else self.robustness.to_dict(),
            "timings": dict(self.timings),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d):
        maxima = MaximaSet.from_dict(d["maxima"])
        verdict = Verdict.from_dict(d["verdict"])
        verdict.maxima = maxima
        rob = d.get("robustness")
        return cls(
            tool_version=d["tool_version"],
            input_digest=d["input_digest"],
            input_source=d["input_source"],
            seed=int(d["seed"]),
            config=dict(d["config"]),
            verdict=verdict,
            maxima=maxima,
            robustness=None if rob is None else RobustnessCertificate.from_dict(rob),
            timings=dict(d.get("timings", {})),
            warnings=list(d.get("warnings", [])),
        )

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


# -- input resolution --------------------------------------------------------

def _digest(data: bytes):
    return "sha256:" + hashlib.sha256(data).hexdigest()


def _bundled(name):
    fname = name if name.endswith(".json") else name + ".json"
    res = resources.files("xorselftest") / "data" / fname
    return res if res.is_file() else None


def resolve_game(spec, alpha=None):
    """Return (game, source, digest) for a path, bundled file or builtin name.

    ``--alpha`` alone (or with ``--game h_alpha``) builds the tilted
    two-player family.
    """
    if alpha is not None and spec in (None, "h_alpha"):
        game = h_alpha(float(alpha))
        text = json.dumps(game.to_dict(), sort_keys=True)
        return game, f"h_alpha(alpha={float(alpha)!r})", _digest(text.encode())
    if spec is None:
        raise InputError("--game is required (or --alpha for the tilted family)")
    if alpha is not None:
        raise InputError("--alpha only applies to the h_alpha template")
    path = Path(spec)
    if path.is_file():
        raw = path.read_bytes()
        source = str(path)
    elif _bundled(path.name) is not None and path.parent == Path("."):
        raw = _bundled(path.name).read_bytes()
        source = f"bundled:{path.name}"
    elif spec in BUILTIN_GAMES:
        game = BUILTIN_GAMES[spec]()
        text = json.dumps(game.to_dict(), sort_keys=True)
        return game, f"builtin:{spec}", _digest(text.encode())
    else:
        raise InputError(f"{spec}: no such file or bundled game")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        game = XorGame.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{source}: {exc}") from exc
    return game, source, _digest(raw)


def _file_digest(path):
    try:
        return _digest(Path(path).read_bytes())
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc


def _optimizer_config(args):
    try:
        return OptimizerConfig(
            grid_points_per_dim=args.grid_points,
            rng_seed=args.seed,
            dedup_angle_tol=args.tol,
            random_starts=args.starts,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _eps_grid(args):
    if not 0 < args.eps_min <= args.eps_max < 1:
        raise InputError("need 0 < --eps-min <= --eps-max < 1")
    if args.eps_steps < 1:
        raise InputError("--eps-steps must be >= 1")
    if args.samples < 1:
        raise InputError("--samples must be >= 1")
    return np.geomspace(args.eps_min, args.eps_max, args.eps_steps).tolist()


def _emit(text, out=None):
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")


# -- commands -----------------------------------------------------------------

def cmd_analyze(args):
    game, source, digest = resolve_game(args.game, args.alpha)
    config = _optimizer_config(args)
    timings = {}
    t0 = time.perf_counter()
    maxima = find_global_maxima(game, config)
    timings["maxima_s"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    verdict = classify(game, config, maxima=maxima, angle_tol=args.tol)
    timings["classify_s"] = time.perf_counter() - t0
    warnings = list(maxima.warnings)
    cert = None
    if args.strategy_class is not None:
        if not verdict.is_robust_self_test:
            warnings.append(f"robustness run skipped: {verdict.reason()} fails")
        else:
            t0 = time.perf_counter()
            cert = run_robustness_experiment(
                game, CLASS_NAMES[args.strategy_class], _eps_grid(args), args.samples,
                seed=args.seed, verdict=verdict, game_id=source)
            timings["robustness_s"] = time.perf_counter() - t0
            warnings.extend(cert.warnings)
    cfg = config.to_dict()
    cfg["angle_tol"] = args.tol
    report = AnalysisReport(
        tool_version=__version__, input_digest=digest, input_source=source, seed=args.seed,
        config=cfg, verdict=verdict, maxima=maxima, robustness=cert, timings=timings,
        warnings=warnings,
    )
    _emit(report.to_json(), None if args.out is None else f"{args.out}.json")
    if warnings and args.strict:
        return EXIT_STRICT
    return EXIT_OK


def cmd_robustness(args):
    game, source, digest = resolve_game(args.game, args.alpha)
    eps_grid = _eps_grid(args)
    config = _optimizer_config(args)
    verdict = classify(game, config, angle_tol=args.tol)
    if not verdict.is_robust_self_test:
        payload = {"error": f"game is not a robust self-test ({verdict.reason()} fails)",
                   "input_source": source, "input_digest": digest, "verdict": verdict.to_dict()}
        _emit(json.dumps(payload, indent=2, sort_keys=True))
        return EXIT_GATE
    cert = run_robustness_experiment(game, CLASS_NAMES[args.strategy_class], eps_grid, args.samples,
                                     seed=args.seed, verdict=verdict, game_id=source)
    if args.out is not None:
        _emit(cert.to_csv(), f"{args.out}.csv")
        _emit(cert.to_json(), f"{args.out}.json")
    else:
        _emit(cert.to_csv() if args.format == "csv" else cert.to_json())
    if (cert.warnings or verdict.maxima.warnings) and args.strict:
        return EXIT_STRICT
    return EXIT_OK


def cmd_jordan(args):
    digest = _file_digest(args.matrix)
    try:
        pair = load_pair(args.matrix)
        pair.validate()
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{args.matrix}: {exc}") from exc
    dec = block_decompose(pair)
    report = dec.to_dict(pair)
    report["thetas"] = dec.thetas.tolist()
    report["input_digest"] = digest
    report["tool_version"] = __version__
    _emit(json.dumps(report, indent=2, sort_keys=True), args.out)
    return EXIT_OK


def cmd_ghz(args):
    if (args.device is None) == (args.random is None):
        raise InputError("give either a device file or --random N")
    if args.device is not None:
        digest = _file_digest(args.device)
        try:
            device = load_device(args.device)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{args.device}: {exc}") from exc
        rep = check_all_qubit_bounds(device)
        payload = rep.to_dict()
        payload.update(input_digest=digest, tool_version=__version__)
        _emit(json.dumps(payload, indent=2, sort_keys=True), args.out)
        return EXIT_OK if rep.ok else EXIT_VIOLATION

    if args.random < 1:
        raise InputError("--random must be >= 1")
    rng = np.random.default_rng(args.seed)
    worst = {}
    violations = []
    max_eps = 0.0
    for k in range(args.random):
        if args.kind == "qubit":
            rep = check_all_qubit_bounds(random_qubit_device(rng))
        else:
            rep = check_entangled_bound(random_canonical_device(rng))
        max_eps = max(max_eps, rep.epsilon)
        for c in rep.checks:
            if c.name not in worst or c.slack < worst[c.name]:
                worst[c.name] = c.slack
            if not c.ok:
                violations.append({"device": k, **c.to_dict()})
    payload = {
        "tool_version": __version__,
        "seed": args.seed,
        "kind": args.kind,
        "devices": args.random,
        "max_epsilon": max_eps,
        "min_slack": worst,
        "violations": violations,
        "ok": not violations,
    }
    _emit(json.dumps(payload, indent=2, sort_keys=True), args.out)
    return EXIT_OK if not violations else EXIT_VIOLATION


# -- argument parsing ------------------------------------------------------------

def _add_game_args(p):
    p.add_argument("--game", help="game JSON file, bundled file name, or builtin (chsh, ghz3, const1)")
    p.add_argument("--alpha", type=float, help="build the tilted game {alpha, alpha, 1, -1}")
    p.add_argument("--grid-points", type=int, default=12, help="seed grid resolution per angle")
    p.add_argument("--starts", type=int, default=None, help="random Newton starts (default 10(n+1))")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=ANGLE_TOL, help="angle tolerance for comparing maxima")
    p.add_argument("--strict", action="store_true", help="exit 3 on any optimizer or sampling warning")


def _add_eps_args(p, class_required):
    p.add_argument("--class", dest="strategy_class", type=str.lower, choices=sorted(CLASS_NAMES),
                   required=class_required, default=None)
    p.add_argument("--eps-min", type=float, default=1e-4)
    p.add_argument("--eps-max", type=float, default=1e-1)
    p.add_argument("--eps-steps", type=int, default=4)
    p.add_argument("--samples", type=int, default=200, help="samples per eps value")


def build_parser():
    parser = argparse.ArgumentParser(prog="xorselftest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="classify a game as a (robust) self-test")
    _add_game_args(p)
    _add_eps_args(p, class_required=False)
    p.add_argument("--out", help="write PREFIX.json instead of printing")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("robustness", help="sample near-optimal strategies and fit d <= C sqrt(eps)")
    _add_game_args(p)
    _add_eps_args(p, class_required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="write PREFIX.csv and PREFIX.json instead of printing")
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("jordan", help="block-diagonalize a pair of involutions")
    p.add_argument("matrix", help='JSON file {"dim": d, "X1": ..., "X2": ...}')
    p.add_argument("--out", help="write the report to this file")
    p.set_defaults(func=cmd_jordan)

    p = sub.add_parser("ghz", help="check the GHZ device bounds")
    p.add_argument("device", nargs="?", help="Qubit222Device JSON file")
    p.add_argument("--random", type=int, help="check N random near-ideal devices")
    p.add_argument("--kind", choices=("qubit", "entangled"), default="qubit",
                   help="device family for --random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the report to this file")
    p.set_defaults(func=cmd_ghz)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already; keep --help/--version at 0
        return int(exc.code or 0)
    if getattr(args, "seed", 0) < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
