"""
Command-line front end.

Every invocation prints exactly one JSON document to stdout; diagnostics go to stderr through
`Log`. Exit code 0 means success, 2 a usage or input error and 3 a numerical abort during training.
Options can also come from a flat `key = value` file given with `--config`; options on the command
line take precedence over the file.
"""

import argparse
import dataclasses
import math
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, get_args

import numpy as np

from .base import Exceptions, Types
from .datagen import (
    EmpiricalSampler,
    GaussianSampler,
    ModeLimitedSampler,
    NoiseSampler,
    RingSampler,
    RingSpec,
    RngStream,
)
from .dgan import DganConfig, NetworkSampler, continuity_probe, dgan_train, init_models
from .discrepancy import empirical_discrepancy, theorem1_gap
from .edgan import (
    EnsembleInputs,
    MixtureWeights,
    edgan_optimize,
    ensemble_objective,
    theorem4_probe,
)
from .evaluation import decay_probe, likelihood_report
from .linalg import solver_by_name
from .neuralnet import save_checkpoint
from .samples import load_samples, save_samples
from .toy import DEFAULT_MODE_SETS, ensemble_experiment
from .util import Log
from .util.serialization import JsonlWriter, dumps, write_json, write_xy_csv
from .util.typing import check_positive

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ABORT = 3

THEOREM1_TOLERANCE = 1e-9
DEFAULT_DECAY_SIZES = (64, 128, 256, 512, 1024, 2048, 4096, 8192)
DEFAULT_THEOREM4_SIZES = (64, 1024)
DEFAULT_EPSILONS = (1e-1, 1e-2, 1e-3, 1e-4)


def _int_list(text: str) -> list[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _float_list(text: str) -> list[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got '{text}'")


@dataclasses.dataclass
class RunConfig:
    """
    Everything one invocation needs. Fields mirror the long options (dashes become underscores).
    A `None` size or list means the subcommand's own default.
    """

    command: str
    kind: Types.ProbeKind | None = None
    real: str | None = None
    generated: list[str] = dataclasses.field(default_factory=list)
    config: str | None = None
    seed: int = 0
    log_level: str = "warn"
    out_dir: str | None = None
    solver: str = "power"
    tol: float = 1e-10
    # Training.
    eta: float = 1e-3
    steps: int = 1000
    clip: float = 0.5
    batch_real: int = 256
    batch_gen: int = 256
    critic_steps: int = 3
    warmup_steps: int = 25
    warmup_critic_steps: int = 100
    embed_dim: int = 8
    optimizer: str = "adam"
    simultaneous: bool = False
    freeze_embedding: bool = False
    log_every: int = 100
    dump_size: int = 1000
    # Ensembles.
    iters: int | None = None
    eta0: float | None = None
    compare: bool = False
    grid_res: float = 0.01
    # Data.
    ring_p: int = 9
    ring_r: float = 1.0
    ring_sigma: float = 0.05
    ring_truth: bool = False
    sample_size: int | None = None
    eval_size: int | None = None
    # Probes and likelihoods.
    sizes: list[int] | None = None
    repeats: int = 10
    dim: int = 1
    trials: int = 100
    epsilons: list[float] | None = None
    folds: int = 5
    bandwidths: list[float] | None = None

    @property
    def ring(self) -> RingSpec:
        return RingSpec(self.ring_p, self.ring_r, self.ring_sigma)

    def dgan_config(self, data_dim: int = 2) -> DganConfig:
        return DganConfig(
            m=self.batch_real,
            n=self.batch_gen,
            lr=self.eta,
            critic_steps=self.critic_steps,
            warmup_steps=self.warmup_steps,
            warmup_critic_steps=self.warmup_critic_steps,
            clip=self.clip,
            steps=self.steps,
            embed_dim=self.embed_dim,
            seed=self.seed,
            optimizer=self.optimizer,
            data_dim=data_dim,
            train_embedding=not self.freeze_embedding,
            alternating=not self.simultaneous,
            solver=self.solver,
            log_every=self.log_every,
        )

    def validate(self) -> "RunConfig":
        """Checks every knob before any work starts."""
        check_positive(self.seed, "seed", integer=True, allow_zero=True)
        check_positive(self.tol, "tol")
        solver_by_name(self.solver, self.tol)
        if self.out_dir is not None and not Path(self.out_dir).is_dir():
            raise Exceptions.ParameterError(f"output directory '{self.out_dir}' does not exist")
        for name in ("repeats", "dim", "trials", "folds", "dump_size"):
            check_positive(getattr(self, name), name.replace("_", " "), integer=True)
        for name in ("iters", "sample_size", "eval_size"):
            if getattr(self, name) is not None:
                check_positive(getattr(self, name), name.replace("_", " "), integer=True)
        if self.eta0 is not None:
            check_positive(self.eta0, "eta0")
        check_positive(self.grid_res, "grid resolution")
        self.ring.validate()
        self.dgan_config().validate()
        for n in self.sizes or ():
            check_positive(n, "sample size", integer=True)
        for eps in self.epsilons or ():
            check_positive(eps, "step size", allow_zero=True)
        for h in self.bandwidths or ():
            check_positive(h, "candidate bandwidth")
        if self.command == "train-dgan" and self.out_dir is None:
            raise Exceptions.ParameterError("train-dgan needs --out-dir")
        return self

    def output_path(self, name: str) -> Path | None:
        return None if self.out_dir is None else Path(self.out_dir) / name


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise Exceptions.ParameterError(message)


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="flat key = value file with further options")
    common.add_argument("--seed", type=int, help="seed of every random stream (default 0)")
    common.add_argument(
        "--log-level",
        choices=("debug", "info", "warn", "fail", "none"),
        help="stderr verbosity (default warn)",
    )
    common.add_argument("--out-dir", help="existing directory for output files")
    common.add_argument(
        "--solver",
        choices=("power", "power-plain", "exact"),
        help="spectral solver (default power)",
    )
    common.add_argument("--tol", type=float, help="power method tolerance (default 1e-10)")
    return common


def _ring_options(parser: argparse.ArgumentParser):
    parser.add_argument("--ring-p", type=int, help="ring components (default 9)")
    parser.add_argument("--ring-r", type=float, help="ring radius (default 1)")
    parser.add_argument("--ring-sigma", type=float, help="component std (default 0.05)")


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _Parser(prog="discgan", description="Discrepancy GAN toolkit.")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    options = dict(parents=[common], argument_default=argparse.SUPPRESS)

    disc = commands.add_parser("disc", help="discrepancy between two sample files", **options)
    disc.add_argument("real")
    disc.add_argument("generated", nargs=1)

    train = commands.add_parser("train-dgan", help="train a toy discrepancy GAN", **options)
    train.add_argument("--real", help="CSV of real samples (default: the ring)")
    train.add_argument("--eta", type=float, help="learning rate (default 1e-3)")
    train.add_argument("--steps", type=int, help="training steps (default 1000)")
    train.add_argument("--clip", type=float, help="embedding weight clip (default 0.5)")
    train.add_argument("--batch-real", type=int, help="real batch size (default 256)")
    train.add_argument("--batch-gen", type=int, help="generated batch size (default 256)")
    train.add_argument("--critic-steps", type=int, help="embedding steps per step (default 3)")
    train.add_argument("--warmup-steps", type=int, help="steps with a longer critic (default 25)")
    train.add_argument(
        "--warmup-critic-steps", type=int, help="embedding steps per warm-up step (default 100)",
    )
    train.add_argument("--embed-dim", type=int, help="embedding output dimension (default 8)")
    train.add_argument("--optimizer", choices=("sgd", "adam"), help="update rule (default adam)")
    train.add_argument("--simultaneous", action="store_true", help="update both from one loss")
    train.add_argument("--freeze-embedding", action="store_true", help="keep f at its init")
    train.add_argument("--log-every", type=int, help="progress interval (default 100)")
    train.add_argument("--dump-size", type=int, help="post-training samples (default 1000)")
    _ring_options(train)

    mix = commands.add_parser("mix-edgan", help="learn ensemble weights", **options)
    mix.add_argument("real")
    mix.add_argument("generated", nargs="+")
    mix.add_argument("--iters", type=int, help="subgradient steps (default 2000)")
    mix.add_argument("--eta0", type=float, help="initial step size")
    mix.add_argument("--compare", action="store_true", help="report single and uniform rows")

    probe = commands.add_parser("probe", help="run a theory probe", **options)
    probe.add_argument("kind", choices=get_args(Types.ProbeKind))
    probe.add_argument("--real", help="theorem1: CSV of real samples")
    probe.add_argument("--generated", type=lambda path: [path], help="theorem1: CSV to compare")
    probe.add_argument("--sizes", type=_int_list, help="comma-separated sample sizes")
    probe.add_argument("--repeats", type=int, help="repeats per size (default 10)")
    probe.add_argument("--dim", type=int, help="decay: Gaussian dimension (default 1)")
    probe.add_argument("--trials", type=int, help="theorem1: hypothesis pairs (default 100)")
    probe.add_argument("--epsilons", type=_float_list, help="continuity: step sizes")
    probe.add_argument("--sample-size", type=int, help="theorem1: samples per side")
    probe.add_argument("--eval-size", type=int, help="theorem4: evaluation samples")
    probe.add_argument("--grid-res", type=float, help="theorem4: lattice resolution")
    probe.add_argument("--iters", type=int, help="theorem4: subgradient steps")
    probe.add_argument("--batch-real", type=int, help="continuity: real batch size")
    probe.add_argument("--batch-gen", type=int, help="continuity: latent batch size")
    probe.add_argument("--embed-dim", type=int, help="continuity: embedding dimension")
    probe.add_argument("--clip", type=float, help="continuity: embedding weight clip")
    _ring_options(probe)

    evaluate = commands.add_parser("eval", help="likelihood metrics", **options)
    evaluate.add_argument("real")
    evaluate.add_argument("generated", nargs=1)
    evaluate.add_argument("--ring-truth", action="store_true", help="use the ring's density")
    evaluate.add_argument("--bandwidths", type=_float_list, help="candidate KDE bandwidths")
    evaluate.add_argument("--folds", type=int, help="cross-validation folds (default 5)")
    _ring_options(evaluate)

    toy = commands.add_parser("toy", help="ring ensemble experiment", **options)
    toy.add_argument("--sample-size", type=int, help="training samples per source (default 1000)")
    toy.add_argument("--eval-size", type=int, help="scoring samples per row (default 1000)")
    toy.add_argument("--iters", type=int, help="subgradient steps (default 500)")
    _ring_options(toy)
    return parser


def read_config_file(path: str) -> dict[str, str]:
    """Reads `key = value` lines. Blank lines and `#` comments are skipped."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as error:
        raise Exceptions.ParameterError(f"cannot read config file '{path}' ({error.strerror})")
    values = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise Exceptions.ParameterError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


_SWITCHES = frozenset(("compare", "simultaneous", "freeze_embedding", "ring_truth"))


def config_tokens(values: dict[str, str]) -> list[str]:
    """Turns config file entries into the equivalent command-line tokens."""
    tokens = []
    for key, value in values.items():
        flag = "--" + key.replace("_", "-")
        if key in _SWITCHES:
            try:
                enabled = _bool(value)
            except argparse.ArgumentTypeError as error:
                raise Exceptions.ParameterError(f"config key '{key}': {error}") from None
            tokens.extend([flag] if enabled else [])
        else:
            tokens.extend([flag, value])
    return tokens


def parse_args(argv: Sequence[str] | None = None) -> RunConfig:
    """Parses the command line and the optional config file into a validated `RunConfig`."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    given = vars(parser.parse_args(argv))
    if "config" in given:
        # File options go right after the subcommand, so later command-line flags override them.
        index = argv.index(given["command"]) + 1
        argv[index:index] = config_tokens(read_config_file(given["config"]))
        given = vars(parser.parse_args(argv))
    Log.set_level(given.get("log_level", "warn"))
    return RunConfig(**given).validate()


def _spectral_solver(config: RunConfig):
    return solver_by_name(config.solver, config.tol)


def cmd_disc(config: RunConfig) -> dict[str, Any]:
    real = load_samples(config.real)
    generated = load_samples(config.generated[0], expected_dim=real.cols)
    result = empirical_discrepancy(real, generated, _spectral_solver(config), rng=config.seed)
    if not result.converged:
        Log.warn("Eigen solver did not converge; the discrepancy is approximate.")
    return {
        "disc": result.value,
        "spectral": result.spectral,
        "converged": result.converged,
        "tie": result.tie,
        "degenerate": result.degenerate,
    }


def cmd_train_dgan(config: RunConfig) -> dict[str, Any]:
    stream = RngStream(config.seed)
    if config.real is not None:
        real = load_samples(config.real)
        sampler = EmpiricalSampler(real, rng=stream.derive(4))
    else:
        sampler = RingSampler(config.ring, rng=stream.derive(4), bound=config.ring.bound)
    cfg = config.dgan_config(sampler.dim)
    trace_path = config.output_path("trace.jsonl")
    # Streamed; an abort or an interrupt leaves the partial trace on disk.
    with JsonlWriter(trace_path) as trace_file:
        result = dgan_train(
            cfg, sampler, on_step=lambda record: trace_file.write(record.as_jsonl_record()),
        )

    paths = {
        "generator": config.output_path("generator.json"),
        "embedding": config.output_path("embedding.json"),
        "trace": trace_path,
        "samples": config.output_path("samples.csv"),
    }
    save_checkpoint(result.generator, paths["generator"])
    save_checkpoint(result.embedding, paths["embedding"])
    dump = NetworkSampler(result.generator, rng=stream.derive(5)).draw(config.dump_size)
    save_samples(dump, paths["samples"])

    values = result.trace.values
    return {
        "steps": len(result.trace),
        "F_first": float(values[0]),
        "F_last": float(values[-1]),
        "converged_steps": sum(record.converged for record in result.trace),
        "files": {name: str(path) for name, path in paths.items()},
    }


def cmd_mix_edgan(config: RunConfig) -> dict[str, Any]:
    real = load_samples(config.real)
    generated = [load_samples(path) for path in config.generated]
    inputs = EnsembleInputs(generated, real)
    solver = _spectral_solver(config)
    stream = RngStream(config.seed)
    iters = config.iters or 2000
    weights = edgan_optimize(
        inputs, iters=iters, eta0=config.eta0, rng=stream.derive(0), solver=solver,
    )
    final = ensemble_objective(weights, inputs, solver=solver, rng=stream.derive(1))
    document = {
        "alpha": weights.alpha,
        "objective": final.value,
        "disc": 2 * final.value,
        "iters": iters,
    }
    if config.compare:
        candidates = [(f"single_{k + 1}", np.eye(inputs.p)[k]) for k in range(inputs.p)]
        candidates.append(("uniform", MixtureWeights.uniform(inputs.p).alpha))
        rows = []
        for name, alpha in candidates:
            value = ensemble_objective(alpha, inputs, solver, stream.derive(1)).value
            rows.append({"name": name, "disc": 2 * value})
        rows.append({"name": "edgan", "disc": 2 * final.value})
        document["comparison"] = rows
    if config.out_dir is not None:
        write_json(document, config.output_path("weights.json"))
    return document


def _probe_decay(config: RunConfig, stream: RngStream) -> tuple[dict[str, Any], list]:
    sampler = GaussianSampler(config.dim, bound=4 * math.sqrt(config.dim))
    result = decay_probe(
        sampler,
        config.sizes or DEFAULT_DECAY_SIZES,
        repeats=config.repeats,
        rng=stream,
        solver=_spectral_solver(config),
    )
    points = list(zip(result.sizes, result.means))
    return {"passed": result.within_band, **result.as_dict()}, points


def _probe_continuity(config: RunConfig, stream: RngStream) -> tuple[dict[str, Any], list]:
    cfg = config.dgan_config()
    generator, embedding = init_models(cfg)
    spec = config.ring
    real = RingSampler(spec, rng=stream.derive(4), bound=spec.bound).draw(cfg.m)
    z = NoiseSampler(generator.in_dim, rng=stream.derive(2)).draw(cfg.n)
    epsilons = config.epsilons or DEFAULT_EPSILONS
    results = continuity_probe(
        generator,
        embedding,
        real,
        z,
        epsilons,
        rng=stream.derive(6),
        solver=_spectral_solver(config),
    )
    gaps = [gap for _, gap in results]
    passed = all(later < earlier for earlier, later in zip(gaps, gaps[1:]))
    return {"passed": passed, "points": [{"eps": e, "gap": g} for e, g in results]}, results


def _probe_theorem1(config: RunConfig, stream: RngStream) -> tuple[dict[str, Any], list]:
    if config.real is not None or config.generated:
        if config.real is None or not config.generated:
            raise Exceptions.ParameterError("theorem1 needs both --real and --generated or neither")
        real = load_samples(config.real)
        generated = load_samples(config.generated[0], expected_dim=real.cols)
    else:
        spec, n = config.ring, config.sample_size or 1000
        real = RingSampler(spec, rng=stream.derive(0), bound=spec.bound).draw(n)
        modes = DEFAULT_MODE_SETS[0]
        generated = ModeLimitedSampler(spec, modes, stream.derive(1), spec.bound).draw(n)
    slack = theorem1_gap(
        real, generated, config.trials, rng=stream.derive(2), solver=_spectral_solver(config),
    )
    passed = slack >= -THEOREM1_TOLERANCE
    return {"passed": passed, "min_slack": slack, "trials": config.trials}, [(config.trials, slack)]


def _probe_theorem4(config: RunConfig, stream: RngStream) -> tuple[dict[str, Any], list]:
    spec = config.ring
    generators = [
        ModeLimitedSampler(spec, modes, bound=spec.bound) for modes in DEFAULT_MODE_SETS[:3]
    ]
    real = RingSampler(spec, bound=spec.bound)
    results = theorem4_probe(
        generators,
        real,
        config.sizes or DEFAULT_THEOREM4_SIZES,
        resolution=config.grid_res,
        rng=stream,
        repeats=config.repeats,
        eval_size=config.eval_size or 20000,
        iters=config.iters or 2000,
    )
    passed = results[-1][1] < results[0][1]
    return {"passed": passed, "points": [{"n": n, "gap": gap} for n, gap in results]}, results


_PROBES: dict[str, Callable[[RunConfig, RngStream], tuple[dict[str, Any], list]]] = {
    "decay": _probe_decay,
    "continuity": _probe_continuity,
    "theorem1": _probe_theorem1,
    "theorem4": _probe_theorem4,
}


def cmd_probe(config: RunConfig) -> dict[str, Any]:
    report, points = _PROBES[config.kind](config, RngStream(config.seed))
    passed = report.pop("passed")
    verdict = "pass" if passed else "fail"
    Log.info(f"Probe |{config.kind}|: {verdict}.")
    document = {"kind": config.kind, "verdict": verdict, **report}
    if config.out_dir is not None:
        path = config.output_path(f"{config.kind}.csv")
        write_xy_csv(points, path)
        document["plot_data"] = str(path)
    return document


def cmd_eval(config: RunConfig) -> dict[str, Any]:
    real = load_samples(config.real)
    generated = load_samples(config.generated[0], expected_dim=real.cols)
    report = likelihood_report(
        real,
        generated,
        spec=config.ring if config.ring_truth else None,
        candidates=config.bandwidths,
        folds=config.folds,
        rng=config.seed,
    )
    return report.as_dict()


def cmd_toy(config: RunConfig) -> dict[str, Any]:
    report = ensemble_experiment(
        config.ring,
        n=config.sample_size or 1000,
        eval_size=config.eval_size or 1000,
        iters=config.iters or 500,
        rng=config.seed,
        solver=_spectral_solver(config),
    )
    return report.as_dict()


COMMANDS: dict[str, Callable[[RunConfig], dict[str, Any]]] = {
    "disc": cmd_disc,
    "train-dgan": cmd_train_dgan,
    "mix-edgan": cmd_mix_edgan,
    "probe": cmd_probe,
    "eval": cmd_eval,
    "toy": cmd_toy,
}


def _emit(document: dict[str, Any]):
    sys.stdout.write(dumps(document) + "\n")
    sys.stdout.flush()


def main(argv: Sequence[str] | None = None) -> int:
    try:
        config = parse_args(argv)
        with Log.timed(f"Command |{config.command}|"):
            document = COMMANDS[config.command](config)
    except Exceptions.NumericalAbort as error:
        print(f"discgan: numerical abort: {error}", file=sys.stderr)
        _emit({"error": str(error), "step": error.step})
        return EXIT_ABORT
    except (Exceptions.DiscganError, OSError) as error:
        print(f"discgan: error: {error}", file=sys.stderr)
        _emit({"error": str(error)})
        return EXIT_USAGE
    _emit(document)
    return EXIT_OK
