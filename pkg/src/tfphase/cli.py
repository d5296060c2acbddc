"""Command line interface: ``tfphase {run,sweep,report,coeffs,verify}``.

Every ``run`` flag can also come from a ``key = value`` file passed with
``--config``; flags given on the command line win.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from importlib import metadata
from pathlib import Path
from typing import Sequence

from tfphase.fracops import l1_weights, l2_coefficients
from tfphase.presets import DEFAULT_SEED, PRESETS
from tfphase.schemes import Scheme, SchemeConfig, SimulationState, run

log = logging.getLogger("tfphase")

DEFAULT_ALPHA = {"flower": 0.9, "circles": 0.8, "ch-random": 0.6}


# {{{ configuration

@dataclass(frozen=True)
class RunConfig:
    """Fully resolved parameters of one ``run`` invocation."""

    preset: str = "flower"
    alpha: float | None = None
    scheme: str | None = None
    dt: float | None = None
    steps: int | None = None
    end_time: float | None = None
    S: float | None = None
    M: float = 1.0
    gamma: float | None = None
    eps: float | None = None
    grid: int | None = None
    stencil: str = "spectral"
    out: str = "tfphase-out"
    seed: int = DEFAULT_SEED
    energy_stride: int = 1
    snap_stride: int = 0
    pgm: bool = False
    plot: bool = False

    def __post_init__(self) -> None:
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        if self.snap_stride < 0:
            raise ValueError("snapshot stride must be >= 0")

    def resolved(self) -> RunConfig:
        """Fill unset fields from the preset and reconcile steps with end time."""
        p = PRESETS[self.preset]
        dt = p.dt if self.dt is None else self.dt
        steps = self.steps
        if self.end_time is not None:
            implied = self.end_time / dt
            if steps is None:
                steps = int(round(implied))
            elif abs(implied - steps) > 1.0:
                raise ValueError(f"end time {self.end_time} and dt {dt} imply {implied:g} steps, "
                                 f"inconsistent with --steps {steps}")
        steps = 100 if steps is None else steps
        return replace(
            self,
            alpha=DEFAULT_ALPHA[self.preset] if self.alpha is None else self.alpha,
            scheme=p.scheme.value if self.scheme is None else Scheme(self.scheme).value,
            dt=dt,
            steps=steps,
            end_time=steps * dt,
            S=p.S if self.S is None else self.S,
            gamma=p.gamma if self.gamma is None else self.gamma,
            eps=p.eps if self.eps is None else self.eps,
            grid=p.n if self.grid is None else self.grid,
        )

    def scheme_config(self) -> SchemeConfig:
        r = self.resolved()
        return SchemeConfig(alpha=r.alpha, gamma=r.gamma, eps=r.eps, dt=r.dt, S=r.S, M=r.M,
                            scheme=Scheme(r.scheme), n_steps=r.steps,
                            energy_stride=r.energy_stride)


_CONFIG_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(key: str, text: str):
    kind = _CONFIG_TYPES[key]
    if "bool" in kind:
        return _parse_bool(text)
    if "int" in kind:
        return int(text)
    if "float" in kind:
        return float(text)
    return text


def read_config_file(path: str | Path) -> dict[str, object]:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Dashes in keys
    are accepted as aliases for underscores."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in _CONFIG_TYPES:
            raise ValueError(f"{path}:{lineno}: cannot parse {raw!r}")
        values[key] = _convert(key, value.strip())
    return values

# }}}


# {{{ run

def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def execute(cfg: RunConfig) -> Path:
    """Run one simulation and write its outputs; returns the output directory."""
    from tfphase.fields import Grid
    from tfphase.output import emit_energy_csv, emit_pgm, emit_snapshot, write_manifest

    r = cfg.resolved()
    preset = PRESETS[r.preset]
    scheme_cfg = r.scheme_config()
    grid = Grid.square(r.grid, preset.length, preset.origin, r.stencil)
    u0 = preset.initial_field(grid, r.seed)

    out = Path(r.out)
    out.mkdir(parents=True, exist_ok=True)
    snap_dir = out / "snapshots"
    if r.snap_stride or r.pgm:
        snap_dir.mkdir(exist_ok=True)

    def save_fields(state: SimulationState, _record) -> None:
        n = state.n
        stride = r.snap_stride
        if not (n == 0 or n == r.steps or (stride and n % stride == 0)):
            return
        if stride:
            emit_snapshot(state.u, snap_dir / f"u_{n:06d}.tfp")
        if r.pgm:
            emit_pgm(state.u, snap_dir / f"u_{n:06d}.pgm")

    manifest = {k: v for k, v in asdict(r).items() if v is not None}
    manifest.update(
        version=_version(),
        Lx=preset.length, origin=preset.origin,
        guarantee_applies=scheme_cfg.guarantee_applies,
        required_S=scheme_cfg.required_S,
    )
    write_manifest(manifest, out / "manifest.txt")
    log.info("running %s (%s, alpha=%g, %d steps) into %s", r.preset, r.scheme, r.alpha, r.steps, out)
    if not scheme_cfg.guarantee_applies:
        log.warning("S=%g is below %.6g; energy decay is not covered by the theory for %s",
                    r.S, scheme_cfg.required_S, r.scheme)

    callbacks = [save_fields] if (r.snap_stride or r.pgm) else []
    try:
        result = run(scheme_cfg, u0, grid, callbacks)
        records = result.records
    except Exception as exc:
        emit_energy_csv(getattr(exc, "records", []), out / "energy.csv")
        raise
    emit_energy_csv(records, out / "energy.csv")
    if r.plot:
        from tfphase.plotting import render_report

        render_report(out)
    return out


def _run_config_from_args(args: argparse.Namespace) -> RunConfig:
    values: dict[str, object] = {}
    if args.config:
        values.update(read_config_file(args.config))
    for name in _CONFIG_TYPES:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return RunConfig(**values)


def cmd_run(args: argparse.Namespace) -> int:
    out = execute(_run_config_from_args(args))
    print(out)
    return 0


def _sweep_one(cfg: RunConfig) -> str:
    return str(execute(cfg))


def cmd_sweep(args: argparse.Namespace) -> int:
    base = _run_config_from_args(args)
    alphas = [float(a) for a in args.alphas.split(",")]
    s_values = [float(s) for s in args.S_values.split(",")] if args.S_values else [None]
    jobs = []
    for a in alphas:
        for s in s_values:
            name = f"alpha{a:g}" + ("" if s is None else f"_S{s:g}")
            jobs.append(replace(base, alpha=a, S=base.S if s is None else s,
                                out=str(Path(base.out) / name)))
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        for path in pool.map(_sweep_one, jobs):
            print(path)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    from tfphase.plotting import render_report

    for path in render_report(args.directory, args.title):
        print(path)
    return 0

# }}}


def cmd_coeffs(args: argparse.Namespace) -> int:
    out = sys.stdout
    if args.which == "l1":
        w = l1_weights(args.alpha, args.dt, args.n)
        out.write("k,b_k\n")
        for k, b in enumerate(w.b):
            out.write(f"{k},{b:.17g}\n")
    else:
        c = l2_coefficients(args.alpha, args.n)
        out.write(f"# r1 = {c.r1:.17g}\n")
        out.write("j,a_j,b_j,c_j,d_j\n")
        for j in range(1, c.n + 1):
            out.write(f"{j},{c.a[j]:.17g},{c.b[j]:.17g},{c.c[j]:.17g},{c.d[j]:.17g}\n")
        for problem in c.check():
            out.write(f"# violated: {problem}\n")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    from tfphase.verify import fuzz_lemma41, fuzz_lemma43, lemma31_study

    failed = False
    for alpha in (float(a) for a in args.alphas.split(",")):
        for check in (fuzz_lemma41, fuzz_lemma43):
            res = check(alpha, cases=args.cases, seed=args.seed)
            print(("PASS " if res.ok else "FAIL ") + str(res))
            failed |= not res.ok
        for label, fn, t in (("t^2", lambda s: s * s, 1.0), ("sin t", math.sin, 2.0)):
            study = lemma31_study(fn, alpha, t, label=f"identity {label} alpha={alpha:g}")
            ok = study.decreasing and study.final <= 1e-4
            print(("PASS " if ok else "FAIL ") + str(study))
            failed |= not ok
    return 1 if failed else 0


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    # defaults are None so that config-file values survive unless overridden
    p.add_argument("--config", help="key = value file with default flag values")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--alpha", type=float)
    p.add_argument("--scheme", choices=[s.value for s in Scheme])
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--end-time", dest="end_time", type=float)
    p.add_argument("--S", dest="S", type=float, help="stabilization constant")
    p.add_argument("--M", dest="M", type=float, help="truncation level of the potential")
    p.add_argument("--gamma", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--grid", type=int, help="points per direction")
    p.add_argument("--stencil", choices=["spectral", "fd2"])
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--energy-stride", dest="energy_stride", type=int)
    p.add_argument("--snap-stride", dest="snap_stride", type=int)
    p.add_argument("--pgm", action="store_true", default=None)
    p.add_argument("--plot", action="store_true", default=None,
                   help="render energy.png and dissipation.png after the run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tfphase", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one preset")
    _add_run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a preset for several alpha (and S) values in parallel")
    _add_run_flags(p)
    p.add_argument("--alphas", required=True, help="comma-separated fractional orders")
    p.add_argument("--S-values", dest="S_values", help="comma-separated stabilization values")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="render PNG figures from a run directory")
    p.add_argument("directory")
    p.add_argument("--title")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("coeffs", help="print L1 or L2 coefficient tables as CSV")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--which", choices=["l1", "l2"], default="l1")
    p.add_argument("--dt", type=float, default=1.0, help="time step for the L1 weights")
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("verify", help="randomised checks of the energy inequalities")
    p.add_argument("--alphas", default="0.3,0.5,0.8")
    p.add_argument("--cases", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        parser.exit(2, f"tfphase: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
