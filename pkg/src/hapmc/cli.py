"""Command-line interface: ``hapmc {simulate,assemble,evaluate,bench,theory}``.

Exit codes: 0 success, 1 internal error, 2 input error, 3 numerical failure.
Any subcommand accepts ``--config FILE`` holding ``key=value`` lines that
mirror its long flags; flags given on the command line take precedence.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (
    TABLE3_COVERAGES, TABLE3_ERRORS, geometric_grid, run_svt_comparison, run_table3, write_csv,
)
from .fragmat import FragmentFormatError, Haplotype, parse_fragments, write_fragments
from .metrics import EvalReport, evaluate
from .simread import DEFAULT_READ_LEN, SimulationSpec, read_truth, simulate, write_truth
from .solver import ALGORITHMS, SolverConfig, SolverError, assemble
from .theory import (
    TheoryParams, coverage_requirement, error_bound, noise_spectral_bound,
    noise_spectral_bound_stated, plateau_bound, sample_prob_threshold, validate_noise_bound,
)

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("hapmc")


class InputError(Exception):
    """Bad user input detected after argument parsing."""


# argument helpers -----------------------------------------------------------


def _read_len(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("-")
    try:
        pair = (int(lo), int(hi)) if sep else (int(lo), int(lo))
    except ValueError:
        raise argparse.ArgumentTypeError(f"read length must be L or LO-HI, got {text!r}") from None
    return pair


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _open_out(path: str | None):
    if path is None or path == "-":
        return _NoClose(sys.stdout)
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    return open(p, "w", encoding="utf-8", newline="")


class _NoClose:
    def __init__(self, stream):
        self.stream = stream

    def __enter__(self):
        return self.stream

    def __exit__(self, *exc):
        self.stream.flush()
        return False


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _load_fragments(path: str):
    import io
    return parse_fragments(io.StringIO(_read_text(path)))


def _load_haplotype(path: str) -> Haplotype:
    lines = [ln for ln in _read_text(path).splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise InputError(f"{path}: no haplotype line")
    return Haplotype.from_string(lines[0])


def _load_truth(path: str):
    import io
    return read_truth(io.StringIO(_read_text(path)))[0]


def config_tokens(path: str) -> list[str]:
    """Translate ``key=value`` lines into long-flag tokens."""
    tokens: list[str] = []
    for lineno, raw in enumerate(_read_text(path).splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep or not key.strip():
            raise InputError(f"{path}:{lineno}: expected key=value")
        flag = "--" + key.strip().replace("_", "-")
        val = val.strip()
        low = val.lower()
        if low in ("true", "yes", "on"):
            tokens.append(flag)
        elif low in ("false", "no", "off"):
            continue
        else:
            tokens += [flag, val]
    return tokens


# subcommands ----------------------------------------------------------------


def cmd_simulate(a) -> int:
    if a.m is None:
        raise InputError("--m is required")
    spec = SimulationSpec(
        m=a.m, n=a.n, model=a.model, p=a.p, coverage=a.coverage,
        read_len=a.read_len, p_e=a.error_rate, seed=a.seed,
    )
    F, truth = simulate(spec)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    frag = out / f"{a.prefix}.frag"
    tfile = out / f"{a.prefix}.truth"
    with open(frag, "w", encoding="utf-8") as fh:
        write_fragments(F, fh, comments=[spec.echo()])
    with open(tfile, "w", encoding="utf-8") as fh:
        write_truth(truth, fh, spec.echo())
    log.info("wrote %s (%d x %d, %d entries) and %s", frag, F.m, F.n, F.nnz, tfile)
    return EXIT_OK


def cmd_assemble(a) -> int:
    F = _load_fragments(a.input)
    if F.nnz == 0:
        raise SolverError("no observed entries to assemble")
    truth = _load_truth(a.truth) if a.truth else None
    if truth is not None and truth.m != F.m:
        raise InputError(f"truth has {truth.m} SNPs, fragments have {F.m}")
    cfg = SolverConfig(
        algorithm=a.algorithm, max_iters=a.max_iters, tol=a.tol, power_iters=a.power_iters,
        power_tol=a.power_tol, clip_factor=a.clip_factor, p_hat=a.p_hat, seed=a.seed,
    )
    res = assemble(F, cfg, truth=truth)
    with _open_out(a.output) as fh:
        fh.write(Haplotype(res.haplotype).to_string() + "\n")
    if a.membership:
        with _open_out(a.membership) as fh:
            fh.write(" ".join(str(int(x)) for x in res.membership) + "\n")
    if a.trace:
        with _open_out(a.trace) as fh:
            res.trace.write_csv(fh)
    log.info("%s: %d iterations, converged=%s", cfg.algorithm, res.iterations, res.converged)
    return EXIT_OK


def cmd_evaluate(a) -> int:
    F = _load_fragments(a.input)
    h = _load_haplotype(a.haplotype)
    if len(h) != F.m:
        raise InputError(f"haplotype length {len(h)} does not match m={F.m}")
    truth = _load_truth(a.truth) if a.truth else None
    if truth is not None and truth.m != F.m:
        raise InputError(f"truth has {truth.m} SNPs, fragments have {F.m}")
    v = None
    if a.membership:
        try:
            v = np.array([int(t) for t in _read_text(a.membership).split()], dtype=np.int8)
        except ValueError:
            raise InputError("membership file must hold +/-1 integers") from None
        if v.size != F.n or not np.all(np.abs(v) == 1):
            raise InputError(f"membership must hold {F.n} entries of +/-1")
    rep = evaluate(F, h.values, truth=truth, v=v)
    with _open_out(a.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EvalReport.FIELDS)
        row = rep.row()
        w.writerow([_num(row[k]) for k in EvalReport.FIELDS])
    return EXIT_OK


def _num(x) -> str:
    if x == "" or x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.10g}"


def cmd_bench(a) -> int:
    if a.replicates < 1:
        raise InputError("--replicates must be >= 1")
    header = []
    if not a.no_header:
        stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        header.append(f"hapmc {__version__} bench suite={a.suite} generated={stamp}")
    if a.suite == "table3":
        algos = a.algorithms or ["soft"]
        for name in algos:
            SolverConfig(algorithm=name)  # validates the name
        cells = run_table3(
            m=a.m, errors=a.errors, coverages=a.coverages, algorithms=algos,
            replicates=a.replicates, seed_base=a.seed, read_len=a.read_len,
        )
    else:
        n = a.n if a.n is not None else 2 * a.m
        grid = a.p_grid or geometric_grid(0.02, 0.32, 5)
        cells = run_svt_comparison(a.m, n, grid, p_e=a.errors[0],
                                   replicates=a.replicates, seed_base=a.seed)
    with _open_out(a.output) as fh:
        write_csv(cells, fh, header, runtime=not a.no_runtime)
    return EXIT_OK


def cmd_theory(a) -> int:
    if a.m is None or a.n is None:
        raise InputError("--m and --n are required")
    kw = dict(p_e=a.error_rate, C=a.C, C_prime=a.C_prime)
    if a.eps is not None:
        kw["eps"] = a.eps
    tp = TheoryParams.from_shape(a.m, a.n, **kw)
    if a.delta2 is not None:
        tp = TheoryParams(tp.m, tp.n, delta2=a.delta2, **kw)
    rows = [
        ("alpha", tp.alpha), ("delta2", tp.delta2), ("delta2_max", tp.delta2_max),
        ("eps", tp.eps), ("sample_prob_threshold", sample_prob_threshold(tp)),
        ("coverage_requirement", coverage_requirement(tp)),
        ("noise_spectral_bound", noise_spectral_bound(tp)),
        ("noise_spectral_bound_stated", noise_spectral_bound_stated(tp)),
        ("error_bound", error_bound(tp)), ("plateau_bound", plateau_bound(tp)),
    ]
    if a.validate:
        if a.p is None:
            raise InputError("--validate needs --p")
        seeds = [a.seed + k for k in range(a.replicates)]
        rep = validate_noise_bound(a.m, a.n, a.p, a.error_rate, seeds, C=a.C, C_prime=a.C_prime)
        rows += [("noise_bound_pass_rate", rep.pass_rate),
                 ("noise_measured_max", max(rep.measured))]
    with _open_out(a.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", "value"])
        for k, v in rows:
            w.writerow([k, f"{v:.10g}"])
    return EXIT_OK


# parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--config", help="file of key=value lines mirroring long flags")
    common.add_argument("--format", choices=["csv"], default="csv", help="report format")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="hapmc", description="Haplotype assembly by rank-one "
                                "binary matrix completion.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="write a synthetic instance")
    s.add_argument("--m", type=int, help="number of SNPs")
    s.add_argument("--n", type=int, help="number of reads (uniform model)")
    s.add_argument("--model", choices=["uniform", "contiguous"], default="contiguous")
    s.add_argument("--p", type=float, help="sampling probability (uniform model)")
    s.add_argument("--coverage", type=float, default=5.0, help="mean reads per SNP (contiguous)")
    s.add_argument("--read-len", type=_read_len, default=DEFAULT_READ_LEN,
                   help="SNPs per read, L or LO-HI (default %(default)s)")
    s.add_argument("--error-rate", type=float, default=0.0)
    s.add_argument("--out", default=".", help="output directory")
    s.add_argument("--prefix", default="reads", help="file stem for .frag and .truth")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("assemble", parents=[common], help="assemble a haplotype")
    s.add_argument("--input", required=False, help="fragment file")
    s.add_argument("--algorithm", choices=list(ALGORITHMS) + ["ls"], default="soft")
    s.add_argument("--max-iters", type=int, default=100)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--power-iters", type=int, default=200)
    s.add_argument("--power-tol", type=float, default=1e-10)
    s.add_argument("--clip-factor", type=float, default=2.0)
    s.add_argument("--p-hat", type=float, help="override the sampling-rate scale")
    s.add_argument("--truth", help="truth sidecar; enables distance tracing")
    s.add_argument("--output", help="haplotype file (default stdout)")
    s.add_argument("--membership", help="write read memberships here")
    s.add_argument("--trace", help="write the per-iteration trace CSV here")
    s.set_defaults(func=cmd_assemble)

    s = sub.add_parser("evaluate", parents=[common], help="score a haplotype")
    s.add_argument("--input", help="fragment file")
    s.add_argument("--haplotype", help="haplotype file (0/1 line)")
    s.add_argument("--truth", help="truth sidecar")
    s.add_argument("--membership", help="membership file (+/-1 integers)")
    s.add_argument("--output", help="CSV destination (default stdout)")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("bench", parents=[common], help="run a benchmark grid")
    s.add_argument("--suite", choices=["table3", "svt"], default="table3")
    s.add_argument("--m", type=int, default=700)
    s.add_argument("--n", type=int, help="reads for the svt suite (default 2m)")
    s.add_argument("--errors", type=_float_list, default=None,
                   help="error rates (default 0,0.1,0.2,0.3; svt suite 0.05)")
    s.add_argument("--coverages", type=_float_list, default=list(TABLE3_COVERAGES))
    s.add_argument("--algorithms", type=_str_list, help="solver variants (table3 suite)")
    s.add_argument("--p-grid", type=_float_list, help="sampling probabilities (svt suite)")
    s.add_argument("--replicates", type=int, default=100)
    s.add_argument("--read-len", type=_read_len, default=DEFAULT_READ_LEN)
    s.add_argument("--output", help="CSV destination (default stdout)")
    s.add_argument("--no-header", action="store_true", help="omit the timestamp header line")
    s.add_argument("--no-runtime", action="store_true",
                   help="leave mean_runtime_ms blank for byte-reproducible output")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("theory", parents=[common], help="evaluate the recovery bounds")
    s.add_argument("--m", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--error-rate", type=float, default=0.0)
    s.add_argument("--delta2", type=float, help="analysis parameter (default: interval top)")
    s.add_argument("--eps", type=float, help="target accuracy (default ||M||_F / e)")
    s.add_argument("--C", type=float, default=1.0)
    s.add_argument("--C-prime", type=float, default=1.0)
    s.add_argument("--validate", action="store_true", help="also run the noise-norm validator")
    s.add_argument("--p", type=float, help="sampling probability for --validate")
    s.add_argument("--replicates", type=int, default=50)
    s.add_argument("--output", help="CSV destination (default stdout)")
    s.set_defaults(func=cmd_theory)
    return p


def _with_config(argv: list[str]) -> list[str]:
    """Splice ``--config`` contents in right after the subcommand name."""
    for k, tok in enumerate(argv):
        path = None
        if tok == "--config" and k + 1 < len(argv):
            path = argv[k + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
        if path is not None:
            extra = config_tokens(path)
            subcmd = next((i for i, t in enumerate(argv) if not t.startswith("-")), None)
            if subcmd is None:
                return argv
            return argv[:subcmd + 1] + extra + argv[subcmd + 1:]
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _with_config(argv)
    except InputError as exc:
        print(f"hapmc: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INPUT
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr,
    )
    if args.command == "bench" and args.errors is None:
        args.errors = list(TABLE3_ERRORS) if args.suite == "table3" else [0.05]
    required = {"assemble": ("input",), "evaluate": ("input", "haplotype")}
    for name in required.get(args.command, ()):
        if getattr(args, name) is None:
            print(f"hapmc {args.command}: error: --{name} is required", file=sys.stderr)
            return EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, FragmentFormatError, ValueError) as exc:
        print(f"hapmc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"hapmc {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FloatingPointError as exc:
        print(f"hapmc {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception as exc:  # pragma: no cover - reported, not hidden
        log.debug("internal error", exc_info=True)
        print(f"hapmc {args.command}: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
