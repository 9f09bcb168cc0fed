"""Command-line front end: check, generate, noise, image and run.

Exit codes: 0 success, 2 invalid configuration or input, 3 solver or
decomposition failure, 4 file I/O problems.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

import numpy as np

from . import data as datamod
from .config import RunConfig, parse_config
from .errors import (
    DecompositionFailure,
    EmptySpectrum,
    FormatError,
    NoConvergence,
    ParseError,
    ValidationError,
    WoodAnomaly,
)
from .imaging import SamplingGrid, apply_W, contrast_ratio, imaginary_part, spectral_decompose, sweep_grid
from .lattice import count_propagating
from .materials import check_assumptions, interior_sample
from .output import write_outputs

log = logging.getLogger("periodic_fm")

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


def _report(cfg: RunConfig, out=print):
    params = cfg.lattice()
    coeffs = cfg.materials()
    rep = check_assumptions(coeffs, interior_sample(coeffs.geometry))
    out(f"geometry {coeffs.geometry.name}, bounding height {coeffs.geometry.bounding_height:g}, h = {cfg.h:g}")
    for line in rep.lines():
        out(line)
    out(f"propagating modes: {count_propagating(params)} of {params.n_modes}")
    return params, coeffs, rep


def _gate(rep, cfg):
    if rep.passes_a2:
        return
    if cfg.force:
        log.warning("material assumptions fail; continuing because force is set")
        return
    raise ValidationError("materials violate the absorption / small-coupling assumption (set force to override)")


def cmd_check(cfg: RunConfig) -> int:
    _, _, rep = _report(cfg)
    return EXIT_OK if rep.passes_a2 else EXIT_VALIDATION


def generate(cfg: RunConfig, verbose: bool = True) -> datamod.NearFieldMatrix:
    params, coeffs, rep = _report(cfg, print if verbose else (lambda *_: None))
    _gate(rep, cfg)
    if cfg.profile == "full" and verbose:
        print(f"note: full-scale profile, {4 * params.n_modes} forward solves; expect a long run")
    opts = datamod.SolverOptions(n=cfg.grid, n3=cfg.grid3, tol=cfg.tol, workers=cfg.workers,
                                 weighting="herglotz" if cfg.herglotz_weighting else "raw")

    def progress(j, lab, its):
        if verbose:
            print(f"column {j:5d}  m=({lab.m[0]:+d},{lab.m[1]:+d}) l={lab.l} sign={lab.sign:+d}  iterations={its}")

    t0 = time.perf_counter()
    mat = datamod.assemble_near_field(params, coeffs, options=opts, progress=progress)
    if verbose:
        print(f"assembled {mat.entries.shape[0]}x{mat.entries.shape[1]} matrix in {time.perf_counter() - t0:.1f} s")
    return datamod.add_noise(mat, cfg.noise, cfg.seed)


def cmd_generate(cfg: RunConfig) -> int:
    mat = generate(cfg)
    datamod.save(mat, cfg.data)
    print(f"wrote {cfg.data} (noise level {mat.noise_level:g})")
    return EXIT_OK


def cmd_noise(cfg: RunConfig, src: str, dst: str) -> int:
    mat = datamod.load(src)
    if mat.noise_level:
        log.warning("input already carries noise level %g", mat.noise_level)
    noisy = datamod.add_noise(mat, cfg.noise, cfg.seed)
    datamod.save(noisy, dst)
    print(f"wrote {dst} (noise level {cfg.noise:g}, seed {cfg.seed})")
    return EXIT_OK


def image(cfg: RunConfig, mat: datamod.NearFieldMatrix, verbose: bool = True):
    params = mat.params
    if cfg.image_weighting == "herglotz":
        mat = mat.herglotz_weighted()
    B = imaginary_part(apply_W(params, mat.entries, cfg.w_convention))
    eig = spectral_decompose(B, cfg.tau, noisy=mat.noise_level > 0)
    if verbose:
        kind = "singular values" if eig.noisy else "eigenvalues"
        print(f"retained {eig.retained_count} of {eig.all_values.size} {kind} >= {cfg.tau:g}")
    grid = SamplingGrid(*cfg.sampling, height=cfg.height)
    ind = sweep_grid(params, eig, grid, p=cfg.p, averaged=cfg.averaged_polarization,
                     convention=cfg.w_convention, workers=cfg.workers,
                     metadata={"noise": mat.noise_level, "retained": eig.retained_count})
    if verbose:
        print(f"max indicator value {ind.values.max():.6g}")
    return ind


def cmd_image(cfg: RunConfig, path: str | None = None) -> int:
    mat = datamod.load(path or cfg.data)
    ind = image(cfg, mat)
    paths = write_outputs(ind, cfg.output)
    _maybe_contrast(cfg, ind)
    print("wrote " + ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def _maybe_contrast(cfg, ind):
    coeffs = cfg.materials()
    X, Y, Z = np.meshgrid(*ind.axes(), indexing="ij")
    inside = coeffs.geometry.inside(X, Y, Z)
    if inside.any() and (~inside).any():
        ratio, at_max = contrast_ratio(ind, inside)
        print(f"mean inside / mean outside = {ratio:.3f}; maximum inside D: {at_max}")


def cmd_run(cfg: RunConfig) -> int:
    rc = cmd_generate(cfg)
    if rc:
        return rc
    return cmd_image(cfg)


def _add_common(p):
    p.add_argument("--config", "-c", help="configuration file (key = value lines)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any configuration key (repeatable)")
    p.add_argument("--profile", choices=("desk", "full"))
    p.add_argument("--geometry")
    p.add_argument("-M", type=int, dest="M")
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--data")
    p.add_argument("--output")
    p.add_argument("--workers", type=int)
    p.add_argument("--force", action="store_true", default=None, help="run even if the material assumptions fail")
    p.add_argument("--herglotz-weighting", action="store_true", default=None, dest="herglotz_weighting",
                   help="store data with the Herglotz weights folded into the columns")
    p.add_argument("--averaged-polarization", action="store_true", default=None, dest="averaged_polarization",
                   help="sum the indicator over p = e1, e2, e3")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="periodic-fm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (("check", "report material assumptions and mode counts"),
                       ("generate", "synthesize the near-field data matrix"),
                       ("image", "compute the indicator from a data file"),
                       ("run", "generate then image")):
        _add_common(sub.add_parser(name, help=text))
    pn = sub.add_parser("noise", help="add noise to a stored data matrix")
    _add_common(pn)
    pn.add_argument("input")
    pn.add_argument("output_data")
    return ap


def _overrides(args):
    from .config import parse_text

    out = {}
    for item in args.set:
        out.update(parse_text(item))
    for key in ("profile", "geometry", "M", "noise", "seed", "tau", "data", "output", "workers",
                "force", "herglotz_weighting", "averaged_polarization"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config, _overrides(args))
        if args.command == "check":
            return cmd_check(cfg)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "noise":
            return cmd_noise(cfg, args.input, args.output_data)
        if args.command == "image":
            return cmd_image(cfg)
        return cmd_run(cfg)
    except (ParseError, ValidationError, WoodAnomaly) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NoConvergence, DecompositionFailure, EmptySpectrum) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
