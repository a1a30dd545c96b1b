"""Command-line entry point.

One command per benchmark or diagnostic; every run writes its artifacts
followed by a manifest (manifest last, listing every emitted file).  Given
the same config and seed, runs are bitwise deterministic.

Exit codes: 0 success, 2 configuration error (message names the offending
key), 3 unwritable output directory.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, InfomechError
from .opcore import FLOAT_FMT, load_operator_csv
from .prior import PriorModel, lis_to_json, weak_gain, weak_projector
from .spectral import mass_weighted_eig, prior_preconditioned_eig, save_modeset_csv, sym_eig

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError("config", f"file not found: {path}")
    text = p.read_bytes()
    if p.suffix == ".json":
        return json.loads(text)
    try:
        return tomllib.loads(text.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"invalid TOML: {exc}") from exc


class RunManifest:
    """Collects emitted artifacts; written last so it lists everything."""

    def __init__(self, command: str, config_path: str | None, seed: int | None, out_dir: Path, config_echo: dict):
        self.payload = {
            "command": command,
            "config": config_path,
            "seed": seed,
            "out_dir": str(out_dir),
            "tool_version": __version__,
            "config_echo": config_echo,
            "artifacts": [],
        }
        self.out_dir = out_dir

    def add(self, name: str, fmt: str, description: str) -> Path:
        self.payload["artifacts"].append({"file": name, "format": fmt, "description": description})
        return self.out_dir / name

    def write(self) -> None:
        with open(self.out_dir / "manifest.json", "w") as fh:
            json.dump(self.payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _prepare_out(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory not writable: {exc}", file=sys.stderr)
        raise SystemExit(3)
    return out


def _write_csv(path: Path, header: str | None, rows) -> None:
    with open(path, "w") as fh:
        if header:
            fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(FLOAT_FMT % v for v in np.atleast_1d(row)) + "\n")


def _write_kernel_csv(path: Path, rho: float, kernel: np.ndarray) -> None:
    _write_csv(path, f"# kernel rho={FLOAT_FMT % rho} n={kernel.shape[0]}", kernel)


def _get(cfg: dict, key: str, default, kind=float):
    if key not in cfg:
        return default
    try:
        return kind(cfg[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"expected {kind.__name__}, got {cfg[key]!r}") from exc


# ---------------------------------------------------------------------------
# subcommands


def cmd_beam_analytic(args) -> int:
    from . import beam_analytic as ba

    cfg = load_config(args.config)
    rho = args.rho if args.rho is not None else _get(cfg, "rho", 0.25)
    grid = args.grid if args.grid is not None else int(_get(cfg, "grid", 200, int))
    if not 0.0 < rho < 1.0:
        raise ConfigError("rho", "must lie strictly inside (0, 1)")
    spec = ba.BeamSpec(
        length=_get(cfg, "length", 1.0),
        load=_get(cfg, "load", 1.0),
        sigma=_get(cfg, "sigma", 1.0),
        rho=rho,
        ei_ref=_get(cfg, "ei_ref", 1.0),
    )
    out = _prepare_out(args.out)
    manifest = RunManifest("beam-analytic", args.config, None, out, {"rho": rho, "grid": grid})

    s_grid, density = ba.density_curve(spec, grid)
    _write_csv(manifest.add("density.csv", "csv", "pointwise information density (s, value); sensor row doubled"),
               "# density rho=" + (FLOAT_FMT % rho), np.column_stack([s_grid, density]))

    s_mid = ba.midpoint_grid(grid)
    kernel = ba.full_kernel(spec, s_mid[:, None], s_mid[None, :])
    _write_kernel_csv(manifest.add("kernel.csv", "csv", "full information kernel on the midpoint grid"), rho, kernel)

    dens_interior = ba.diag_density(spec, s_mid)
    summary = {
        "rho": rho,
        "kappa_v": spec.kappa_v,
        "jump_ratio": ba.jump_ratio(rho),
        "argmax_density": float(s_mid[int(np.argmax(dens_interior))]),
        "density_left_limit": ba.diag_density_onesided(spec)[0],
        "density_right_limit": ba.diag_density_onesided(spec)[1],
    }
    with open(manifest.add("summary.json", "json", "scalar diagnostics"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest.write()
    return 0


def cmd_beam_two_span(args) -> int:
    from . import beam_fe as bf

    cfg = load_config(args.config)
    rho = args.rho if args.rho is not None else _get(cfg, "rho", 0.25)
    n_el = int(_get(cfg, "elements_per_span", 64, int))
    span = _get(cfg, "span", 1.0)
    n_z = int(_get(cfg, "load_positions", 81, int))
    sigma = _get(cfg, "sigma", 1.0)
    param = str(cfg.get("param", "compliance"))
    if param not in ("compliance", "ei"):
        raise ConfigError("param", "must be 'compliance' or 'ei'")
    mesh = bf.two_span_mesh(span, n_el, _get(cfg, "ei0", 1.0))
    cases = bf.load_sweep(mesh.length, n_z, magnitude=_get(cfg, "load", 1.0), sigma=sigma)
    xs, kernel = bf.assemble_kernel(mesh, rho * span, cases, param=param)

    out = _prepare_out(args.out)
    manifest = RunManifest(
        "beam-two-span", args.config, None, out,
        {"rho": rho, "elements_per_span": n_el, "span": span, "load_positions": n_z, "param": param},
    )
    _write_csv(manifest.add("density.csv", "csv", "kernel diagonal over sample points (x, value)"),
               "# density two-span", np.column_stack([xs, np.diag(kernel)]))
    _write_kernel_csv(manifest.add("kernel.csv", "csv", "two-span information kernel at element Gauss points"),
                      rho, kernel)
    manifest.write()
    return 0


def cmd_fuse_benchmark(args) -> int:
    from . import fusion

    cfg = load_config(args.config)
    allowed = {
        "length", "ei0", "n_elements", "damage_center", "damage_width", "damage_depth",
        "static_sensors", "n_load_positions", "load_magnitude", "sigma_tilt", "rho_a",
        "damping_ratio", "dyn_sensor", "dyn_excitations", "n_frequencies", "sigma_log",
        "n_modes", "gamma_pr", "eps_pr",
    }
    for key in cfg:
        if key not in allowed:
            raise ConfigError(key, "unknown fusion benchmark setting")
    for key in ("static_sensors", "dyn_excitations"):
        if key in cfg:
            cfg[key] = tuple(float(v) for v in cfg[key])
    for key in ("n_elements", "n_load_positions", "n_frequencies", "n_modes"):
        if key in cfg:
            cfg[key] = int(cfg[key])
    try:
        bench = fusion.FusionBenchmark(**cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError("benchmark", str(exc)) from exc
    blocks = args.blocks

    out = _prepare_out(args.out)
    manifest = RunManifest("fuse-benchmark", args.config, args.seed, out,
                           {**cfg, "blocks": blocks})
    data = fusion.synthesize_data(bench, args.seed)
    result = fusion.gauss_newton_map(bench, data, blocks)

    x = bench.midpoints
    ei_true = bench.ei0 * np.exp(bench.true_log_stiffness())
    ei_map = bench.ei0 * np.exp(result.p_map)
    band_lo = bench.ei0 * np.exp(result.p_map - result.band)
    band_hi = bench.ei0 * np.exp(result.p_map + result.band)
    _write_csv(manifest.add("reconstruction.csv", "csv", "x, EI_true, EI_map, band_lo, band_hi"),
               "# reconstruction blocks=" + blocks,
               np.column_stack([x, ei_true, ei_map, band_lo, band_hi]))

    dens = fusion.density_report(bench)
    _write_csv(manifest.add("densities.csv", "csv", "x, static, dynamic, hybrid densities"),
               "# densities", np.column_stack([dens["x"], dens["static"], dens["dynamic"], dens["hybrid"]]))

    convergence = {
        "blocks": blocks,
        "iterations": result.iterations,
        "converged": result.converged,
        "misfit_history": [float(v) for v in result.misfit_history],
    }
    with open(manifest.add("convergence.json", "json", "Gauss-Newton convergence record"), "w") as fh:
        json.dump(convergence, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest.write()
    return 0


def cmd_damage2d(args) -> int:
    from . import damage2d as dd

    cfg = load_config(args.config)
    kwargs = {}
    for key, value in cfg.items():
        if key not in dd.Damage2DConfig.__dataclass_fields__:
            raise ConfigError(key, "unknown damage2d setting")
        field_type = dd.Damage2DConfig.__dataclass_fields__[key].type
        kwargs[key] = int(value) if field_type == "int" else float(value)
    try:
        config = dd.Damage2DConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError("damage2d", str(exc)) from exc
    k = args.k if args.k is not None else config.k_modes

    out = _prepare_out(args.out)
    manifest = RunManifest("damage2d", args.config, args.seed, out, {**cfg, "k": k})
    model = dd.PlaneStressModel(config)
    d_true = dd.true_damage_field(config)
    data = dd.synthesize_observations(config, args.seed)
    report = dd.mode_report(config, k=k)
    d_map = dd.subspace_map(config, data, report.modes, k=k, model=model)

    dd.save_field_csv(d_true, manifest.add("true_field.csv", "csv", "true damage field"))
    dd.save_field_csv(d_map.reshape(config.ny_nodes, config.nx_nodes),
                      manifest.add("map_field.csv", "csv", "subspace MAP damage field"))
    for i in range(k):
        dd.save_field_csv(report.maps[i], manifest.add(f"mode_{i + 1}.csv", "csv", f"information mode {i + 1} map"))
    spectrum = {
        "eigenvalues": [float(v) for v in report.modes.eigenvalues],
        "spectrum_ratio": report.spectrum_ratio,
        "k": k,
        "grid": [config.ny_nodes, config.nx_nodes],
        "n_observations": config.n_observations,
    }
    with open(manifest.add("spectrum.json", "json", "leading eigenvalues and ratio"), "w") as fh:
        json.dump(spectrum, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest.write()
    return 0


def cmd_modes(args) -> int:
    op = load_operator_csv(args.input)
    if args.metric == "euclidean":
        ms = sym_eig(op, args.k)
    elif args.metric == "mass":
        if args.mass is None:
            raise ConfigError("mass", "mass metric needs --mass CSV")
        mass = np.loadtxt(args.mass, delimiter=",", ndmin=2)
        ms = mass_weighted_eig(op, mass, args.k)
    elif args.metric == "prior":
        if args.prior is None:
            raise ConfigError("prior", "prior metric needs --prior precision CSV")
        q = np.loadtxt(args.prior, delimiter=",", ndmin=2)
        ms = prior_preconditioned_eig(op, PriorModel.from_precision(q), args.k)
    else:
        raise ConfigError("metric", f"unknown metric '{args.metric}'")
    out = _prepare_out(args.out)
    manifest = RunManifest("modes", None, None, out,
                           {"input": args.input, "k": args.k, "metric": args.metric})
    save_modeset_csv(ms, manifest.add("modes.csv", "csv", "eigenvalues row then mode components"))
    manifest.write()
    return 0


def cmd_weak_gain(args) -> int:
    from .opcore import ObservationBlock, assemble_info

    cfg = load_config(args.config)
    for key in ("prior_precision", "existing_jacobian", "existing_noise", "candidate_jacobian", "candidate_noise"):
        if key not in cfg:
            raise ConfigError(key, "required for weak-gain")
    q = np.asarray(cfg["prior_precision"], dtype=float)
    prior = PriorModel.from_precision(q)
    existing = ObservationBlock(np.asarray(cfg["existing_jacobian"], dtype=float),
                                np.asarray(cfg["existing_noise"], dtype=float), label="existing")
    candidate = ObservationBlock(np.asarray(cfg["candidate_jacobian"], dtype=float),
                                 np.asarray(cfg["candidate_noise"], dtype=float), label="candidate")
    tau_weak = args.tau if args.tau is not None else _get(cfg, "tau_weak", 1e-2)
    ms = prior_preconditioned_eig(assemble_info(existing), prior, prior.dim)
    projector = weak_projector(ms, tau_weak)
    gain_op, gain = weak_gain(candidate, prior, projector)
    out = _prepare_out(args.out)
    manifest = RunManifest("weak-gain", args.config, None, out, {"tau_weak": tau_weak})
    payload = {
        "tau_weak": tau_weak,
        "scalar_gain": gain,
        "weak_dimension": int(round(np.trace(projector))),
        "prior_relative_eigenvalues": [float(v) for v in ms.eigenvalues],
    }
    with open(manifest.add("gain.json", "json", "weak-direction gain summary"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_csv(manifest.add("gain_operator.csv", "csv", "projected candidate information (whitened coords)"),
               None, gain_op)
    manifest.write()
    return 0


def cmd_schur(args) -> int:
    from .opcore import JointInfoBlocks, save_operator_csv, schur_complement

    cfg = load_config(args.config)
    for key in ("i_mm", "i_mn", "i_nn"):
        if key not in cfg:
            raise ConfigError(key, "required joint information block")
    joint = JointInfoBlocks(
        np.asarray(cfg["i_mm"], dtype=float),
        np.asarray(cfg["i_mn"], dtype=float),
        np.asarray(cfg["i_nn"], dtype=float),
    )
    op = schur_complement(joint, pinv_tol=args.pinv_tol)
    out = _prepare_out(args.out)
    manifest = RunManifest("schur", args.config, None, out, {"pinv_tol": args.pinv_tol})
    save_operator_csv(op, manifest.add("schur.csv", "csv", "effective interest-parameter information"))
    manifest.write()
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="infomech",
        description="Information-operator identifiability diagnostics and benchmarks",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=False):
        p.add_argument("--config", default=None, help="TOML or JSON configuration file")
        p.add_argument("--out", default="out", help="output directory")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("beam-analytic", help="closed-form beam density and kernel")
    common(p)
    p.add_argument("--rho", type=float, default=None, help="normalized sensor position")
    p.add_argument("--grid", type=int, default=None, help="evaluation grid size")
    p.set_defaults(func=cmd_beam_analytic)

    p = sub.add_parser("beam-two-span", help="two-span FE kernel and density")
    common(p)
    p.add_argument("--rho", type=float, default=None, help="span-normalized sensor position")
    p.set_defaults(func=cmd_beam_two_span)

    p = sub.add_parser("fuse-benchmark", help="static/dynamic/hybrid beam identification")
    common(p, seed=True)
    p.add_argument("--blocks", choices=("static", "dynamic", "hybrid"), default="hybrid")
    p.set_defaults(func=cmd_fuse_benchmark)

    p = sub.add_parser("damage2d", help="plane-stress damage reconstruction")
    common(p, seed=True)
    p.add_argument("--k", type=int, default=None, help="retained information modes")
    p.set_defaults(func=cmd_damage2d)

    p = sub.add_parser("modes", help="eigenmodes of a stored operator CSV")
    p.add_argument("--input", required=True, help="info_operator CSV")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--metric", choices=("euclidean", "mass", "prior"), default="euclidean")
    p.add_argument("--mass", default=None, help="mass matrix CSV (metric=mass)")
    p.add_argument("--prior", default=None, help="prior precision CSV (metric=prior)")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("weak-gain", help="weak-direction gain of a candidate block")
    common(p)
    p.add_argument("--tau", type=float, default=None, help="weak-subspace threshold")
    p.set_defaults(func=cmd_weak_gain)

    p = sub.add_parser("schur", help="nuisance elimination by Schur complement")
    common(p)
    p.add_argument("--pinv-tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_schur)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InfomechError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
