"""Command-line interface.

Subcommands: validate, greens, classify, density, average, certify, and
scenario remark2.  One JSON config document (see README) plus flag overrides
drives every run; results are emitted as JSON or RFC-4180 CSV with stable
column sets.

Exit codes: 0 success, 1 configuration/usage error, 2 numerical-resolution
failure under --strict (any UNDETERMINED or NUMERICALLY_UNRESOLVED outcome),
3 internal error.
"""

from __future__ import annotations

import sys
import traceback

import click
import numpy as np

from .averaging import (
    averaged_poisson_closed,
    averaged_poisson_quadrature,
    verify_abs_continuity,
)
from .blackbox import CHI_L, DELTA_L, DELTA_R, TAGS
from .boundary import (
    DIVERGENT,
    FINITE_NONZERO,
    UNDETERMINED,
    ZERO,
    boundary_value,
    classify_energy,
    point_mass,
    point_mass_scan,
)
from .certify import NUMERICALLY_UNRESOLVED, certify_no_sc, eigen_residual, remark2_model
from .config import RunConfig, build_run_config, load_config
from .emit import render_csv, render_json, write_output
from .errors import ConfigError, SpecboxError, UndeterminedLimitError
from .resolvent import green_all

__all__ = ["cli", "main"]


class StrictFailure(SpecboxError):
    """Raised when --strict is set and an unresolved outcome occurred."""


def _common_options(fn):
    decorators = [
        click.option("--config", "config_path", type=str, default=None,
                     help="Path to the JSON run configuration."),
        click.option("--lambda", "lam", type=float, default=None,
                     help="Left bond strength (overrides config)."),
        click.option("--nu", type=float, default=None,
                     help="Right bond strength (overrides config)."),
        click.option("--grid", "grid_flag", type=str, default=None,
                     help="Energy grid a:b:n (overrides config)."),
        click.option("--eps-min", type=float, default=None,
                     help="Smallest ladder epsilon."),
        click.option("--eps-max", type=float, default=None,
                     help="Largest ladder epsilon."),
        click.option("--nodes", type=int, default=None,
                     help="Oracle quadrature nodes per density piece."),
        click.option("--strict", is_flag=True, default=False,
                     help="Exit 2 if any outcome is numerically unresolved."),
        click.option("--seed", type=int, default=None,
                     help="PRNG seed recorded in the output."),
        click.option("--format", "out_format", type=click.Choice(["csv", "json"]),
                     default=None, help="Output format (default json)."),
        click.option("--out", "out_path", type=str, default=None,
                     help="Write output to this path instead of stdout."),
    ]
    for dec in reversed(decorators):
        fn = dec(fn)
    return fn


def _load(config_path, **overrides) -> RunConfig:
    raw = load_config(config_path) if config_path else None
    return build_run_config(raw, overrides)


def _emit(cfg: RunConfig, payload: dict, header: list[str], rows: list[list]) -> None:
    if cfg.out_format == "csv":
        write_output(render_csv(header, rows), cfg.out_path)
    else:
        write_output(render_json(payload), cfg.out_path)


def _meta(cfg: RunConfig, command: str) -> dict:
    return {
        "command": command,
        "coupling": {"lambda": cfg.coupling.lam, "nu": cfg.coupling.nu},
        "seed": cfg.seed,
    }


def _strict_gate(strict: bool, unresolved: int) -> None:
    if strict and unresolved:
        raise StrictFailure(f"{unresolved} unresolved outcome(s) under --strict")


@click.group()
def cli():
    """Spectral analysis of a finite system coupled to two reservoirs."""


@cli.command()
@_common_options
def validate(config_path, lam, nu, grid_flag, eps_min, eps_max, nodes, strict,
             seed, out_format, out_path):
    """Model diagnostics and the certified exceptional sets."""
    cfg = _load(config_path, lam=lam, nu=nu, grid=grid_flag, eps_min=eps_min,
                eps_max=eps_max, nodes=nodes, seed=seed,
                out_format=out_format, out_path=out_path)
    model = cfg.require_model()
    report = model.validate()
    exc = model.exceptional_sets
    payload = _meta(cfg, "validate")
    payload["diagnostics"] = report.to_dict()
    payload["exceptional_sets"] = exc.to_dict()
    rows = [["ok", report.ok]]
    rows += [[k, v] for k, v in report.to_dict().items() if k != "ok"]
    for key, value in exc.to_dict().items():
        rows.append([key, value if isinstance(value, str) else " ".join(f"{x:.17g}" for x in value)])
    _emit(cfg, payload, ["key", "value"], rows)


GREENS_HEADER = ["z_re", "z_im", "phi", "psi", "g_re", "g_im"]


@cli.command()
@_common_options
def greens(config_path, lam, nu, grid_flag, eps_min, eps_max, nodes, strict,
           seed, out_format, out_path):
    """Coupled Green's functions, all 16 pairs, over the energy grid."""
    cfg = _load(config_path, lam=lam, nu=nu, grid=grid_flag, eps_min=eps_min,
                eps_max=eps_max, nodes=nodes, seed=seed,
                out_format=out_format, out_path=out_path)
    model = cfg.require_model()
    grid = cfg.require_grid()
    zs = grid + 1j * cfg.greens_im_z
    values = green_all(model, cfg.coupling, zs)
    rows, entries = [], []
    for iz, z in enumerate(zs):
        pairs = {}
        for i, phi in enumerate(TAGS):
            for j, psi in enumerate(TAGS):
                g = values[iz, i, j]
                rows.append([float(z.real), float(z.imag), phi, psi,
                             float(g.real), float(g.imag)])
                pairs[f"{phi}|{psi}"] = [float(g.real), float(g.imag)]
        entries.append({"z": [float(z.real), float(z.imag)], "pairs": pairs})
    payload = _meta(cfg, "greens")
    payload["im_z"] = cfg.greens_im_z
    payload["table"] = entries
    _emit(cfg, payload, GREENS_HEADER, rows)


CLASSIFY_HEADER = [
    "E", "in_M0", "in_Ml", "in_Mr", "in_sigma_hs", "in_S", "in_N",
    "status_chi_l", "chi_l_re", "chi_l_im",
    "status_chi_r", "chi_r_re", "chi_r_im",
    "c2_applicable", "c2_satisfied", "c3_applicable", "c3_satisfied",
]


@cli.command()
@_common_options
def classify(config_path, lam, nu, grid_flag, eps_min, eps_max, nodes, strict,
             seed, out_format, out_path):
    """Per-energy set membership and boundary-value diagnostics."""
    cfg = _load(config_path, lam=lam, nu=nu, grid=grid_flag, eps_min=eps_min,
                eps_max=eps_max, nodes=nodes, seed=seed,
                out_format=out_format, out_path=out_path)
    model = cfg.require_model()
    grid = cfg.require_grid()
    tol = cfg.tolerances
    nu_val = cfg.coupling.nu if cfg.coupling.nu != 0.0 else None
    rows, entries, unresolved = [], [], 0
    for E in grid:
        c = classify_energy(model, float(E), nu=nu_val, ladder=cfg.ladder,
                            im_tol=tol.im_tol, div_tol=tol.div_tol,
                            zero_tol=tol.zero_tol)
        entries.append(c.to_dict())
        if UNDETERMINED in (c.rec_chi_l.status, c.rec_chi_r.status):
            unresolved += 1

        def _parts(rec):
            if rec.value is None:
                return None, None
            return float(rec.value.real), float(rec.value.imag)

        l_re, l_im = _parts(c.rec_chi_l)
        r_re, r_im = _parts(c.rec_chi_r)
        rows.append([
            float(E), c.in_m0, c.in_ml, c.in_mr, c.in_sigma_hs, c.in_s,
            c.in_n, c.rec_chi_l.status, l_re, l_im,
            c.rec_chi_r.status, r_re, r_im,
            None if c.c2 is None else c.c2["applicable"],
            None if c.c2 is None else c.c2["satisfied"],
            None if c.c3 is None else c.c3["applicable"],
            None if c.c3 is None else c.c3["satisfied"],
        ])
    payload = _meta(cfg, "classify")
    payload["points"] = entries
    _emit(cfg, payload, CLASSIFY_HEADER, rows)
    _strict_gate(strict, unresolved)


DENSITY_HEADER = ["E", "phi", "status", "ac_density", "point_mass"]


@cli.command()
@_common_options
def density(config_path, lam, nu, grid_flag, eps_min, eps_max, nodes, strict,
            seed, out_format, out_path):
    """Absolutely continuous densities over the grid plus a point-mass scan."""
    from .resolvent import green

    cfg = _load(config_path, lam=lam, nu=nu, grid=grid_flag, eps_min=eps_min,
                eps_max=eps_max, nodes=nodes, seed=seed,
                out_format=out_format, out_path=out_path)
    model = cfg.require_model()
    grid = cfg.require_grid()
    tol = cfg.tolerances
    rows, entries, unresolved = [], [], 0
    for E in grid:
        for phi in TAGS:
            rec = boundary_value(
                lambda z: green(model, cfg.coupling, phi, phi, z),
                float(E), cfg.ladder, div_tol=tol.div_tol, zero_tol=tol.zero_tol,
            )
            ac = pm = None
            if rec.status == FINITE_NONZERO:
                ac = max(rec.value.imag, 0.0) / np.pi
            elif rec.status == ZERO:
                ac = 0.0
            elif rec.status == DIVERGENT:
                try:
                    pm = point_mass(model, cfg.coupling, phi, float(E), cfg.ladder)
                except UndeterminedLimitError:
                    unresolved += 1
            else:
                unresolved += 1
            rows.append([float(E), phi, rec.status, ac, pm])
            entries.append({"E": float(E), "phi": phi, "status": rec.status,
                            "ac_density": ac, "point_mass": pm})
    atoms = []
    for phi in (DELTA_L, DELTA_R):
        for E0, w in point_mass_scan(model, cfg.coupling, phi, cfg.ladder,
                                     nodes_per_piece=min(cfg.nodes_per_piece, 80)):
            atoms.append({"phi": phi, "E": E0, "weight": w})
            rows.append([E0, phi, "ATOM_SCAN", None, w])
    payload = _meta(cfg, "density")
    payload["points"] = entries
    payload["atom_scan"] = atoms
    _emit(cfg, payload, DENSITY_HEADER, rows)
    _strict_gate(strict, unresolved)


AVERAGE_HEADER = ["E", "phi", "closed", "quadrature", "rel_diff", "ladder_status"]


@cli.command()
@_common_options
def average(config_path, lam, nu, grid_flag, eps_min, eps_max, nodes, strict,
            seed, out_format, out_path):
    """Averaged Poisson transforms: closed form vs quadrature, plus the
    absolute-continuity scan."""
    cfg = _load(config_path, lam=lam, nu=nu, grid=grid_flag, eps_min=eps_min,
                eps_max=eps_max, nodes=nodes, seed=seed,
                out_format=out_format, out_path=out_path)
    model = cfg.require_model()
    grid = cfg.require_grid()
    eps = cfg.average_eps
    report = verify_abs_continuity(model, cfg.coupling.nu, grid, cfg.ladder)
    status_by_key = {(p["E"], p["phi"]): p["status"] for p in report.points}
    rows, entries, unresolved = [], [], 0
    for E in grid:
        for phi in TAGS:
            kappa = cfg.coupling.nu if phi in (CHI_L, DELTA_L) else cfg.coupling.lam
            closed = averaged_poisson_closed(model, kappa, phi, float(E), eps)
            quadr = averaged_poisson_quadrature(
                model, kappa, phi, float(E), eps, tol=cfg.tolerances.quad_tol
            )
            rel = abs(closed - quadr) / max(abs(closed), abs(quadr), 1e-300)
            status = status_by_key.get((float(E), phi))
            if status == UNDETERMINED:
                unresolved += 1
            rows.append([float(E), phi, closed, quadr, rel, status])
            entries.append({"E": float(E), "phi": phi, "closed": closed,
                            "quadrature": quadr, "rel_diff": rel,
                            "ladder_status": status})
    payload = _meta(cfg, "average")
    payload["eps"] = eps
    payload["table"] = entries
    payload["abs_continuity"] = report.to_dict()
    if cfg.out_format == "csv":
        click.echo(f"abs_continuity verdict: {report.verdict}", err=True)
    _emit(cfg, payload, AVERAGE_HEADER, rows)
    _strict_gate(strict, unresolved)


CERTIFY_HEADER = ["E", "verdict", "in_scope", "abs_D",
                  "aux1_lhs", "aux1_rhs", "aux2_lhs", "aux2_rhs"]


@cli.command()
@_common_options
def certify(config_path, lam, nu, grid_flag, eps_min, eps_max, nodes, strict,
            seed, out_format, out_path):
    """Pointwise no-singular-continuous certificate over the grid."""
    cfg = _load(config_path, lam=lam, nu=nu, grid=grid_flag, eps_min=eps_min,
                eps_max=eps_max, nodes=nodes, seed=seed,
                out_format=out_format, out_path=out_path)
    model = cfg.require_model()
    grid = cfg.require_grid()
    cert = certify_no_sc(model, cfg.coupling, grid, cfg.ladder,
                         d_floor=cfg.tolerances.d_floor)
    rows = [[p.E, p.verdict, p.in_scope, p.abs_D,
             p.aux1_lhs, p.aux1_rhs, p.aux2_lhs, p.aux2_rhs]
            for p in cert.points]
    payload = _meta(cfg, "certify")
    payload["certificate"] = cert.to_dict()
    _emit(cfg, payload, CERTIFY_HEADER, rows)
    _strict_gate(strict, cert.counts()[NUMERICALLY_UNRESOLVED])


@cli.group()
def scenario():
    """Built-in reference scenarios."""


@scenario.command("remark2")
@_common_options
def scenario_remark2(config_path, lam, nu, grid_flag, eps_min, eps_max, nodes,
                     strict, seed, out_format, out_path):
    """Persistent zero mode of the reference model: residual, atom weight,
    and the two independent routes to the same weight."""
    cfg = _load(config_path, lam=lam, nu=nu, grid=grid_flag, eps_min=eps_min,
                eps_max=eps_max, nodes=nodes, seed=seed,
                out_format=out_format, out_path=out_path)
    model = remark2_model()
    nodes_pp = cfg.nodes_per_piece
    residual, weight = eigen_residual(model, cfg.coupling, nodes_pp)
    atom = point_mass(model, cfg.coupling, DELTA_L, 0.0, cfg.ladder)
    payload = _meta(cfg, "scenario remark2")
    payload.update({
        "nodes_per_piece": nodes_pp,
        "residual": residual,
        "weight_estimate": weight,
        "point_mass_at_zero": atom,
        "cross_check_abs_diff": abs(weight - atom),
        "expected_weight": 1.0 / (1.0 + cfg.coupling.lam**2 + cfg.coupling.nu**2),
        "exceptional_sets": model.exceptional_sets.to_dict(),
    })
    rows = [[k, v] for k, v in payload.items() if k not in ("command", "coupling")]
    rows.insert(0, ["lambda", cfg.coupling.lam])
    rows.insert(1, ["nu", cfg.coupling.nu])
    _emit(cfg, payload, ["key", "value"], rows)


def main(argv=None) -> int:
    """Console entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except StrictFailure as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except click.UsageError as exc:
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except SpecboxError as exc:
        click.echo(f"internal numerical error: {exc}", err=True)
        return 3
    except Exception:
        traceback.print_exc()
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
