"""Batch front-end: ``qlga <subcommand> --config PATH --out DIR``.

Exit codes: 0 success, 2 configuration error, 3 invariant breach, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as an
from . import dynamics as dyn
from . import state as st
from ._backend import set_num_threads
from .config import (
    ConfigError,
    ExperimentConfig,
    default_config,
    kinetic_of,
    collision_of,
    lattice_of,
    parse_config,
    render,
    run_config_of,
)
from .lattice import BRICK1D, QLGA, build_lattice

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_IO = 4

SUBCOMMANDS = {
    "run": ("run-brick", "run-qlga"),
    "dispersion": ("dispersion",),
    "converge": ("converge",),
    "oracle-check": ("oracle-check",),
    "gate-count": ("gate-count",),
    "m-inverse": ("m-inverse",),
}

log = logging.getLogger("qlga")


def fmt(x) -> str:
    """17-significant-digit text for floats; plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _json_default(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def write_atomic(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def provenance_lines(cfg: ExperimentConfig) -> list[str]:
    return [f"qlga {__version__}"] + render(cfg).rstrip("\n").split("\n")


def csv_text(cfg: ExperimentConfig, columns, rows) -> str:
    """CSV with the resolved config as leading ``#`` comment lines."""
    buf = io.StringIO()
    for line in provenance_lines(cfg):
        buf.write(f"# {line}".rstrip() + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def json_text(cfg: ExperimentConfig, payload: dict) -> str:
    doc = {"version": __version__, "config": cfg.as_dict(), **payload}
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def read_csv(path) -> tuple[list[str], list[dict]]:
    """Read a CSV written by this tool; returns (comment lines, rows)."""
    comments, body = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            (comments if line.startswith("#") else body).append(line)
    rows = list(csv.DictReader(body))
    return [c[2:].rstrip("\n") for c in comments], rows


# snapshots ----------------------------------------------------------------------


def snapshot_text(state, lattice, atol: float = 0.0) -> str:
    """Header of ``# key = value`` lines, then ``occupancy,re,im`` rows (occupancy space-separated)."""
    if isinstance(state, st.DenseState):
        raise TypeError("snapshots are written from sector states")
    head = {
        "N": state.num_qbits,
        "n": state.n,
        "statistics": state.statistics,
        "d": lattice.d,
        "l": lattice.l,
        "epsilon": fmt(lattice.epsilon),
        "mode": lattice.mode,
    }
    buf = io.StringIO()
    for k, v in head.items():
        buf.write(f"# {k} = {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["occupancy", "re", "im"])
    for occ, amp in state.items(atol):
        w.writerow([" ".join(str(q) for q in occ), fmt(amp.real), fmt(amp.imag)])
    return buf.getvalue()


def read_snapshot(path) -> st.SectorState:
    comments, rows = read_csv(path)
    head = dict(line.split(" = ", 1) for line in comments)
    lattice = build_lattice(int(head["d"]), int(head["l"]), float(head["epsilon"]), head["mode"])
    if lattice.num_qbits != int(head["N"]):
        raise ValueError("snapshot header is inconsistent")
    out = st.empty_sector(lattice, int(head["n"]), head["statistics"])
    for row in rows:
        occ = [int(q) for q in row["occupancy"].split()]
        out.vector[out.basis.rank(occ)] = complex(float(row["re"]), float(row["im"]))
    return out


# experiments --------------------------------------------------------------------


def _run(cfg: ExperimentConfig, out: Path) -> dict:
    rc = run_config_of(cfg)
    if rc.representation == "dense" and rc.lattice.num_qbits > cfg["tolerance"]["dense_limit"]:
        raise ConfigError([f"[run] dense representation exceeds the dense limit ({rc.lattice.num_qbits} q-bits)"])
    result = dyn.run(rc)
    state = result.state
    columns = list(result.trace[0].keys())
    write_atomic(out / "trace.csv", csv_text(cfg, columns, result.trace))
    if isinstance(state, st.SectorState):
        sector = state
    else:
        sector = st.dense_to_sector(state, int(round(st.particle_number(state))), rc.lattice)
    write_atomic(out / "snapshot.csv", snapshot_text(sector, rc.lattice))
    shots = cfg["run"]["shots"]
    summary = {
        "elapsed_time": result.elapsed_time,
        "final": result.trace[-1],
        "gate_count": dyn.gate_count(rc.lattice, sector.n, rc.external is not None, rc.pair is not None).as_dict(),
    }
    if shots:
        summary["samples"] = st.sample_measurement(state, cfg.seed, shots)
    write_atomic(out / "summary.json", json_text(cfg, summary))
    return summary


def _dispersion(cfg: ExperimentConfig, out: Path) -> dict:
    lattice = lattice_of(cfg)
    model = kinetic_of(cfg) if lattice.mode == BRICK1D else collision_of(cfg)
    disp = cfg["dispersion"]
    res = an.measure_dispersion(model, lattice, disp["k_list"], disp["steps"], cfg["run"]["statistics"])
    cols = ["k", "kappa", "omega_measured", "omega_model", "residual"]
    write_atomic(out / "dispersion.csv", csv_text(cfg, cols, list(res.rows())))
    summary = {
        "fitted_mass": res.mass,
        "target_mass": res.target_mass,
        "rel_error": res.rel_error,
        "coefficient": res.coefficient,
        "fit_residual": res.residual,
        "ambiguous_k": res.ambiguous,
    }
    write_atomic(out / "summary.json", json_text(cfg, summary))
    return summary


def _converge(cfg: ExperimentConfig, out: Path) -> dict:
    c = cfg["converge"]
    potential = None
    if c["potential"] == "well":
        middle, depth, width = c["length"] / 2, c["depth"], c["well_width"]

        def potential(x):
            return -depth * np.exp(-((x - middle) ** 2) / (2 * width**2))

    res = an.convergence_study(
        kinetic_of(cfg), c["length"], c["time"], c["h"], c["levels"],
        center=c["center"],
        width=c["width"], momentum=c["momentum"], potential=potential,
        refine=c["refine"], reference_dt=c["reference_dt"],
    )
    rows = [
        {"epsilon": e, "l": int(round(c["length"] / e)), "steps": int(round(c["time"] / e**2)), "error": err}
        for e, err in zip(res.epsilons, res.errors)
    ]
    write_atomic(out / "convergence.csv", csv_text(cfg, ["epsilon", "l", "steps", "error"], rows))
    summary = {
        "order": res.order,
        "reference_error": res.reference_error,
        "reference_ok": res.reference_ok,
        "reference_norm_drift": res.reference_norm_drift,
        "run_norm_drift": res.run_norm_drift,
    }
    write_atomic(out / "summary.json", json_text(cfg, summary))
    return summary


def _oracle_check(cfg: ExperimentConfig, out: Path) -> dict:
    rc = run_config_of(cfg)
    if rc.lattice.num_qbits > cfg["tolerance"]["dense_limit"]:
        raise ConfigError([f"[lattice] {rc.lattice.num_qbits} q-bits exceed the dense limit"])
    dev = an.dense_vs_sector_check(rc)
    summary = {"max_deviation": dev, "num_qbits": rc.lattice.num_qbits, "steps": rc.steps}
    write_atomic(out / "summary.json", json_text(cfg, summary))
    return summary


def _gate_count(cfg: ExperimentConfig, out: Path) -> dict:
    lat = cfg["lattice"]
    n = cfg["gate-count"]["n"]
    if lat["mode"] == QLGA:
        record = dyn.gate_count_formula(lat["d"], lat["l"], n)
    else:
        record = dyn.gate_count(lattice_of(cfg), n)
    summary = {"counts": record.as_dict()}
    write_atomic(out / "gate_count.json", json_text(cfg, summary))
    return summary


def _m_inverse(cfg: ExperimentConfig, out: Path) -> dict:
    m = cfg["m-inverse"]
    rows, hists = [], {}
    for l in m["l_list"]:
        r = an.nonlocal_M_density(m["a"], m["b"], l, m["threshold"])
        rows.append({
            "l": l,
            "density": r.density,
            "unitary": r.unitary,
            "unitarity_defect": r.unitarity_defect,
            "max_method_gap": r.max_method_gap,
        })
        hists[str(l)] = {"log10_bin_edges": r.bin_edges, "counts": r.histogram}
    cols = ["l", "density", "unitary", "unitarity_defect", "max_method_gap"]
    write_atomic(out / "m_inverse.csv", csv_text(cfg, cols, rows))
    summary = {"results": rows, "histograms": hists}
    write_atomic(out / "summary.json", json_text(cfg, summary))
    return summary


EXPERIMENTS = {
    "run-brick": _run,
    "run-qlga": _run,
    "dispersion": _dispersion,
    "converge": _converge,
    "oracle-check": _oracle_check,
    "gate-count": _gate_count,
    "m-inverse": _m_inverse,
}


def run_experiment(cfg: ExperimentConfig, out) -> int:
    """Run one experiment, writing its artifacts under ``out``; returns the exit status."""
    out = Path(out)
    try:
        EXPERIMENTS[cfg.kind](cfg, out)
    except ConfigError as exc:
        for e in exc.errors:
            log.error("config: %s", e)
        return EXIT_CONFIG
    except dyn.InvariantBreach as exc:
        log.error("invariant breach: %s", exc)
        return EXIT_INVARIANT
    except OSError as exc:
        log.error("i/o failure: %s", exc)
        return EXIT_IO
    except (ValueError, np.linalg.LinAlgError) as exc:
        # parameter combinations the validator cannot see, e.g. a singular M
        log.error("config: %s", exc)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qlga", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"qlga {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="experiment config file")
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("--seed", type=int, help="override [experiment] seed")
        s.add_argument("--threads", type=int, default=1, help="worker threads for compiled kernels")
    return p


def load_config(command: str, path: Path | None, seed: int | None) -> ExperimentConfig:
    allowed = SUBCOMMANDS[command]
    if path is None:
        cfg = default_config().with_overrides({"experiment": {"kind": allowed[0]}})
    else:
        text = Path(path).read_text(encoding="utf-8")
        cfg = parse_config(text, kind=None if command == "run" else allowed[0])
        if cfg.kind not in allowed:
            raise ConfigError([f"[experiment] kind {cfg.kind!r} does not match subcommand {command!r}"])
    if seed is not None:
        if seed < 0 or seed >= 2**64:
            raise ConfigError(["--seed must be an unsigned 64-bit integer"])
        cfg = cfg.with_overrides({"experiment": {"seed": seed}})
    return cfg


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config, args.seed)
    except ConfigError as exc:
        for e in exc.errors:
            log.error("config: %s", e)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_IO
    set_num_threads(args.threads)
    status = run_experiment(cfg, args.out)
    if status == EXIT_OK:
        log.info("%s finished; results in %s", cfg.kind, args.out)
    return status


if __name__ == "__main__":
    sys.exit(main())
