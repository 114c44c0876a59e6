"""Command-line runs producing CSV/JSON artifacts plus a run manifest."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .asymptotics import (
    CountSeries,
    SectorSpec,
    boundary_integral,
    fit_asymptotic,
    fundamental_area,
    haar_kappa,
    highest_weight_component,
    predicted_coefficient,
    v_plus,
    vol_ball,
    vol_gamma_g,
)
from .cusp import canonical_basepoint
from .equidist import correlation_decay_probe, equidist_report, haar_probability_integral, reference_bump
from .norms import NormSpec
from .orbits import (
    PolyVec,
    QuadForm,
    box_enumerate_disc,
    count_forms_box,
    count_orbit_series,
    orbit_partition,
    poly_action_matrix,
    split_form_group,
    write_orbit_csv,
    orbit_points_within,
)

SCHEMA_VERSION = 1
COMMANDS = ("count-box", "count-orbit", "predict", "fit", "equidist", "volumes", "probe-decay")
CONSTANT_KEYS = ("kappa", "vol_gamma_g", "boundary_integral", "predicted_c", "fit_c", "fit_c_prime", "relative_error")

log = logging.getLogger("orbitcount")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    disc: int | None = None
    m: int = 1
    d: float | None = None
    norm: str = "sup"
    schedule: tuple[float, ...] = ()
    sector: str = ""
    slack: float = 2.0
    saturation: float = 1000.0
    samples: int | None = None
    input: str | None = None
    out: str | None = None
    dump: str | None = None
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.m < 1:
            raise UsageError("--m must be positive")
        if self.norm not in ("sup", "euclidean"):
            raise UsageError("--norm must be 'sup' or 'euclidean'")
        if self.slack < 1:
            raise UsageError("--slack must be at least 1")
        if self.workers < 1:
            raise UsageError("--workers must be positive")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["schedule"] = list(self.schedule)
        return out


def geometric_schedule(tmin: float, tmax: float, steps: int) -> tuple[float, ...]:
    if steps < 1 or tmin <= 0 or tmax < tmin:
        raise UsageError("need 0 < tmin <= tmax and tsteps >= 1")
    if steps == 1:
        return (float(tmin),)
    return tuple(float(x) for x in np.geomspace(tmin, tmax, steps))


def _sector(cfg: RunConfig) -> SectorSpec:
    return SectorSpec.parse(cfg.sector) if cfg.sector else SectorSpec.full()


def _square_root(D: int) -> int | None:
    if D <= 0:
        return None
    r = math.isqrt(D)
    return r if r * r == D else None


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def _count_csv(ts, counts, c: float | None, m: int) -> str:
    rows = []
    for T, n in zip(ts, counts):
        pred = c * math.log(T) * T ** (1.0 / m) if c is not None and T > 1 else ""
        rows.append((T, int(n), pred))
    return _csv_text(["T", "N", "predicted"], rows)


def _constants(**values) -> dict:
    out = {"schema_version": SCHEMA_VERSION}
    out.update({k: None for k in CONSTANT_KEYS})
    out.update(values)
    return out


def _json_text(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _require_schedule(cfg: RunConfig) -> tuple[float, ...]:
    if not cfg.schedule:
        raise UsageError("this command needs a T-schedule (--tmin/--tmax/--tsteps or --schedule)")
    return cfg.schedule


def forms_prediction(D: int, norm: NormSpec, sector: SectorSpec, saturation: float) -> dict:
    """Predicted coefficient of T log T for all forms of square discriminant D, summed over classes."""
    root = _square_root(D)
    if root is None:
        raise UsageError("the T log T prediction applies to positive square discriminants")
    reps = box_enumerate_disc(D, 2 * root + 2, norm)
    classes = orbit_partition(reps, saturation, norm).classes
    total_i = total_c = 0.0
    for cls in classes:
        integral, c = class_prediction(min(cls), norm, sector)
        total_i += integral
        total_c += c
    return {"predicted_c": total_c, "boundary_integral": total_i, "classes": len(classes)}


def class_prediction(q: QuadForm, norm: NormSpec, sector: SectorSpec) -> tuple[float, float]:
    """(boundary integral, T log T coefficient) for the orbit of one split form q."""
    root = math.sqrt(q.disc)
    v_top = highest_weight_component((0.5 * root, 0.0, -0.5 * root), 1, "poly")
    nq = norm.precompose(poly_action_matrix(split_form_group(q), 1))
    integral = boundary_integral(v_top, 1, nq, sector, action="poly")
    return integral, predicted_coefficient(1, nq, sector, 2, vol_gamma_g(), v_top=v_top, action="poly")


def power_prediction(m: int, norm: NormSpec, sector: SectorSpec) -> dict:
    """Prediction for the orbit of (x^2 - y^2)^m; its stabiliser has order 2 (m odd) or 4 (m even)."""
    stab = 2 if m % 2 else 4
    v_top = highest_weight_component(PolyVec.split_power(m), m, "poly")
    return {
        "predicted_c": predicted_coefficient(m, norm, sector, stab, action="poly"),
        "boundary_integral": boundary_integral(v_top, m, norm, sector, action="poly"),
        "stab_order": stab,
    }


def _seed_vector(cfg: RunConfig):
    if cfg.disc is not None:
        D = cfg.disc
        if D % 4 in (2, 3):
            raise UsageError("no integral forms have discriminant 2 or 3 mod 4")
        return QuadForm(1, D % 4, (D % 4 - D) // 4)
    return PolyVec.split_power(cfg.m)


def run_count_box(cfg: RunConfig) -> str:
    if cfg.disc is None:
        raise UsageError("count-box needs --disc")
    ts = _require_schedule(cfg)
    norm = NormSpec.by_name(cfg.norm)
    counts = count_forms_box(cfg.disc, ts, norm)
    c = None
    if _square_root(cfg.disc) is not None:
        c = forms_prediction(cfg.disc, norm, _sector(cfg), cfg.saturation)["predicted_c"]
    return _count_csv(ts, counts, c, 1)


def run_count_orbit(cfg: RunConfig) -> str:
    ts = _require_schedule(cfg)
    seed = _seed_vector(cfg)
    norm = NormSpec.by_name(cfg.norm)
    counts = count_orbit_series(seed, ts, cfg.slack, norm, workers=cfg.workers)
    if cfg.dump:
        write_orbit_csv(orbit_points_within(seed, max(ts), cfg.slack, norm).points, cfg.dump, norm)
    if isinstance(seed, PolyVec):
        c = power_prediction(cfg.m, norm, _sector(cfg))["predicted_c"]
    elif seed.disc > 0 and _square_root(seed.disc) is not None:
        c = class_prediction(seed, norm, _sector(cfg))[1]
    else:
        c = None
    return _count_csv(ts, counts, c, 1 if isinstance(seed, QuadForm) else cfg.m)


def run_predict(cfg: RunConfig) -> str:
    norm, sector = NormSpec.by_name(cfg.norm), _sector(cfg)
    extra: dict = {}
    if cfg.d is not None:
        if cfg.m != 1:
            raise UsageError("--d selects the hyperboloid, which needs --m 1")
        integral = boundary_integral(v_plus(cfg.d), 1, norm, sector, action="spin")
        pred = {"boundary_integral": integral, "predicted_c": 4 * integral / (2 * vol_gamma_g())}
    elif cfg.disc is not None:
        pred = forms_prediction(cfg.disc, norm, sector, cfg.saturation)
    else:
        pred = power_prediction(cfg.m, norm, sector)
    extra = {k: v for k, v in pred.items() if k not in CONSTANT_KEYS}
    body = _constants(
        kappa=haar_kappa(),
        vol_gamma_g=vol_gamma_g(),
        boundary_integral=pred["boundary_integral"],
        predicted_c=pred["predicted_c"],
    )
    body.update(extra)
    body.update(command="predict", m=cfg.m, norm=cfg.norm)
    return _json_text(body)


def run_fit(cfg: RunConfig) -> str:
    if not cfg.input:
        raise UsageError("fit needs --input pointing at a count-box or count-orbit CSV")
    series = CountSeries.from_csv(cfg.input)
    fit = fit_asymptotic(series, cfg.m)
    norm, sector = NormSpec.by_name(cfg.norm), _sector(cfg)
    pred = None
    if cfg.disc is not None and cfg.m == 1:
        pred = forms_prediction(cfg.disc, norm, sector, cfg.saturation)
    elif cfg.disc is None:
        pred = power_prediction(cfg.m, norm, sector)
    body = _constants(
        kappa=haar_kappa(),
        vol_gamma_g=vol_gamma_g(),
        fit_c=fit.c,
        fit_c_prime=fit.c_prime,
    )
    if pred is not None:
        body.update(
            boundary_integral=pred["boundary_integral"],
            predicted_c=pred["predicted_c"],
            relative_error=abs(fit.c - pred["predicted_c"]) / pred["predicted_c"],
        )
    body.update(command="fit", m=cfg.m, fit_residual=fit.residual, window=list(fit.window))
    return _json_text(body)


def run_equidist(cfg: RunConfig) -> str:
    ts = _require_schedule(cfg)
    psi = reference_bump()
    rows = equidist_report(psi, canonical_basepoint(), ts, samples=cfg.samples, seed=cfg.seed, workers=cfg.workers)
    return _csv_text(
        ["T", "integral", "T·mu_psi", "residual", "s_max", "quad_error"],
        ((r.T, r.integral, r.expected, r.residual, r.s_max, r.quad_error) for r in rows),
    )


def run_volumes(cfg: RunConfig) -> str:
    norm = NormSpec.by_name(cfg.norm)
    d = 1.0 if cfg.d is None else cfg.d
    body = _constants(
        kappa=haar_kappa(),
        vol_gamma_g=vol_gamma_g(),
        boundary_integral=boundary_integral(v_plus(d), 1, norm, _sector(cfg), action="spin"),
    )
    body.update(
        command="volumes",
        fundamental_area=fundamental_area(),
        d=d,
        vol_ball=[{"T": T, "vol_ball": vol_ball(T, d, norm)} for T in cfg.schedule],
    )
    return _json_text(body)


def run_probe_decay(cfg: RunConfig) -> str:
    ts = _require_schedule(cfg)
    psi = reference_bump()
    samples = cfg.samples or 1_000_000
    rows = []
    for T in ts:
        est = correlation_decay_probe(psi, psi, T, samples, cfg.seed)
        rows.append((T, est.value, est.error))
    return _csv_text(["T", "correlation", "std_error"], rows)


RUNNERS = {
    "count-box": run_count_box,
    "count-orbit": run_count_orbit,
    "predict": run_predict,
    "fit": run_fit,
    "equidist": run_equidist,
    "volumes": run_volumes,
    "probe-decay": run_probe_decay,
}


def manifest(cfg: RunConfig, wall: float) -> dict:
    import numba
    import scipy

    return {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "versions": {
            "orbitcount": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
        "wall_time_s": wall,
    }


def run(cfg: RunConfig) -> int:
    start = time.perf_counter()
    log.info("running %s", cfg.command)
    try:
        text = RUNNERS[cfg.command](cfg)
    except UsageError as exc:
        print(f"orbitcount: usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported with context, nonzero exit
        print(f"orbitcount: {cfg.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    meta = manifest(cfg, time.perf_counter() - start)
    if cfg.out:
        out = Path(cfg.out)
        out.write_text(text, encoding="utf-8")
        Path(f"{out}.manifest.json").write_text(_json_text(meta), encoding="utf-8")
    else:
        sys.stdout.write(text)
        print(json.dumps(meta, sort_keys=True), file=sys.stderr)
    log.info("done in %.2fs", meta["wall_time_s"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orbitcount", description=__doc__)
    p.add_argument("--command", required=True, choices=COMMANDS)
    p.add_argument("--disc", type=int, help="discriminant of the binary quadratic forms")
    p.add_argument("--m", type=int, default=1, help="half the degree of the binary forms")
    p.add_argument("--d", type=float, help="hyperboloid level Q(v0) = d (predict/volumes)")
    p.add_argument("--norm", default="sup", choices=("euclidean", "sup"))
    p.add_argument("--tmin", type=float)
    p.add_argument("--tmax", type=float)
    p.add_argument("--tsteps", type=int)
    p.add_argument("--schedule", help="explicit comma-separated T values")
    p.add_argument("--slack", type=float, default=2.0)
    p.add_argument("--saturation", type=float, default=1000.0)
    p.add_argument("--sector", default="", help='theta intervals "a1,b1;a2,b2"')
    p.add_argument("--samples", type=int)
    p.add_argument("--input", help="CSV consumed by fit")
    p.add_argument("--out")
    p.add_argument("--dump", help="orbit point CSV (count-orbit)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    if ns.schedule:
        schedule = tuple(float(x) for x in ns.schedule.split(",") if x.strip())
    elif ns.tmin is not None or ns.tmax is not None or ns.tsteps is not None:
        if ns.tmin is None or ns.tmax is None or ns.tsteps is None:
            raise UsageError("--tmin, --tmax and --tsteps go together")
        schedule = geometric_schedule(ns.tmin, ns.tmax, ns.tsteps)
    else:
        schedule = ()
    return RunConfig(
        command=ns.command,
        disc=ns.disc,
        m=ns.m,
        d=ns.d,
        norm=ns.norm,
        schedule=schedule,
        sector=ns.sector,
        slack=ns.slack,
        saturation=ns.saturation,
        samples=ns.samples,
        input=ns.input,
        out=ns.out,
        dump=ns.dump,
        seed=ns.seed,
        workers=ns.workers,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, stream=sys.stderr, format="%(message)s")
    try:
        cfg = config_from_args(ns)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"orbitcount: error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
