"""Command-line interface for sweeps, histogram tools, fits, and presets.

Subcommands: rabi, indist, hom, fit, kernels, reproduce.  Each run writes
its delimited outputs (and rendered PNG figures, unless --no-plot) into
--out and finishes with a manifest.json naming every file produced.

Configs are JSON objects with explicit units in the key names (t1_ps,
gamma0_uev, tau_c_ns, ...); unknown keys are rejected before any
computation starts.  Exit codes: 0 success, 2 input/config error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .coherence import (
    charge_noise_rate,
    dephasing_budget,
    indistinguishability_oracle,
    indistinguishability_resonant,
    indistinguishability_with_jitter,
    three_level_simulation,
)
from .dynamics import (
    build_pulse_context,
    phenomenological_rabi,
    rabi_scan,
    simulate_pulse,
    trajectory_csv_rows,
)
from .errors import ConfigError, FitConvergenceError, PolaronLabError
from .figures import (
    render_histogram,
    render_indistinguishability,
    render_kernels,
    render_rabi,
    render_trajectory,
)
from .fitting import (
    extract_phonon_params,
    fit_charge_noise,
    fit_mu,
    fit_rabi_curve,
)
from .histograms import (
    BeamsplitterSpec,
    PeakModel,
    fit_histogram,
    g2_from_fit,
    make_bins,
    michelson_contrast,
    raw_visibility,
    santori_correction,
    seed_centers,
    synthesize_histogram,
)
from .kernels import (
    build_kernel_table,
    franck_condon,
    kernel_table_csv_rows,
    virtual_dephasing_rate,
)
from .model import (
    ChargeNoise,
    EmitterParams,
    PhononCoupling,
    PulseSpec,
    PumpLevel,
    rate_uev_to_psinv,
)

_PAPER_TEMPERATURES = (5.6, 10.0, 15.0, 17.5, 20.0)
_REQUIRED = object()


# ---------------------------------------------------------------------------
# config loading and validation


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    return config


def _as_float(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"'{key}' must be finite, got {value}")
    return value


def _positive(key, value):
    value = _as_float(key, value)
    if value <= 0:
        raise ConfigError(f"'{key}' must be > 0, got {value}")
    return value


def _nonnegative(key, value):
    value = _as_float(key, value)
    if value < 0:
        raise ConfigError(f"'{key}' must be >= 0, got {value}")
    return value


def _as_int(key, value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{key}' must be an integer, got {value!r}")
    return value


def _string(key, value):
    if not isinstance(value, str):
        raise ConfigError(f"'{key}' must be a string, got {value!r}")
    return value


def _choice(*options):
    def check(key, value):
        if value not in options:
            raise ConfigError(
                f"'{key}' must be one of {'|'.join(options)}, got {value!r}"
            )
        return value

    return check


def _float_list(key, value):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"'{key}' must be a non-empty list of numbers")
    return np.array([_as_float(key, v) for v in value])


def _grid(key, value):
    """A sweep axis: either an explicit list or {start, stop, count}."""
    if isinstance(value, list):
        return _float_list(key, value)
    if isinstance(value, dict):
        extra = sorted(set(value) - {"start", "stop", "count"})
        if extra:
            raise ConfigError(f"'{key}': unknown grid keys {extra}")
        for field in ("start", "stop", "count"):
            if field not in value:
                raise ConfigError(f"'{key}': grid needs start, stop, count")
        count = _as_int(f"{key}.count", value["count"])
        if count < 2:
            raise ConfigError(f"'{key}.count' must be >= 2, got {count}")
        return np.linspace(
            _as_float(f"{key}.start", value["start"]),
            _as_float(f"{key}.stop", value["stop"]),
            count,
        )
    raise ConfigError(f"'{key}' must be a list or a start/stop/count object")


def _validated(config: dict, scenario: str, schema: dict) -> dict:
    """Apply a {key: (checker, default)} schema; unknown keys rejected."""
    unknown = sorted(set(config) - set(schema))
    if unknown:
        raise ConfigError(f"{scenario}: unknown config keys {unknown}")
    out = {}
    for key, (checker, default) in schema.items():
        if key in config:
            out[key] = checker(key, config[key])
        elif default is _REQUIRED:
            raise ConfigError(f"{scenario}: missing required key '{key}'")
        else:
            out[key] = default
    return out


_COUPLING_SCHEMA = {
    "alpha_psinv": (_nonnegative, 0.13),
    "omega_c_psinv": (_positive, 1.8),
    "mu_ps2": (_nonnegative, 1.1e-3),
}


def _coupling_from(cfg: dict) -> PhononCoupling:
    return PhononCoupling(
        alpha=cfg["alpha_psinv"], omega_c=cfg["omega_c_psinv"], mu=cfg["mu_ps2"]
    )


# ---------------------------------------------------------------------------
# output helpers


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _write_json(path: Path, payload: dict) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return [float(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _config_hash(config: dict) -> str:
    canonical = json.dumps(
        _jsonable(config), sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write_manifest(out_dir: Path, command: str, config: dict, outputs) -> Path:
    manifest = {
        "toolkit_version": __version__,
        "command": command,
        "config_sha256": _config_hash(config),
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "outputs": [p.name for p in outputs],
    }
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def _read_csv_columns(path: str, required) -> dict[str, np.ndarray]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header:
                raise ConfigError(f"{path}: empty CSV")
            names = [name.strip() for name in header]
            columns = {name: [] for name in names}
            for lineno, row in enumerate(reader, start=2):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != len(names):
                    raise ConfigError(
                        f"{path}:{lineno}: expected {len(names)} fields, "
                        f"got {len(row)}"
                    )
                for name, cell in zip(names, row):
                    try:
                        columns[name].append(float(cell))
                    except ValueError:
                        raise ConfigError(
                            f"{path}:{lineno}: non-numeric value {cell!r} "
                            f"in column '{name}'"
                        ) from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    missing = [name for name in required if name not in columns]
    if missing:
        raise ConfigError(f"{path}: missing columns {missing}")
    if not next(iter(columns.values()), []):
        raise ConfigError(f"{path}: no data rows")
    return {name: np.asarray(vals) for name, vals in columns.items()}


def _edges_from_centers(centers: np.ndarray, path: str) -> np.ndarray:
    if centers.size < 2:
        raise ConfigError(f"{path}: need at least two bins")
    steps = np.diff(centers)
    width = float(np.mean(steps))
    if width <= 0 or np.max(np.abs(steps - width)) > 1e-6 * abs(width):
        raise ConfigError(f"{path}: bin centers must be uniformly spaced")
    return np.concatenate([centers - 0.5 * width, [centers[-1] + 0.5 * width]])


def _resolve_threads(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
        return args.threads
    env = os.environ.get("POLARONLAB_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError:
            raise ConfigError(
                f"POLARONLAB_THREADS must be an integer, got {env!r}"
            ) from None
        if threads < 1:
            raise ConfigError(f"POLARONLAB_THREADS must be >= 1, got {threads}")
        return threads
    return os.cpu_count() or 1


def _pmap(fn, items, threads: int):
    """Map preserving input order; worker pool when threads > 1."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


# ---------------------------------------------------------------------------
# subcommands


def cmd_rabi(args, out_dir: Path):
    cfg = _validated(
        _load_config(args.config),
        "rabi",
        {
            **_COUPLING_SCHEMA,
            "temperatures_k": (_float_list, list(_PAPER_TEMPERATURES)),
            "areas_pi": (_grid, None),
            "fwhm_ps": (_positive, 1.2),
            "virtual_mode": (_choice("static", "full"), "static"),
            "trajectory_area_pi": (_positive, None),
        },
    )
    coupling = _coupling_from(cfg)
    temps = np.sort(np.asarray(cfg["temperatures_k"], dtype=float))
    areas_pi = (
        cfg["areas_pi"]
        if cfg["areas_pi"] is not None
        else np.linspace(0.05, 4.0, 40)
    )
    areas = np.sort(np.asarray(areas_pi, dtype=float)) * math.pi
    threads = _resolve_threads(args)
    pulse = PulseSpec(area=0.0, fwhm=cfg["fwhm_ps"])

    outputs = []
    summary_rows = []
    curves = {}
    for temp in temps:
        context = build_pulse_context(
            coupling,
            float(temp),
            virtual_mode=cfg["virtual_mode"],
            area_max=max(20.0, float(areas[-1]) * 1.05),
            fwhm_min=cfg["fwhm_ps"],
        )
        scan = rabi_scan(
            areas,
            coupling,
            float(temp),
            p_template=pulse,
            context=context,
            threads=threads,
        )
        outputs.append(
            _write_csv(
                out_dir / f"rabi_T{temp:g}K.csv",
                ("area", "final_population", "zpl_intensity"),
                zip(scan.areas, scan.final_population, scan.zpl_intensity),
            )
        )
        fit = fit_rabi_curve(scan.areas, scan.zpl_intensity)
        summary_rows.append((float(temp), fit.c1, fit.c2, fit.c3))
        curves[float(temp)] = (scan.areas, scan.zpl_intensity)
        if cfg["trajectory_area_pi"] is not None:
            sim = simulate_pulse(
                PulseSpec(
                    area=cfg["trajectory_area_pi"] * math.pi,
                    fwhm=cfg["fwhm_ps"],
                ),
                context,
                n_samples=400,
            )
            outputs.append(
                _write_csv(
                    out_dir / f"trajectory_T{temp:g}K.csv",
                    ("t_ps", "rho_xx", "re_rho_x0", "im_rho_x0"),
                    trajectory_csv_rows(sim),
                )
            )
            if not args.no_plot:
                rows = np.array(list(trajectory_csv_rows(sim)))
                outputs.append(
                    render_trajectory(
                        out_dir / f"trajectory_T{temp:g}K.png",
                        rows[:, 0],
                        rows[:, 1],
                        rows[:, 2],
                        rows[:, 3],
                    )
                )
    outputs.append(
        _write_csv(
            out_dir / "rabi_fit_summary.csv",
            ("temperature_k", "c1", "c2", "c3"),
            summary_rows,
        )
    )
    if not args.no_plot:
        outputs.append(render_rabi(out_dir / "rabi.png", curves))
    return cfg, outputs


def _indist_schema(axis: str) -> dict:
    schema = {
        **_COUPLING_SCHEMA,
        "t1_ps": (_positive, 730.0),
    }
    if axis == "temperature":
        schema["temperatures_k"] = (_float_list, list(_PAPER_TEMPERATURES))
    elif axis == "delay":
        schema.update(
            {
                "delays_ns": (_grid, None),
                "gamma0_uev": (_nonnegative, 0.37),
                "tau_c_ns": (_positive, 6.48),
                "shell": (_choice("s", "p"), "s"),
                "t_relax_ps": (_positive, 53.0),
                "temperature_k": (_nonnegative, 5.6),
            }
        )
    else:  # power
        schema.update(
            {
                "powers_psat": (_grid, None),
                "mode": (_choice("resonant", "p_shell"), "resonant"),
                "t_relax_ps": (_positive, 53.0),
                "temperature_k": (_nonnegative, 5.6),
            }
        )
    return schema


def cmd_indist(args, out_dir: Path):
    axis = args.axis
    cfg = _validated(_load_config(args.config), f"indist {axis}", _indist_schema(axis))
    coupling = _coupling_from(cfg)
    gamma_emission = 1.0 / cfg["t1_ps"]
    threads = _resolve_threads(args)

    if axis == "temperature":
        values = np.sort(np.asarray(cfg["temperatures_k"], dtype=float))

        def one(temp):
            gamma = dephasing_budget(coupling, float(temp)).gamma_pd
            analytic = indistinguishability_resonant(gamma_emission, gamma)
            oracle = indistinguishability_oracle(gamma_emission, gamma)
            return float(temp), analytic, oracle, 1.0, analytic

        axis_label = "temperature (K)"
    elif axis == "delay":
        values = (
            cfg["delays_ns"]
            if cfg["delays_ns"] is not None
            else np.linspace(0.5, 12.2, 25)
        )
        noise = ChargeNoise(gamma0=cfg["gamma0_uev"], tau_c=cfg["tau_c_ns"])
        jitter_shell = cfg["shell"] == "p"
        gamma_relax = 1.0 / cfg["t_relax_ps"]

        def one(tau_d):
            budget = dephasing_budget(
                coupling, cfg["temperature_k"], noise=noise, tau_d=float(tau_d)
            )
            gamma = budget.gamma_pd + budget.gamma_charge
            if jitter_shell:
                result = indistinguishability_with_jitter(
                    gamma_relax, gamma_emission, gamma
                )
                oracle = three_level_simulation(
                    PumpLevel(gamma_relax=gamma_relax),
                    EmitterParams(gamma_emission=gamma_emission),
                    gamma,
                ).value
                return (
                    float(tau_d),
                    result.value,
                    oracle,
                    result.components["jitter_factor"],
                    result.components["dephasing_factor"],
                )
            analytic = indistinguishability_resonant(gamma_emission, gamma)
            oracle = indistinguishability_oracle(gamma_emission, gamma)
            return float(tau_d), analytic, oracle, 1.0, analytic

        axis_label = "pulse separation (ns)"
    else:  # power
        values = (
            cfg["powers_psat"]
            if cfg["powers_psat"] is not None
            else np.linspace(0.0, 1.0, 11)
        )
        gamma_relax = 1.0 / cfg["t_relax_ps"]
        jitter = gamma_relax / (gamma_relax + gamma_emission)

        if cfg["mode"] == "resonant":
            gamma = dephasing_budget(coupling, cfg["temperature_k"]).gamma_pd
            analytic = indistinguishability_resonant(gamma_emission, gamma)
            oracle = indistinguishability_oracle(gamma_emission, gamma)

            def one(power):
                return float(power), analytic, oracle, 1.0, analytic

        else:

            def one(power):
                # the zero-power intercept and slope of the p-shell trend,
                # capped by the timing-jitter bound so the factorization
                # stays physical
                linear = 0.95 - 0.70 * float(power)
                dephasing = min(max(linear / jitter, 1e-9), 1.0)
                gamma = 0.5 * gamma_emission * (1.0 / dephasing - 1.0)
                oracle = three_level_simulation(
                    PumpLevel(gamma_relax=gamma_relax),
                    EmitterParams(gamma_emission=gamma_emission),
                    gamma,
                ).value
                return (
                    float(power),
                    jitter * dephasing,
                    oracle,
                    jitter,
                    dephasing,
                )

        axis_label = "power (P/P_sat)"

    rows = _pmap(one, [float(v) for v in values], threads)
    outputs = [
        _write_csv(
            out_dir / f"indist_{axis}.csv",
            (
                "axis_value",
                "I_analytic",
                "I_oracle",
                "jitter_factor",
                "dephasing_factor",
            ),
            rows,
        )
    ]
    if not args.no_plot:
        table = np.array(rows)
        outputs.append(
            render_indistinguishability(
                out_dir / f"indist_{axis}.png",
                axis_label,
                table[:, 0],
                {
                    "analytic": (table[:, 1], "-"),
                    "oracle": (table[:, 2], "o"),
                },
            )
        )
    return cfg, outputs


def _hom_synth(args, out_dir: Path):
    cfg = _validated(
        _load_config(args.config),
        "hom synth",
        {
            "kind": (_choice("hbt", "hom"), "hbt"),
            "n_peaks": (_as_int, None),
            "pulse_period_ns": (_positive, 12.2),
            "pair_separation_ns": (_positive, 2.0),
            "t1_ns": (_positive, 0.35),
            "sigma_ns": (_nonnegative, 0.12),
            "baseline": (_nonnegative, 2.0),
            "central_area": (_nonnegative, 6.0),
            "side_area": (_nonnegative, 1000.0),
            "t_min_ns": (_as_float, -55.0),
            "t_max_ns": (_as_float, 55.0),
            "bin_width_ns": (_positive, 0.05),
            "seed": (_as_int, None),
        },
    )
    n_peaks = (
        cfg["n_peaks"]
        if cfg["n_peaks"] is not None
        else (9 if cfg["kind"] == "hbt" else 5)
    )
    if n_peaks < 1:
        raise ConfigError(f"'n_peaks' must be >= 1, got {n_peaks}")
    if cfg["t_max_ns"] <= cfg["t_min_ns"]:
        raise ConfigError("'t_max_ns' must exceed 't_min_ns'")
    seed = args.seed if args.seed is not None else cfg["seed"]
    centers = seed_centers(
        n_peaks, cfg["kind"], cfg["pulse_period_ns"], cfg["pair_separation_ns"]
    )
    peaks = [
        PeakModel(
            center=float(c),
            decay_time=cfg["t1_ns"],
            resolution_sigma=cfg["sigma_ns"],
            area=cfg["central_area"] if abs(c) < 1e-9 else cfg["side_area"],
        )
        for c in centers
    ]
    edges = make_bins(cfg["t_min_ns"], cfg["t_max_ns"], cfg["bin_width_ns"])
    counts = synthesize_histogram(
        peaks, edges, noise_seed=seed, baseline=cfg["baseline"]
    )
    bin_centers = 0.5 * (edges[:-1] + edges[1:])
    outputs = [
        _write_csv(
            out_dir / "histogram.csv",
            ("bin_center_ns", "counts"),
            zip(bin_centers, counts),
        )
    ]
    if not args.no_plot:
        outputs.append(
            render_histogram(out_dir / "histogram.png", bin_centers, counts)
        )
    return cfg, outputs


def _hom_fit(args, out_dir: Path):
    cfg = _validated(
        _load_config(args.config),
        "hom fit",
        {
            "histogram_csv": (_string, _REQUIRED),
            "kind": (_choice("hbt", "hom"), "hbt"),
            "n_peaks": (_as_int, None),
            "pulse_period_ns": (_positive, 12.2),
            "pair_separation_ns": (_positive, 2.0),
            "weighting": (_choice("poisson", "none"), "poisson"),
        },
    )
    n_peaks = (
        cfg["n_peaks"]
        if cfg["n_peaks"] is not None
        else (9 if cfg["kind"] == "hbt" else 5)
    )
    if n_peaks < 1:
        raise ConfigError(f"'n_peaks' must be >= 1, got {n_peaks}")
    data = _read_csv_columns(cfg["histogram_csv"], ("bin_center_ns", "counts"))
    edges = _edges_from_centers(data["bin_center_ns"], cfg["histogram_csv"])
    counts = data["counts"]
    if float(np.sum(counts)) == 0.0:
        raise FitConvergenceError(
            "all-zero histogram carries no information to fit"
        )
    fit = fit_histogram(
        counts,
        edges,
        n_peaks,
        pulse_period=cfg["pulse_period_ns"],
        mode=cfg["kind"],
        pair_separation=cfg["pair_separation_ns"],
        weighting=cfg["weighting"],
    )
    payload = {
        "t1_ns": fit.peaks[0].decay_time,
        "sigma_ns": fit.peaks[0].resolution_sigma,
        "baseline": fit.baseline,
        "residual_norm": fit.residual_norm,
        "iterations": fit.fit.iterations,
        "converged": fit.fit.converged,
        "peaks": [
            {
                "center_ns": p.center,
                "area": p.area,
                "area_error": float(err),
            }
            for p, err in zip(fit.peaks, fit.area_errors)
        ],
    }
    if cfg["kind"] == "hbt":
        g2 = g2_from_fit(fit, pulse_period=cfg["pulse_period_ns"])
        payload["g2"] = g2.g2
        payload["g_star"] = g2.g_star
    outputs = [_write_json(out_dir / "histogram_fit.json", _jsonable(payload))]
    if not args.no_plot:
        bin_centers = 0.5 * (edges[:-1] + edges[1:])
        model = synthesize_histogram(fit.peaks, edges, baseline=fit.baseline)
        outputs.append(
            render_histogram(
                out_dir / "histogram_fit.png", bin_centers, counts, model
            )
        )
    return cfg, outputs


def _hom_correct(args, out_dir: Path):
    cfg = _validated(
        _load_config(args.config),
        "hom correct",
        {
            "nu_raw": (_as_float, None),
            "a_hh": (_nonnegative, None),
            "a_hv": (_positive, None),
            "reflectivity": (_nonnegative, 0.485),
            "transmissivity": (_nonnegative, 0.515),
            "epsilon": (_nonnegative, 0.01),
            "g_star": (_nonnegative, 0.006),
            "i_max_uw": (_positive, 533.0),
            "i_min_uw": (_nonnegative, 2.80),
        },
    )
    have_areas = cfg["a_hh"] is not None or cfg["a_hv"] is not None
    if cfg["nu_raw"] is not None and have_areas:
        raise ConfigError("give either 'nu_raw' or 'a_hh'+'a_hv', not both")
    if cfg["nu_raw"] is not None:
        nu_raw = cfg["nu_raw"]
    elif cfg["a_hh"] is not None and cfg["a_hv"] is not None:
        nu_raw = raw_visibility(cfg["a_hh"], cfg["a_hv"])
    else:
        raise ConfigError("need 'nu_raw' or both 'a_hh' and 'a_hv'")
    spec = BeamsplitterSpec(
        reflectivity=cfg["reflectivity"],
        transmissivity=cfg["transmissivity"],
        interferometer_contrast=1.0 - cfg["epsilon"],
        g_star=cfg["g_star"],
    )
    corrected = santori_correction(nu_raw, spec)
    contrast = michelson_contrast(cfg["i_max_uw"], cfg["i_min_uw"])
    payload = {
        "nu_raw": nu_raw,
        "I_corrected": corrected.value,
        "above_unity": corrected.above_unity,
        "C_M": contrast,
    }
    return cfg, [_write_json(out_dir / "correction.json", _jsonable(payload))]


def cmd_hom(args, out_dir: Path):
    handler = {"synth": _hom_synth, "fit": _hom_fit, "correct": _hom_correct}
    return handler[args.mode](args, out_dir)


def cmd_fit(args, out_dir: Path):
    pipeline = args.pipeline
    schema = {"input_csv": (_string, _REQUIRED), "sigma": (_positive, None)}
    if pipeline == "mu":
        schema.update(
            {
                "alpha_psinv": (_nonnegative, 0.13),
                "omega_c_psinv": (_positive, 1.8),
                "t1_ps": (_positive, 730.0),
            }
        )
    elif pipeline == "noise":
        schema.update(
            {
                "shell": (_choice("s", "p"), "s"),
                "t1_ps": (_positive, 730.0),
                "t_relax_ps": (_positive, 53.0),
            }
        )
    cfg = _validated(_load_config(args.config), f"fit {pipeline}", schema)

    def sigma_array(n):
        return None if cfg["sigma"] is None else np.full(n, cfg["sigma"])

    if pipeline == "rabi":
        data = _read_csv_columns(cfg["input_csv"], ("area",))
        column = next(
            (c for c in ("zpl_intensity", "intensity") if c in data), None
        )
        if column is None:
            raise ConfigError(
                f"{cfg['input_csv']}: need a 'zpl_intensity' or 'intensity' column"
            )
        fit = fit_rabi_curve(
            data["area"], data[column], sigma=sigma_array(data["area"].size)
        )
        payload = {
            "c1": fit.c1,
            "c2": fit.c2,
            "c3": fit.c3,
            "standard_errors": dict(
                zip(("c1", "c2", "c3"), fit.fit.standard_errors())
            ),
        }
        curve_x = np.linspace(float(data["area"].min()), float(data["area"].max()), 300)
        curve_y = phenomenological_rabi(curve_x, fit.c1, fit.c2, fit.c3)
        points = (data["area"], data[column])
        x_label, y_label = "pulse area (rad)", column
        result = fit.fit
    elif pipeline == "phonon":
        data = _read_csv_columns(cfg["input_csv"], ("temperature_k", "c3"))
        fit = extract_phonon_params(
            data["temperature_k"],
            data["c3"],
            sigma=sigma_array(data["c3"].size),
        )
        payload = {
            "alpha_psinv": fit.alpha,
            "omega_c_psinv": fit.omega_c,
            "scale": fit.scale,
            "degenerate": fit.degenerate,
            "standard_errors": dict(
                zip(
                    ("alpha_psinv", "omega_c_psinv", "scale"),
                    fit.fit.standard_errors(),
                )
            ),
        }
        coupling = PhononCoupling(alpha=fit.alpha, omega_c=fit.omega_c)
        curve_x = np.linspace(
            float(data["temperature_k"].min()),
            float(data["temperature_k"].max()),
            120,
        )
        curve_y = np.array(
            [fit.scale * franck_condon(coupling, t) for t in curve_x]
        )
        points = (data["temperature_k"], data["c3"])
        x_label, y_label = "temperature (K)", "c3"
        result = fit.fit
    elif pipeline == "mu":
        data = _read_csv_columns(
            cfg["input_csv"], ("temperature_k", "indistinguishability")
        )
        gamma_emission = 1.0 / cfg["t1_ps"]
        fit = fit_mu(
            data["temperature_k"],
            data["indistinguishability"],
            alpha=cfg["alpha_psinv"],
            omega_c=cfg["omega_c_psinv"],
            gamma_emission=gamma_emission,
            sigma=sigma_array(data["temperature_k"].size),
        )
        payload = {
            "mu_ps2": fit.mu,
            "standard_errors": {"mu_ps2": float(fit.fit.standard_errors()[0])},
        }
        unit = PhononCoupling(
            alpha=cfg["alpha_psinv"], omega_c=cfg["omega_c_psinv"], mu=1.0
        )
        curve_x = np.linspace(
            float(data["temperature_k"].min()),
            float(data["temperature_k"].max()),
            120,
        )
        curve_y = np.array(
            [
                indistinguishability_resonant(
                    gamma_emission,
                    0.5 * fit.mu * virtual_dephasing_rate(unit, t),
                )
                for t in curve_x
            ]
        )
        points = (data["temperature_k"], data["indistinguishability"])
        x_label, y_label = "temperature (K)", "indistinguishability"
        result = fit.fit
    else:  # noise
        data = _read_csv_columns(
            cfg["input_csv"], ("tau_d_ns", "indistinguishability")
        )
        gamma_emission = 1.0 / cfg["t1_ps"]
        mode = "resonant" if cfg["shell"] == "s" else "jitter"
        gamma_relax = 1.0 / cfg["t_relax_ps"]
        fit = fit_charge_noise(
            data["tau_d_ns"],
            data["indistinguishability"],
            mode=mode,
            gamma_emission=gamma_emission,
            gamma_relax=gamma_relax if mode == "jitter" else None,
            sigma=sigma_array(data["tau_d_ns"].size),
        )
        payload = {
            "gamma0_uev": fit.gamma0,
            "tau_c_ns": fit.tau_c,
            "tau_c_identifiable": fit.tau_c_identifiable,
            "standard_errors": dict(
                zip(("gamma0_uev", "tau_c_ns"), fit.fit.standard_errors())
            ),
        }
        noise = ChargeNoise(gamma0=max(fit.gamma0, 0.0), tau_c=max(fit.tau_c, 1e-9))
        curve_x = np.linspace(
            float(data["tau_d_ns"].min()), float(data["tau_d_ns"].max()), 120
        )

        def curve_point(tau_d):
            gamma = rate_uev_to_psinv(charge_noise_rate(tau_d, noise))
            if mode == "jitter":
                return indistinguishability_with_jitter(
                    gamma_relax, gamma_emission, gamma
                ).value
            return indistinguishability_resonant(gamma_emission, gamma)

        curve_y = np.array([curve_point(float(t)) for t in curve_x])
        points = (data["tau_d_ns"], data["indistinguishability"])
        x_label, y_label = "pulse separation (ns)", "indistinguishability"
        result = fit.fit

    payload["chi_square"] = result.chi_square
    payload["iterations"] = result.iterations
    payload["converged"] = result.converged
    outputs = [
        _write_json(out_dir / f"fit_{pipeline}.json", _jsonable(payload))
    ]
    if not args.no_plot:
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        ax.plot(points[0], points[1], "o", ms=4, label="data")
        ax.plot(curve_x, curve_y, "-", label="fit")
        ax.set_xlabel(x_label)
        ax.set_ylabel(y_label)
        ax.legend(frameon=False)
        fig.tight_layout()
        path = out_dir / f"fit_{pipeline}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        outputs.append(path)
    return cfg, outputs


def cmd_kernels(args, out_dir: Path):
    cfg = _validated(
        _load_config(args.config),
        "kernels",
        {**_COUPLING_SCHEMA, "temperature_k": (_nonnegative, 10.0)},
    )
    table = build_kernel_table(_coupling_from(cfg), cfg["temperature_k"])
    rows = list(kernel_table_csv_rows(table))
    outputs = [
        _write_csv(
            out_dir / "kernel_table.csv", ("tau_ps", "re_phi", "im_phi"), rows
        )
    ]
    if not args.no_plot:
        arr = np.array(rows)
        outputs.append(
            render_kernels(
                out_dir / "kernels.png", arr[:, 0], arr[:, 1], arr[:, 2]
            )
        )
    return cfg, outputs


def _reproduce_fig3b(args, out_dir: Path, preset: dict):
    coupling = _coupling_from(preset)
    areas = np.linspace(0.05, 4.0, 40) * math.pi
    threads = _resolve_threads(args)
    outputs = []
    curves = {}
    for temp in _PAPER_TEMPERATURES:
        scan = rabi_scan(
            areas, coupling, temp, p_template=PulseSpec(area=0.0), threads=threads
        )
        outputs.append(
            _write_csv(
                out_dir / f"fig3b_T{temp:g}K.csv",
                ("area", "final_population", "zpl_intensity"),
                zip(scan.areas, scan.final_population, scan.zpl_intensity),
            )
        )
        curves[temp] = (scan.areas, scan.zpl_intensity)
    if not args.no_plot:
        outputs.append(render_rabi(out_dir / "fig3b.png", curves))
    return outputs


def _reproduce_fig4c(args, out_dir: Path, preset: dict):
    coupling = _coupling_from(preset)
    gamma_emission = 1.0 / preset["t1_ps"]
    temps = np.unique(
        np.concatenate([np.arange(4.0, 20.01, 0.5), [5.6, 17.5]])
    )
    rows = [
        (
            float(t),
            indistinguishability_resonant(
                gamma_emission, dephasing_budget(coupling, float(t)).gamma_pd
            ),
        )
        for t in temps
    ]
    outputs = [
        _write_csv(
            out_dir / "fig4c.csv", ("temperature_k", "indistinguishability"), rows
        )
    ]
    if not args.no_plot:
        arr = np.array(rows)
        outputs.append(
            render_indistinguishability(
                out_dir / "fig4c.png",
                "temperature (K)",
                arr[:, 0],
                {"model": (arr[:, 1], "-")},
            )
        )
    return outputs


def _reproduce_fig5a(args, out_dir: Path, preset: dict):
    coupling = _coupling_from(preset)
    gamma_emission = 1.0 / preset["t1_ps"]
    gamma_relax = 1.0 / preset["t_relax_ps"]
    jitter = gamma_relax / (gamma_relax + gamma_emission)
    powers = np.linspace(0.0, 1.0, 21)
    gamma_s = dephasing_budget(coupling, 5.6).gamma_pd
    i_s = indistinguishability_resonant(gamma_emission, gamma_s)
    s_rows = [(float(p), i_s) for p in powers]
    p_rows = [
        (float(p), jitter * min(max((0.95 - 0.70 * float(p)) / jitter, 0.0), 1.0))
        for p in powers
    ]
    outputs = [
        _write_csv(
            out_dir / "fig5a_sshell.csv",
            ("power_psat", "indistinguishability"),
            s_rows,
        ),
        _write_csv(
            out_dir / "fig5a_pshell.csv",
            ("power_psat", "indistinguishability"),
            p_rows,
        ),
    ]
    if not args.no_plot:
        outputs.append(
            render_indistinguishability(
                out_dir / "fig5a.png",
                "power (P/P_sat)",
                powers,
                {
                    "s-shell": (np.array([r[1] for r in s_rows]), "-"),
                    "p-shell": (np.array([r[1] for r in p_rows]), "--"),
                },
            )
        )
    return outputs


def _reproduce_fig5b(args, out_dir: Path, preset: dict):
    coupling = _coupling_from(preset)
    gamma_emission = 1.0 / preset["t1_ps"]
    gamma_relax = 1.0 / preset["t_relax_ps"]
    noise = ChargeNoise(gamma0=preset["gamma0_uev"], tau_c=preset["tau_c_ns"])
    delays = np.linspace(0.5, 12.2, 25)

    s_rows, p_rows = [], []
    for tau_d in delays:
        budget = dephasing_budget(coupling, 5.6, noise=noise, tau_d=float(tau_d))
        gamma = budget.gamma_pd + budget.gamma_charge
        i_s = indistinguishability_resonant(gamma_emission, gamma)
        i_p = indistinguishability_with_jitter(
            gamma_relax, gamma_emission, gamma
        ).value
        s_rows.append((float(tau_d), i_s))
        p_rows.append((float(tau_d), i_p))
    outputs = [
        _write_csv(
            out_dir / "fig5b_sshell.csv",
            ("tau_d_ns", "indistinguishability"),
            s_rows,
        ),
        _write_csv(
            out_dir / "fig5b_pshell.csv",
            ("tau_d_ns", "indistinguishability"),
            p_rows,
        ),
    ]
    if not args.no_plot:
        outputs.append(
            render_indistinguishability(
                out_dir / "fig5b.png",
                "pulse separation (ns)",
                delays,
                {
                    "s-shell": (np.array([r[1] for r in s_rows]), "-"),
                    "p-shell": (np.array([r[1] for r in p_rows]), "--"),
                },
            )
        )
    return outputs


def cmd_reproduce(args, out_dir: Path):
    preset = {
        "alpha_psinv": 0.13,
        "omega_c_psinv": 1.8,
        "mu_ps2": 1.1e-3,
        "t1_ps": 730.0,
        "t_relax_ps": 53.0,
        "gamma0_uev": 0.37,
        "tau_c_ns": 6.48,
        "figure": args.figure,
    }
    handler = {
        "fig3b": _reproduce_fig3b,
        "fig4c": _reproduce_fig4c,
        "fig5a": _reproduce_fig5a,
        "fig5b": _reproduce_fig5b,
    }[args.figure]
    return preset, handler(args, out_dir, preset)


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polaronlab",
        description=(
            "Simulation and parameter-estimation toolkit for a "
            "phonon-coupled quantum-dot single-photon source."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"polaronlab {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="FILE", default=None)
        sp.add_argument("--out", metavar="DIR", default=".")
        sp.add_argument("--threads", metavar="N", type=int, default=None)
        sp.add_argument("--seed", metavar="N", type=int, default=None)
        sp.add_argument("--no-plot", action="store_true")

    sp = sub.add_parser("rabi", help="pulse-area scans per temperature")
    common(sp)
    sp = sub.add_parser("indist", help="indistinguishability sweeps")
    sp.add_argument("axis", choices=("temperature", "delay", "power"))
    common(sp)
    sp = sub.add_parser("hom", help="coincidence-histogram tools")
    sp.add_argument("mode", choices=("synth", "fit", "correct"))
    common(sp)
    sp = sub.add_parser("fit", help="parameter-extraction pipelines")
    sp.add_argument("pipeline", choices=("rabi", "phonon", "mu", "noise"))
    common(sp)
    sp = sub.add_parser("kernels", help="phonon kernel-table dump")
    common(sp)
    sp = sub.add_parser("reproduce", help="built-in figure presets")
    sp.add_argument("figure", choices=("fig3b", "fig4c", "fig5a", "fig5b"))
    common(sp)
    return parser


_HANDLERS = {
    "rabi": cmd_rabi,
    "indist": cmd_indist,
    "hom": cmd_hom,
    "fit": cmd_fit,
    "kernels": cmd_kernels,
    "reproduce": cmd_reproduce,
}


def _dispatch(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config, outputs = _HANDLERS[args.command](args, out_dir)
    manifest = _write_manifest(out_dir, args.command, config, outputs)
    for path in [*outputs, manifest]:
        print(path)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PolaronLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
