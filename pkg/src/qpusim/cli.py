"""Command-line front end.

Every subcommand prints a JSON document (default) or a CSV table, to stdout
or ``--out``.  Exit status: 0 success, 1 configuration error, 2 validation
error; failures also print a one-line JSON error object on stderr.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analog, noise, patgen, pulsegen, qexp, thermal
from .config import ConfigError, GlobalConfig, config_schema, load_config

__all__ = ["main", "build_parser"]

FIGURES = ("4f", "5g", "6d", "7d", "8c", "8d", "8e", "9")


class Output:
    """A JSON payload plus the table used for ``--format csv``."""

    def __init__(self, payload, rows=None):
        self.payload = payload
        self.rows = rows if rows is not None else _rows_from(payload)

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return json.dumps(_plain(self.payload), indent=2, sort_keys=True) + "\n"
        return _csv(self.rows)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _rows_from(payload) -> list[dict]:
    if isinstance(payload, list):
        return payload
    return [{"key": k, "value": v} for k, v in sorted(payload.items()) if not isinstance(v, (dict, list))]


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in _plain(r).items()})
    return buf.getvalue()


# ------------------------------------------------------------------ patgen


def _read_script(src: str) -> str:
    if src in patgen.BUNDLED_SCRIPTS:
        return patgen.bundled_script(src)
    return Path(src).read_text()


def _node_table(cfg: GlobalConfig):
    return cfg.patgen.node_table


def cmd_assemble(args, cfg: GlobalConfig) -> Output:
    prog = patgen.parse_script(_read_script(args.script), _node_table(cfg))
    image = patgen.assemble(prog)
    if args.image:
        patgen.write_image(image, args.image)
    dis = patgen.disassembly(image)
    rows = [{"vector": v["vector"], "word": v["word"], "kind": v["kind"]} for v in dis["vectors"]]
    return Output(dis, rows)


def cmd_disassemble(args, cfg: GlobalConfig) -> Output:
    image = patgen.read_image(args.image, _node_table(cfg))
    dis = patgen.disassembly(image)
    rows = [{"vector": v["vector"], "word": v["word"], "kind": v["kind"]} for v in dis["vectors"]]
    return Output(dis, rows)


def _budget_rows(scripts, cfg: GlobalConfig) -> list[dict]:
    rows = []
    for s in scripts:
        prog = patgen.parse_script(_read_script(s), _node_table(cfg))
        ticks = patgen.total_ticks(prog, cfg.patgen.max_ticks)
        rows.append(
            {
                "script": Path(s).stem if s not in patgen.BUNDLED_SCRIPTS else s,
                "vectors": len(prog.vectors),
                "bits": patgen.utilization_bits(prog),
                "ticks": ticks,
                "duration_s": ticks / cfg.patgen.ckdiv_hz,
            }
        )
    return rows


def cmd_budget(args, cfg: GlobalConfig) -> Output:
    rows = _budget_rows(args.scripts or list(patgen.BUNDLED_SCRIPTS), cfg)
    return Output({"depth": patgen.DEPTH, "word_bits": patgen.WORD_BITS, "scripts": rows}, rows)


# ---------------------------------------------------------------- pulsegen


def _timeline_output(tl: pulsegen.SignalTimeline, extra: dict | None = None) -> Output:
    edges = [{"time_s": e.time_s, "signal": e.signal, "level": e.level} for e in tl.edges]
    payload = {"resolution_s": tl.resolution_s, "edges": edges}
    payload.update(extra or {})
    return Output(payload, edges)


def cmd_phases(args, cfg: GlobalConfig) -> Output:
    pc = cfg.pulsegen
    f = args.clk_freq_hz or pc.clk_freq_hz
    tl = pulsegen.generate_phases(f, args.duration_s or pc.duration_s)
    return _timeline_output(tl, {"clk_freq_hz": f, "phase_spacing_s": 1.0 / f})


def cmd_pulse(args, cfg: GlobalConfig) -> Output:
    pc = cfg.pulsegen
    f = args.clk_freq_hz or pc.clk_freq_hz
    sel = pulsegen.PulseSelectConfig(
        pc.sel1 if args.sel1 is None else args.sel1,
        pc.sel2 if args.sel2 is None else args.sel2,
        pulsegen.Combine((args.combine or pc.combine).upper()),
        pc.leaf_index if args.leaf is None else args.leaf,
    )
    tl = pulsegen.pulse_select(sel, pulsegen.generate_phases(f, args.duration_s or pc.duration_s))
    if args.jitter:
        tl = pulsegen.apply_jitter(tl, pulsegen.JitterModel(pc.jitter_rms_s, cfg.seed if args.seed is None else args.seed))
    widths = [b - a for a, b in tl.pulses(sel.name)]
    return _timeline_output(tl, {"leaf": sel.name, "combine": sel.combine.value, "pulse_widths_s": widths})


# ------------------------------------------------------------------ analog


def _ramp(cfg: GlobalConfig, target_v: float | None):
    ac = cfg.analog
    target = ac.target_v if target_v is None else target_v
    return analog.vdac_ramp(ac.coarse, ac.fine, ac.sequencer, target, ac.limits)


def cmd_vdac_ramp(args, cfg: GlobalConfig) -> Output:
    ac = cfg.analog
    res = _ramp(cfg, args.target_v)
    hold = ac.hold_time_s if args.hold_s is None else args.hold_s
    held = analog.apply_droop(res.final_v, hold, ac.leakage())
    rows = [{"time_s": t, "v_out_v": v} for t, v in zip(res.time_s, res.v_out_v)]
    payload = {
        "target_v": ac.target_v if args.target_v is None else args.target_v,
        "final_v": res.final_v,
        "settle_time_s": res.settle_time_s,
        "coarse_pairs": res.coarse_pairs,
        "fine_pairs": res.fine_pairs,
        "hold_time_s": hold,
        "held_v": held,
        "droop_v": res.final_v - held,
        "trajectory": rows,
    }
    return Output(payload, rows)


# ------------------------------------------------------------------- noise


def _budget_output(b: noise.NoiseBudget, spectra: bool) -> Output:
    rows = [{"f_hz": f, "source": s, "psd_out": p} for f, s, p in b.spectra_rows()] if spectra else None
    if rows is None:
        rows = [dataclasses.asdict(r) for r in b.rows] + [{"source": "total", "rms_v": b.total_rms_v, "kind": "rss"}]
    return Output(b.to_dict(), rows)


def cmd_noise_injector(args, cfg: GlobalConfig) -> Output:
    return _budget_output(noise.injector_noise_budget(cfg.noise.injector), args.spectra)


def cmd_noise_detector(args, cfg: GlobalConfig) -> Output:
    return _budget_output(noise.detector_noise_budget(cfg.noise.detector), args.spectra)


# ----------------------------------------------------------------- thermal


def _table(cfg: GlobalConfig, path: str | None):
    if path:
        return thermal.load_conductivity_csv(path)
    return None  # scenario default


def cmd_thermal(args, cfg: GlobalConfig) -> Output:
    rep = thermal.scenario_load(cfg.thermal, _table(cfg, args.conductivity_csv))
    d = rep.to_dict()
    return Output(d)


def cmd_thermal_scale(args, cfg: GlobalConfig) -> Output:
    mults = args.multiplier or [1.0, 10.0]
    reps = thermal.scaling_study(cfg.thermal, mults, True if args.on_chip_adc else None, _table(cfg, args.conductivity_csv))
    rows = thermal.report_rows(reps)
    return Output({"scenarios": rows}, rows)


# -------------------------------------------------------------------- qexp


def _seed(args, cfg: GlobalConfig) -> int:
    return cfg.seed if args.seed is None else args.seed


def _experiment(args, cfg: GlobalConfig, step_v=None, seed=None):
    qc = cfg.qexp
    step = (args.step_v if getattr(args, "step_v", None) is not None else qc.step_v) if step_v is None else step_v
    n = getattr(args, "trials", None) or qc.n_trials
    return qexp.run_trials(cfg.tunneling_model(), step, n, _seed(args, cfg) if seed is None else seed)


def _experiment_output(res: qexp.ExperimentResult, cfg: GlobalConfig, table: str) -> Output:
    bw = cfg.qexp.bin_width_v
    p0, p1, disc = qexp.extract_probabilities(res, bw)
    h = qexp.histogram(res, bw)
    hist_rows = [
        {"bin_center_v": float(c), "count": int(n)} for c, n in zip(h.centers_v, h.counts)
    ]
    payload = {
        "step_v": res.step_v,
        "n": len(res),
        "p0": p0,
        "p1": p1,
        "discarded": disc,
        "peak0_v": h.peak0_v,
        "peak1_v": h.peak1_v,
        "peak_separation_v": h.peak0_v - h.peak1_v,
        "mean_v": float(res.v_out_v.mean()),
        "histogram": hist_rows,
    }
    if table == "trials":
        rows = [{"trial_id": i, "v_out_v": float(v)} for i, v in enumerate(res.v_out_v)]
    else:
        rows = hist_rows
    return Output(payload, rows)


def cmd_experiment(args, cfg: GlobalConfig) -> Output:
    return _experiment_output(_experiment(args, cfg), cfg, args.table)


def cmd_bias_scan(args, cfg: GlobalConfig) -> Output:
    bs = dataclasses.replace(cfg.qexp.bias_scan, seed=_seed(args, cfg))
    if args.trials:
        bs = dataclasses.replace(bs, trials_per_point=args.trials)
    res = qexp.bias_scan(bs, cfg.tunneling_model())
    rows = res.rows()
    return Output({"points": rows, "bimodal_points": int(res.bimodal.sum())}, rows)


def _load_series(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if "v_out_v" not in (rd.fieldnames or []):
            raise ValueError(f"{path}: no v_out_v column")
        return np.array([float(r["v_out_v"]) for r in rd])


def cmd_acf(args, cfg: GlobalConfig) -> Output:
    series = _load_series(args.series) if args.series else _experiment(args, cfg).v_out_v
    lag = args.max_lag if args.max_lag is not None else cfg.qexp.acf_max_lag
    acf = qexp.autocorrelation(series, lag)
    rows = [{"lag": k, "acf": float(a)} for k, a in enumerate(acf)]
    return Output({"n": int(series.size), "acf": rows, "white_bound": 3 / np.sqrt(series.size)}, rows)


# --------------------------------------------------------------- reproduce


def cmd_reproduce(args, cfg: GlobalConfig) -> Output:
    fig = args.figure
    if fig == "4f":
        return _budget_output(noise.injector_noise_budget(cfg.noise.injector), False)
    if fig == "5g":
        return _budget_output(noise.detector_noise_budget(cfg.noise.detector), False)
    if fig == "6d":
        rows = _budget_rows(list(patgen.BUNDLED_SCRIPTS), cfg)
        return Output({"scripts": rows}, rows)
    if fig == "7d":
        res = _ramp(cfg, None)
        lm = cfg.analog.leakage()
        rows = [
            {"hold_time_s": t, "v_out_v": analog.apply_droop(res.final_v, t, lm)}
            for t in np.linspace(0.0, cfg.analog.hold_time_s, 13)
        ]
        return Output({"final_v": res.final_v, "settle_time_s": res.settle_time_s, "droop": rows}, rows)
    if fig in ("8c", "8d"):
        # the two panels are two detectors: independent streams off one seed
        idx = 0 if fig == "8c" else 1
        res = _experiment(args, cfg, seed=np.random.SeedSequence([_seed(args, cfg), idx]))
        out = _experiment_output(res, cfg, "histogram")
        if fig == "8d":
            acf = qexp.autocorrelation(res.v_out_v, cfg.qexp.acf_max_lag)
            out.payload["acf"] = [float(a) for a in acf]
        return out
    if fig == "8e":
        rows = qexp.probability_sweep(
            cfg.tunneling_model(), cfg.qexp.sweep_steps_v, cfg.qexp.n_trials, _seed(args, cfg), cfg.qexp.bin_width_v
        )
        return Output({"sweep": rows}, rows)
    if fig == "9":
        reps = thermal.scaling_study(cfg.thermal, [1.0, 10.0])
        reps.append((1.0, thermal.scaling_study(cfg.thermal, 1.0, on_chip_adc=True)[0][1]))
        rows = thermal.report_rows(reps)
        return Output({"scenarios": rows}, rows)
    raise ValueError(f"unknown figure {fig!r}")


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else k)
    else:
        yield {"key": prefix, "value": json.dumps(obj, sort_keys=True)}


def cmd_schema(args, cfg: GlobalConfig) -> Output:
    schema = config_schema()
    return Output(schema, list(_flatten(schema)))


def cmd_config(args, cfg: GlobalConfig) -> Output:
    d = cfg.to_dict()
    return Output(d, list(_flatten(d)))


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (default: bundled parameter set)")
    common.add_argument("--format", choices=("json", "csv"), default="json", help="output format")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--seed", type=int, help="override the config seed")

    p = argparse.ArgumentParser(prog="qpusim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_, description=help_)
        sp.set_defaults(func=func)
        return sp

    sp = add("assemble", cmd_assemble, "assemble a .qpat script into a 512x64-bit memory image")
    sp.add_argument("script", help="script path, or a bundled name (script1..script4)")
    sp.add_argument("--image", help="write the 4096-byte little-endian image here")

    sp = add("disassemble", cmd_disassemble, "decode a memory image")
    sp.add_argument("image", help="4096-byte image file")

    sp = add("budget", cmd_budget, "memory utilisation and tick count per script")
    sp.add_argument("scripts", nargs="*", help="scripts (default: the four bundled examples)")

    for name, func, help_ in (
        ("phases", cmd_phases, "Johnson-counter phase timeline"),
        ("pulse", cmd_pulse, "pulse-select leaf output timeline"),
    ):
        sp = add(name, func, help_)
        sp.add_argument("--clk-freq-hz", type=float, help="clock frequency")
        sp.add_argument("--duration-s", type=float, help="simulated time")
        if name == "pulse":
            sp.add_argument("--sel1", type=int, help="first phase index 0-15")
            sp.add_argument("--sel2", type=int, help="second phase index 0-15")
            sp.add_argument("--combine", choices=("AND", "OR", "and", "or"), help="combine operation")
            sp.add_argument("--leaf", type=int, help="leaf cell index 0-7")
            sp.add_argument("--jitter", action="store_true", help="add Gaussian edge jitter")

    sp = add("vdac-ramp", cmd_vdac_ramp, "two-stage VDAC ramp trajectory and hold droop")
    sp.add_argument("--target-v", type=float, help="target output voltage")
    sp.add_argument("--hold-s", type=float, help="hold time for the droop figure")

    for name, func, help_ in (
        ("noise-injector", cmd_noise_injector, "injector output noise budget"),
        ("noise-detector", cmd_noise_detector, "detector output noise budget"),
    ):
        sp = add(name, func, help_)
        sp.add_argument("--spectra", action="store_true", help="CSV output holds the output PSDs (f_hz, source, psd_out)")

    sp = add("thermal", cmd_thermal, "itemised 3 K stage heat load")
    sp.add_argument("--conductivity-csv", help="T_K,k_W_per_mK table (default: bundled copper table)")
    sp = add("thermal-scale", cmd_thermal_scale, "heat load versus qubit-count multiplier")
    sp.add_argument("--conductivity-csv", help="T_K,k_W_per_mK table")
    sp.add_argument("--multiplier", type=float, action="append", help="qubit multiplier (repeatable; default 1 and 10)")
    sp.add_argument("--on-chip-adc", action="store_true", help="drop the analog read-out wires")

    sp = add("experiment", cmd_experiment, "Monte-Carlo tunnelling run at one injector step")
    sp.add_argument("--step-v", type=float, help="injector step amplitude")
    sp.add_argument("--trials", type=int, help="number of trials")
    sp.add_argument("--table", choices=("histogram", "trials"), default="histogram", help="CSV table to emit")

    sp = add("bias-scan", cmd_bias_scan, "mean detector output over the reset-transistor bias grid")
    sp.add_argument("--trials", type=int, help="trials per grid point")

    sp = add("acf", cmd_acf, "autocorrelation of a detector series")
    sp.add_argument("--series", help="CSV with a v_out_v column (default: run an experiment)")
    sp.add_argument("--max-lag", type=int, help="largest lag")
    sp.add_argument("--step-v", type=float, help="injector step for the generated run")
    sp.add_argument("--trials", type=int, help="trials for the generated run")

    sp = add("reproduce", cmd_reproduce, "canned scenario for one measured figure")
    sp.add_argument("figure", choices=FIGURES)

    add("schema", cmd_schema, "print the config JSON schema")
    add("config", cmd_config, "print the effective configuration")
    return p


def _fail(kind: str, exc: Exception, code: int) -> int:
    print(json.dumps({"error": kind, "message": str(exc)}, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _fail("config", exc, 1)
    try:
        out = args.func(args, cfg)
    except ConfigError as exc:
        return _fail("config", exc, 1)
    except (ValueError, KeyError, OSError) as exc:
        return _fail("validation", exc, 2)
    text = out.render(args.format)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            # reader went away (e.g. piped into head); not an error
            os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    return 0


if __name__ == "__main__":
    sys.exit(main())
