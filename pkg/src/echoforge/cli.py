"""Command-line entry point: enhance / corpus / tune / metrics.

Exit codes: 0 success, 2 input/output problem (the message names the
path), 3 configuration problem (the message names the field). Verbosity
comes from the ECHOFORGE_LOG environment variable (DEBUG/INFO/WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from . import config as cfgmod
from . import corpus as corpusmod
from . import params as paramsmod
from . import tuner as tunermod
from .audio import read_wav, write_wav
from .errors import ConfigError, EchoforgeError, InputError
from .metrics import erle_db, segmental_snr
from .pipeline import measure_erle, process_stream, write_diagnostics_file
from .stft import StftConfig

log = logging.getLogger("echoforge")


def _setup_logging():
    level = os.environ.get("ECHOFORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def load_run_config(path):
    """Split a config file into (stft config, parameter overrides).

    Unknown keys are rejected; parameter values are validated against
    their schema bounds.
    """
    raw = cfgmod.read_config(path) if path else {}
    stft_kwargs = {}
    overrides = {}
    for key, value in raw.items():
        if key == "stft.frame_len":
            stft_kwargs["frame_len"] = cfgmod.as_int(value, key)
        elif key == "stft.hop":
            stft_kwargs["hop"] = cfgmod.as_int(value, key)
        elif key == "stft.window":
            stft_kwargs["window"] = value
        elif key == "ns.cap_at_unity":
            overrides[key] = cfgmod.as_bool(value, key)
        else:
            paramsmod.field(key)  # raises ConfigError for unknown keys
            overrides[key] = cfgmod.as_float(value, key)
    cap = overrides.pop("ns.cap_at_unity", False)
    stft_cfg = StftConfig(**stft_kwargs)
    pipeline_params = paramsmod.build_pipeline_params(overrides)
    if cap:
        pipeline_params = replace(
            pipeline_params,
            suppressor=replace(pipeline_params.suppressor, cap_at_unity=True))
    return stft_cfg, pipeline_params, overrides


def cmd_enhance(args) -> int:
    stft_cfg, pipeline_params, _ = load_run_config(args.config)
    mic = read_wav(args.mic)
    ref = read_wav(args.reference)
    result = process_stream(mic, ref, pipeline_params, stft_cfg,
                            collect_diagnostics=args.diagnostics)
    write_wav(args.output, result.enhanced)
    stem, _ = os.path.splitext(args.output)
    manifest = {"segments": [list(s) for s in result.segments],
                "sample_rate": mic.sample_rate}
    with open(stem + ".segments.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    if args.diagnostics:
        write_diagnostics_file(stem + ".diag.f32", result.diagnostics)
        log.info("diagnostics written to %s.diag.f32", stem)
    log.info("enhanced %s -> %s (%d segments)", args.mic, args.output,
             len(result.segments))
    return 0


def _corpus_spec_from_config(path, seed_override=None):
    raw = cfgmod.read_config(path)
    base_dir = os.path.dirname(os.path.abspath(path))

    def paths(key):
        return tuple(cfgmod.as_paths(raw.get(key, "")))

    noise = {t: paths(f"corpus.noise.{t}") for t in corpusmod.NOISE_TYPES}
    spec = corpusmod.CorpusSpec(
        speech_files=paths("corpus.speech"),
        music_files=paths("corpus.music"),
        noise_files=noise,
        ir_files=paths("corpus.irs"),
        ser_range_db=(cfgmod.as_float(raw.get("corpus.ser_min", "-15"), "corpus.ser_min"),
                      cfgmod.as_float(raw.get("corpus.ser_max", "-10"), "corpus.ser_max")),
        snr_range_db=(cfgmod.as_float(raw.get("corpus.snr_min", "-10"), "corpus.snr_min"),
                      cfgmod.as_float(raw.get("corpus.snr_max", "10"), "corpus.snr_max")),
        sigma3=cfgmod.as_float(raw.get("corpus.sigma3", "0.1"), "corpus.sigma3"),
        master_seed=(seed_override if seed_override is not None
                     else cfgmod.as_int(raw.get("corpus.seed", "0"), "corpus.seed")),
        sample_rate=cfgmod.as_int(raw.get("corpus.sample_rate", "16000"),
                                  "corpus.sample_rate"),
    )
    return spec, base_dir


def cmd_corpus(args) -> int:
    spec, base_dir = _corpus_spec_from_config(args.spec, args.seed)
    recipes = corpusmod.generate_corpus(spec, args.count, args.out, base_dir)
    print(f"wrote {len(recipes)} items to {args.out}")
    return 0


def cmd_tune(args) -> int:
    raw = cfgmod.read_config(args.ga_config) if args.ga_config else {}
    ga_kwargs = {}
    for key, attr, conv in (
            ("ga.population", "population", cfgmod.as_int),
            ("ga.elite", "elite", cfgmod.as_int),
            ("ga.generations", "generations", cfgmod.as_int),
            ("ga.mutation_rate", "mutation_rate", cfgmod.as_float),
            ("ga.mutation_scale", "mutation_scale", cfgmod.as_float),
            ("ga.crossover_rate", "crossover_rate", cfgmod.as_float),
            ("ga.tournament", "tournament", cfgmod.as_int),
            ("ga.seed", "seed", cfgmod.as_int)):
        if key in raw:
            ga_kwargs[attr] = conv(raw[key], key)
    if args.seed is not None:
        ga_kwargs["seed"] = args.seed
    if args.jobs is not None:
        ga_kwargs["jobs"] = args.jobs
    cfg = tunermod.GaConfig(**ga_kwargs)

    bounds = tunermod.default_bounds()
    for key, value in raw.items():
        if key.startswith("bounds."):
            rest = key[len("bounds."):]
            name, _, which = rest.rpartition(".")
            if which not in ("min", "max") or not name:
                raise ConfigError(f"bad bounds key {key!r}; use bounds.<param>.min/max")
            paramsmod.field(name)  # raises ConfigError for unknown names
            lo, hi = bounds[name]
            v = cfgmod.as_float(value, key)
            bounds[name] = (v, hi) if which == "min" else (lo, v)
        elif not key.startswith("ga."):
            raise ConfigError(f"unknown tune config key {key!r}")

    manifest = corpusmod.read_manifest(args.manifest)
    base_dir = os.path.dirname(os.path.abspath(args.manifest))
    items = tunermod.load_corpus_items(manifest, base_dir)
    if args.objective_cmd:
        objective = tunermod.external_objective(
            args.objective_cmd, args.exchange_dir or ".", args.timeout, items)
    else:
        objective = tunermod.signal_fidelity_objective(items)

    incumbent = paramsmod.default_params() if args.seed_incumbent else None
    result = tunermod.ga_run(cfg, bounds, objective, incumbent=incumbent)
    print(result.history_table())
    print(f"best score: {result.best_score:.4f}")
    header = f"tuned parameters (score {result.best_score:.4f})"
    cfgmod.write_config(args.out, result.best_params, header=header)
    print(f"best parameters written to {args.out}")
    return 0


def cmd_metrics(args) -> int:
    a = read_wav(args.signal_a)
    b = read_wav(args.signal_b)
    if len(a) != len(b):
        raise InputError(
            f"length mismatch: {args.signal_a} has {len(a)}, "
            f"{args.signal_b} has {len(b)}")
    per_window = measure_erle(a, b, args.window)
    print(f"erle_db_overall = {erle_db(a.samples, b.samples):.2f}")
    for i, v in enumerate(per_window):
        print(f"erle_db_window_{i} = {v:.2f}")
    print(f"segmental_snr_db = {segmental_snr(a.samples, b.samples):.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echoforge",
        description="Speech enhancement front end for voice control during "
                    "music playback.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", help="cancel echo and suppress noise in one file")
    p.add_argument("mic", help="microphone WAV")
    p.add_argument("reference", help="far-end (loudspeaker) reference WAV")
    p.add_argument("output", help="enhanced output WAV")
    p.add_argument("--config", help="parameter config file")
    p.add_argument("--diagnostics", action="store_true",
                   help="write per-frame xi/gamma/zeta side file")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("corpus", help="generate a synthetic noisy corpus")
    p.add_argument("spec", help="corpus spec config file")
    p.add_argument("count", type=int, help="number of items")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("tune", help="genetic parameter search over a corpus")
    p.add_argument("manifest", help="corpus manifest.json")
    p.add_argument("--ga-config", dest="ga_config", help="GA config / bounds file")
    p.add_argument("--out", required=True, help="output best-parameters config")
    p.add_argument("--objective-cmd", dest="objective_cmd",
                   help="external scorer command template ({dir} placeholder)")
    p.add_argument("--exchange-dir", dest="exchange_dir",
                   help="work directory for the external scorer")
    p.add_argument("--timeout", type=float, default=600.0,
                   help="external scorer timeout, seconds")
    p.add_argument("--seed", type=int, help="override the GA seed")
    p.add_argument("--jobs", type=int, help="parallel candidate evaluations")
    p.add_argument("--seed-incumbent", action="store_true",
                   help="put the default parameters into the initial population")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("metrics", help="ERLE / segmental SNR between two files")
    p.add_argument("signal_a")
    p.add_argument("signal_b")
    p.add_argument("--window", type=float, default=1.0, help="ERLE window, seconds")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except (FileNotFoundError, OSError, InputError, EchoforgeError) as exc:
        print(f"input/output error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
