"""Command-line driver: ``sparselab <subcommand> [--config FILE] [--key value ...]``.

Configuration is plain ``key=value`` text.  Precedence, lowest first:
schema defaults, per-subcommand defaults, the config file, ``--set k=v``
and ``--key value`` flags.  Each run writes ``<out>/<subcommand>.csv``
and ``<out>/<subcommand>.json``, both stamped with the config hash and
the calibration version.

Exit codes: 0 all PASS criteria met, 1 usage or invalid configuration,
2 a PASS criterion failed, 3 internal defect.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from . import calibration
from .errors import InternalDefect, InvalidInput

EXIT_PASS, EXIT_USAGE, EXIT_FAIL, EXIT_DEFECT = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _floats(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _ints(text) -> tuple:
    return tuple(int(round(x)) for x in _floats(text))


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    if text is None or str(text).strip().lower() in ("", "none", "auto", "measured"):
        return None
    return float(text)


# key: (parser, default, description)
SCHEMA = {
    "kernel": (str, "smooth-dini:hilbert", "kernel registry name, or rough-odd"),
    "d": (int, 1, "dimension"),
    "n": (int, 1024, "grid points per side"),
    "L": (float, 1.0, "domain side length"),
    "eps_min": (_opt_float, None, "smallest truncation radius (default: cell diagonal)"),
    "rho": (float, 1.4142135623730951, "radius ladder ratio"),
    "schedule": (str, "dyadic", "frequency schedule: dyadic or identity"),
    "family": (str, "power", "weight family (power)"),
    "deltas": (_floats, (-0.75, -0.5, -0.25, 0.25, 0.5, 0.75), "weight exponents"),
    "p": (float, 2.0, "Lebesgue exponent"),
    "seed": (int, 0, "base random seed"),
    "trials": (int, 10_000, "number of random trials"),
    "dims": (_ints, (1, 2), "dimensions for grid-check"),
    "J": (int, 6, "largest piece index"),
    "pairs": (int, 1000, "point pairs per piece for kernel estimates"),
    "estimates": (_bool, False, "decompose: also measure piece kernel estimates"),
    "ms": (_ints, (), "Beurling powers for the B^m experiment"),
    "alpha": (_opt_float, None, "series decay exponent (default: measured)"),
    "radius": (float, 0.3, "support radius of sparse test functions"),
    "pieces": (int, 16, "pieces per axis of sparse test functions"),
    "refine": (_bool, True, "repeat on the twice-refined grid"),
    "budget": (int, 16, "input budget for p != 2 lower bounds"),
    "delta_exp": (float, 0.5, "Cotlar: exponent of M_delta"),
    "method": (str, "power", "norm method: power or lanczos"),
    "out": (str, "sparselab-out", "output directory"),
    # PASS thresholds
    "tol_oracle": (float, 0.02, "weights: relative gap to the brute-force oracle"),
    "tol_scale": (float, 1e-8, "decompose: dilation identity tolerance"),
    "min_envelope": (float, 0.2, "decompose: minimum envelope exponent"),
    "max_violations": (float, 0.01, "decompose: envelope violation fraction"),
    "max_slope": (float, -0.2, "decompose: piece decay slope"),
    "min_r2": (float, 0.9, "decompose: fit R^2"),
    "max_size_spread": (float, 3.0, "decompose: size constant spread over j"),
    "eta": (float, 0.5, "sparse: sparseness fraction"),
    "max_refine_ratio": (float, 2.0, "stability factor under refinement"),
    "sw_tol": (float, 1e-6, "Stein-Weiss relative tolerance"),
    "exp_tol": (float, 0.15, "schedule-compare: exponent tolerance"),
    "max_exp_smooth": (float, 1.3, "a2-growth: exponent cap, smooth kernels"),
    "max_exp_rough": (float, 2.2, "a2-growth: exponent cap, rough kernels"),
    "max_bm_c": (float, 4.0, "a2-growth: cap on the B^m constant"),
}

SUB_DEFAULTS = {
    "grid-check": {"trials": 10_000},
    "weights": {"d": 1, "n": 4096, "L": 2.0},
    "decompose": {"kernel": "beurling:1", "d": 2, "n": 512, "L": 512.0, "J": 6, "pairs": 200},
    "sparse": {"d": 1, "n": 4096, "trials": 20},
    "norm-probe": {"d": 1, "n": 2048, "deltas": (-0.5, 0.0, 0.5), "method": "lanczos"},
    "bump-chain": {"kernel": "rough-odd", "d": 1, "n": 2048, "L": 2048.0, "J": 5,
                   "deltas": (0.5,)},
    "schedule-compare": {"kernel": "beurling:1", "d": 2, "n": 512, "L": 512.0},
    "a2-growth": {"d": 1, "n": 2048, "deltas": (0.0, -0.3, 0.3, -0.6, 0.6, -0.9, 0.9),
                  "method": "lanczos"},
    "cotlar": {"d": 1, "n": 1024},
    "weak11": {"d": 1, "n": 1024},
}


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    values: tuple  # sorted (key, value) pairs

    def __getitem__(self, key):
        return dict(self.values)[key]

    def canonical(self) -> str:
        return "\n".join(f"{k}={_fmt(v)}" for k, v in self.values if k != "out")

    @property
    def hash(self) -> str:
        text = f"subcommand={self.subcommand}\n" + self.canonical()
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config_text(text: str) -> dict:
    try:
        return calibration.parse(text)
    except InvalidInput as exc:
        raise UsageError(f"config: {exc}") from exc


def build_config(subcommand: str, overrides: dict) -> RunConfig:
    if subcommand not in SUB_DEFAULTS:
        raise UsageError(f"unknown subcommand {subcommand!r}")
    raw = {k: spec[1] for k, spec in SCHEMA.items()}
    raw.update(SUB_DEFAULTS[subcommand])
    errors = []
    for k, v in overrides.items():
        if k not in SCHEMA:
            errors.append(f"{k}: unknown key")
            continue
        try:
            raw[k] = SCHEMA[k][0](v) if v is not None else None
        except (TypeError, ValueError) as exc:
            errors.append(f"{k}: {exc}")
    _validate(subcommand, raw, errors)
    if errors:
        raise UsageError("invalid configuration:\n  " + "\n  ".join(errors))
    return RunConfig(subcommand, tuple(sorted(raw.items())))


def _validate(sub: str, c: dict, errors: list) -> None:
    if c["d"] not in (1, 2):
        errors.append("d: must be 1 or 2")
    if c["n"] < 8:
        errors.append("n: need at least 8 points per side")
    if not c["L"] > 0:
        errors.append("L: must be positive")
    if not c["rho"] > 1:
        errors.append("rho: must exceed 1")
    if c["eps_min"] is not None and not c["eps_min"] > 0:
        errors.append("eps_min: must be positive")
    if not c["p"] > 1:
        errors.append("p: must lie in (1, inf)")
    if c["schedule"] not in ("dyadic", "identity"):
        errors.append("schedule: dyadic or identity")
    if c["family"] != "power":
        errors.append("family: only the power family is available")
    if c["method"] not in ("power", "lanczos"):
        errors.append("method: power or lanczos")
    if c["trials"] < 1 or c["budget"] < 1 or c["pairs"] < 10:
        errors.append("trials/budget must be >= 1 and pairs >= 10")
    if c["J"] < 3:
        errors.append("J: need at least 3 pieces")
    if c["alpha"] is not None and not c["alpha"] > 0:
        errors.append("alpha: must be positive")
    if not 0 < c["delta_exp"] < 1:
        errors.append("delta_exp: must lie in (0, 1)")
    if any(abs(x) >= c["d"] for x in c["deltas"]):
        errors.append("deltas: power weights need |delta| < d")
    if any(m < 1 for m in c["ms"]):
        errors.append("ms: Beurling powers must be >= 1")
    if not c["radius"] > 0 or c["radius"] >= c["L"] / 2:
        if sub == "sparse":
            errors.append("radius: must lie in (0, L/2)")
    k = c["kernel"]
    rough = k.startswith("beurling:") or k == "rough-odd"
    if sub in ("sparse", "cotlar", "weak11") and rough:
        errors.append(f"kernel: {sub} needs a smooth-Dini kernel")
    if sub in ("decompose", "bump-chain", "schedule-compare") and not rough:
        errors.append(f"kernel: {sub} needs a rough kernel (beurling:m or rough-odd)")
    if k.startswith("beurling:") and c["d"] != 2:
        errors.append("kernel: Beurling kernels live in d = 2")
    if k == "rough-odd" and c["d"] != 1:
        errors.append("kernel: rough-odd lives in d = 1")
    if sub == "bump-chain" and c["p"] != 2:
        errors.append("p: bump-chain is certified at p = 2 only")


# ---------------------------------------------------------------------------
# subcommands; each returns (rows, summary, failing criteria)


def _kernel(name: str):
    from .lpdecomp import rough_odd_1d
    from .operators import get_kernel

    return rough_odd_1d() if name == "rough-odd" else get_kernel(name)


def _grid(c):
    from .grid import Grid

    return Grid(c["d"], c["n"], c["L"])


def _radii(c, grid):
    from .operators import RadiiSet

    if c["eps_min"] is None:
        return None
    return RadiiSet.ladder(c["eps_min"], grid.diameter, c["rho"])


def run_grid_check(c):
    from .dyadic import covering_trials

    rows = []
    for i, d in enumerate(c["dims"]):
        rows.append(covering_trials(d, c["trials"], c["seed"] + i))
    failing = [f"covering lemma d={r['d']}" for r in rows
               if r["cover_failures"] or r["within_failures"]]
    summary = {"balls": sum(r["trials"] for r in rows),
               "failures": sum(r["cover_failures"] + r["within_failures"] for r in rows)}
    return rows, summary, failing


def run_weights(c):
    from .weights import brute_force_ap_1d, characteristics, power_weight

    g = _grid(c)
    rows = []
    for delta in c["deltas"]:
        w = power_weight(delta, g)
        row = {"delta": delta, **characteristics(w, c["p"]).as_row()}
        if g.d == 1:
            oracle = brute_force_ap_1d(w, c["p"])
            row["oracle_ap"] = oracle
            row["rel_gap"] = abs(row["ap"] - oracle) / oracle
        rows.append(row)
    failing = [f"A_p oracle agreement delta={r['delta']}" for r in rows
               if r.get("rel_gap", 0.0) > c["tol_oracle"]]
    summary = {"max_rel_gap": max((r.get("rel_gap", 0.0) for r in rows), default=0.0)}
    return rows, summary, failing


def run_decompose(c):
    from .lpdecomp import (get_schedule, kernel_estimate_fit, multiplier_envelope,
                           piece_decay_fit, scale_invariance_error)

    k, g, s = _kernel(c["kernel"]), _grid(c), get_schedule(c["schedule"])
    scale = scale_invariance_error(k, g)
    env = multiplier_envelope(k, g)
    fit = piece_decay_fit(k, s, g, c["J"])
    rows = [{"j": j, "N": s(j), "N_prev": s(j - 1) if j else "", "piece_norm": nrm}
            for j, nrm in enumerate(fit["norms"])]
    summary = {"scale_error": scale, "alpha_low": env["alpha_low"],
               "alpha_high": env["alpha_high"], "violations": env["violations"],
               "slope": fit["slope"], "r2": fit["r2"]}
    failing = []
    if scale > c["tol_scale"]:
        failing.append("multiplier scale invariance")
    if min(env["alpha_low"], env["alpha_high"]) < c["min_envelope"] \
            or env["violations"] >= c["max_violations"]:
        failing.append("multiplier decay envelope")
    if fit["slope"] > c["max_slope"] or fit["r2"] < c["min_r2"]:
        failing.append("piece decay")
    if c["estimates"]:
        est = kernel_estimate_fit(k, s, min(c["J"], 5), c["pairs"], c["seed"])
        for row, e in zip(rows, est["rows"]):
            row.update({"size_const": e["size_const"], "dini": e["dini"]})
        summary.update({key: est[key] for key in
                        ("size_spread", "dini_prop_c", "dini_prop_r2", "dini_r2")})
        if est["size_spread"] > c["max_size_spread"] or est["dini_prop_r2"] < c["min_r2"]:
            failing.append("piece kernel estimates")
    return rows, summary, failing


def run_sparse(c):
    from .sparse import domination_trial

    k = _kernel(c["kernel"])
    rows = [domination_trial(k, c["d"], c["n"], c["seed"] + i, c["radius"], c["L"],
                             c["pieces"], c["refine"])
            for i in range(c["trials"])]
    failing = [f"sparse domination seed={r['seed']}" for r in rows if not r["pass"]]
    consts = [v for r in rows for key, v in r.items() if key.endswith("_constant")]
    summary = {"trials": len(rows), "max_constant": max(consts),
               "passed": sum(r["pass"] for r in rows)}
    return rows, summary, failing


def _operator(c, grid):
    from . import normlab

    k = c["kernel"]
    if k.startswith("beurling:"):
        return normlab.beurling_operator(grid, int(k.split(":", 1)[1])), True
    kern = _kernel(k)
    eps = c["eps_min"]
    return normlab.truncated_cz_operator(kern, grid, eps), False


def run_norm_probe(c):
    from . import normlab
    from .weights import characteristics, power_weight

    g = _grid(c)
    T, _ = _operator(c, g)
    rows, failing = [], []
    for delta in c["deltas"]:
        w = power_weight(delta, g)
        ch = characteristics(w, 2.0)
        est = normlab.weighted_l2_norm(T, w, method=c["method"], seed=c["seed"])
        row = {"delta": delta, "a2": ch.ap, "l2_norm": est.value, "method": est.method,
               "iterations": est.iterations, "converged": est.converged,
               "bracket_lo": est.bracket[0], "bracket_hi": est.bracket[1]}
        if c["p"] != 2:
            lb = normlab.weighted_lp_lower_bound(T, w, c["p"], c["budget"], c["seed"])
            row["lp_lower_bound"] = lb["value"]
        sw = normlab.stein_weiss_check(T, None, w.power(2.0), 2, 0.5, c["sw_tol"])
        row["stein_weiss_pass"] = sw["pass"]
        rows.append(row)
        if not sw["pass"]:
            failing.append(f"Stein-Weiss delta={delta}")
    summary = {"operator": T.descriptor, "all_converged": all(r["converged"] for r in rows)}
    return rows, summary, failing


def run_bump_chain(c):
    from .lpdecomp import get_schedule
    from .normlab import epsilon_bump_chain
    from .weights import power_weight

    g, k, s = _grid(c), _kernel(c["kernel"]), get_schedule(c["schedule"])
    rows, failing, summary = [], [], {}
    for delta in c["deltas"]:
        rep = epsilon_bump_chain(k, power_weight(delta, g), 2.0, s, c["J"],
                                 method=c["method"])
        for r in rep["rows"]:
            rows.append({"delta": delta, "epsilon": rep["epsilon"], **r})
        summary[f"delta={delta}"] = {"total": rep["total"],
                                     "total_over_chars": rep["total_over_chars"]}
        if not rep["pass"]:
            failing.append(f"interpolation chain delta={delta}")
    return rows, summary, failing


def run_schedule_compare(c):
    from .lpdecomp import get_schedule, piece_decay_fit
    from .normlab import schedule_exponent

    alpha = c["alpha"]
    source = "config"
    if alpha is None:
        alpha = piece_decay_fit(_kernel(c["kernel"]), get_schedule("dyadic"), _grid(c),
                                c["J"])["alpha"]
        source = "measured piece decay"
    rows, summary, failing = [], {"alpha": alpha, "alpha_source": source}, []
    for name, target in (("dyadic", 1.0), ("identity", 2.0)):
        r = schedule_exponent(get_schedule(name), alpha)
        for lam, v, b in zip(r["lambdas"], r["values"], r["bruteforce"]):
            rows.append({"schedule": name, "Lambda": lam, "series": v, "bruteforce": b})
        summary[name] = {"exponent": r["exponent"], "ci": list(r["ci"]),
                         "max_rel_diff": r["max_rel_diff"]}
        if abs(r["exponent"] - target) > c["exp_tol"] or r["max_rel_diff"] > 1e-9:
            failing.append(f"schedule exponent {name}")
    return rows, summary, failing


def run_a2_growth(c):
    from . import normlab
    from .weights import power_weight

    g = _grid(c)
    T, rough = _operator(c, g)
    ws = [(d, power_weight(d, g)) for d in c["deltas"]]
    if rough:
        scale = 1.0
    else:
        kern = _kernel(c["kernel"])
        scale = (kern.l2_norm or 0.0) + kern.cz_constant
    rep = normlab.a2_growth_experiment(T, ws, 2.0, scale, 2.0 if rough else 1.0,
                                       c["method"])
    rows = [dict(r) for r in rep.rows]
    cap = c["max_exp_rough"] if rough else c["max_exp_smooth"]
    summary = {"fit_exponent": rep.fit["exponent"], "ci": list(rep.fit["ci"]),
               "r2": rep.fit["r2"], "cap": cap,
               "bound_violations": sum(r["norm"] > r["bound"] for r in rows)}
    failing = [] if rep.fit["exponent"] <= cap else ["A_2 growth exponent"]
    if c["ms"]:
        bm = normlab.beurling_power_experiment(g, ws, c["ms"], c["method"])
        for r in bm["rows"]:
            rows.append({"experiment": "B^m", **r})
        summary["bm_c"] = bm["c"]
        if not bm["c"] <= c["max_bm_c"]:
            failing.append("B^m constant")
    return rows, summary, failing


def _refined(c, fn):
    from .grid import Grid

    vals = []
    for n in (c["n"], 2 * c["n"]):
        vals.append(fn(Grid(c["d"], n, c["L"])))
    return vals


def run_weak11(c):
    from .operators import standard_test_set, weak11_ratio

    k = _kernel(c["kernel"])
    res = _refined(c, lambda g: weak11_ratio(k, standard_test_set(g, c["seed"]), c["eps_min"]))
    rows = [{"n": n, **r} for n, r in zip((c["n"], 2 * c["n"]), res)]
    return _stability(rows, "ratio", c, "weak (1,1) ratio")


def run_cotlar(c):
    from .operators import cotlar_check, standard_test_set

    k = _kernel(c["kernel"])

    def one(g):
        return max(cotlar_check(k, f, c["delta_exp"], _radii(c, g))
                   for f in standard_test_set(g, c["seed"]))

    res = _refined(c, one)
    rows = [{"n": n, "constant": v} for n, v in zip((c["n"], 2 * c["n"]), res)]
    return _stability(rows, "constant", c, "Cotlar constant")


def _stability(rows, key, c, label):
    a, b = rows[0][key], rows[1][key]
    ratio = b / a if a > 0 else math.inf
    ok = math.isfinite(a) and math.isfinite(b) and 1 / c["max_refine_ratio"] <= ratio <= c["max_refine_ratio"]
    return rows, {"refine_ratio": ratio}, [] if ok else [f"{label} stability"]


RUNNERS = {
    "grid-check": run_grid_check,
    "weights": run_weights,
    "decompose": run_decompose,
    "sparse": run_sparse,
    "norm-probe": run_norm_probe,
    "bump-chain": run_bump_chain,
    "schedule-compare": run_schedule_compare,
    "a2-growth": run_a2_growth,
    "cotlar": run_cotlar,
    "weak11": run_weak11,
}


# ---------------------------------------------------------------------------
# artifacts


def _cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "item"):
        return _cell(v.item())
    return str(v)


def rows_to_csv(rows, header_lines=()) -> str:
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(cols)
    for r in rows:
        wr.writerow([_cell(r.get(k, "")) for k in cols])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def run(subcommand: str, config: RunConfig, out_dir: Path | None = None,
        stream=sys.stdout) -> int:
    """Run one subcommand, write its artifacts and return the exit status."""
    runner = RUNNERS[subcommand]
    try:
        rows, summary, failing = runner(config)
    except InternalDefect as exc:
        print(f"INTERNAL DEFECT: {exc}", file=sys.stderr)
        return EXIT_DEFECT
    except InvalidInput as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(config["out"] if out_dir is None else out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = [f"subcommand={subcommand}", f"config_hash={config.hash}",
             f"calibration_version={calibration.version()}"]
    (out / f"{subcommand}.csv").write_text(rows_to_csv(rows, stamp))
    doc = {"subcommand": subcommand, "config_hash": config.hash,
           "calibration_version": calibration.version(),
           "config": dict(config.values), "summary": summary,
           "pass": not failing, "failing": failing, "rows": rows}
    (out / f"{subcommand}.json").write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True))
    print(f"{subcommand}  config={config.hash}  calibration=v{calibration.version()}", file=stream)
    for k, v in summary.items():
        print(f"  {k}: {v}", file=stream)
    if failing:
        for name in failing:
            print(f"FAIL: {name}", file=stream)
        return EXIT_FAIL
    print("PASS", file=stream)
    return EXIT_PASS


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sparselab", description=__doc__.split("\n", 1)[0],
                epilog="keys: " + ", ".join(SCHEMA))
    p.add_argument("subcommand", help=" | ".join(RUNNERS))
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return p


def _collect(argv) -> tuple[str, dict]:
    args, rest = _parser().parse_known_args(argv)
    over = {}
    if args.config:
        try:
            over.update(parse_config_text(Path(args.config).read_text()))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        over[k.strip()] = v.strip()
    i = 0
    while i < len(rest):
        tok = rest[i]
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(rest):
                raise UsageError(f"missing value for {tok}")
            val = rest[i + 1]
            i += 2
        over[key.replace("-", "_")] = val
    return args.subcommand, over


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if argv and argv[0] in ("-h", "--help"):
        _parser().print_help()
        return EXIT_PASS
    try:
        sub, over = _collect(argv)
        cfg = build_config(sub, over)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        print(f"subcommands: {', '.join(RUNNERS)}", file=sys.stderr)
        return EXIT_USAGE
    return run(sub, cfg)
