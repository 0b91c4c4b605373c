"""Config-driven batch front end.

    lrquench <dos|quench|fidelity|dmft-check|oracle-compare> --config <path>
             [--out <dir>] [--seed <u64>] [--workers <n>]

The config is flat ``key = value`` text, one key per line, ``#`` starts a
comment, lists are comma separated. Numeric values may use ``pi`` and simple
arithmetic (``M_alpha = -4*pi``). A JSON sidecar written by a previous run is
also accepted as config; its ``config`` block replays the run exactly.
Every key and its default is listed in ``KEYS``. LRQUENCH_OUT, when set,
overrides ``--out``.
"""
from __future__ import annotations

import argparse
import ast
import json
import math
import operator
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import dmft, ed_oracle, quench, spectral
from .disorder import make_spec, sample
from .fidelity import fidelity_realization
from .model import ModelParams, build_clean_hopping_matrix, dispersion

COMMANDS = ("dos", "quench", "fidelity", "dmft-check", "oracle-compare")


@dataclass(frozen=True)
class Key:
    kind: str  # int, float, bool, str, ints, floats
    default: object
    doc: str


KEYS = {
    # model
    "L": Key("int", 64, "ring size (even)"),
    "alpha": Key("float", 0.5, "coupling decay exponent"),
    "M_alpha": Key("float", 0.0, "long-range mean amplitude"),
    "J": Key("float", 1.0, "hopping scale"),
    "sigma": Key("float", 1.0, "dimensionless disorder strength"),
    "U": Key("float", 1.0, "interaction after the quench"),
    "mu": Key("float", 0.0, "chemical potential (matrix diagonal)"),
    "kac": Key("bool", True, "Kac rescaling of the couplings"),
    "seed": Key("int", 0, "root seed of the realization family"),
    # runs
    "L_list": Key("ints", (), "sizes to sweep; empty means [L]"),
    "n_realizations": Key("int", 1, "realizations 0..n-1 of the seed family"),
    "workers": Key("int", 0, "worker threads; 0 means all cores (results do not depend on it)"),
    "disorder_model": Key("str", "independent", "independent or circulant"),
    "sigma_convention": Key("str", "sqrtL", "entry std sigma J / sqrt(L) (sqrtL) or sigma J / L (L)"),
    "t_max": Key("float", 10.0, "end of the time window"),
    "n_times": Key("int", 512, "number of equally spaced times in [0, t_max]"),
    "tier": Key("str", "auto", "exact, averaged or auto (exact up to L = 128)"),
    "observable": Key("str", "double_occupancy", "double_occupancy or kinetic"),
    "svg": Key("bool", True, "write SVG plots next to the CSV files"),
    # dos
    "margin": Key("float", -1.0, "bulk margin beyond 2 J_eff; negative means 0.05 J_eff"),
    # dmft-check
    "N_list": Key("ints", tuple(2 ** k for k in range(4, 13)), "sizes of the 1/N sweep"),
    "eps0": Key("float", 0.7, "isolated level of the flat model"),
    "mixed_outliers": Key("floats", (3.0, -2.5, 4.0), "outlier positions of the mixed model"),
    "omega": Key("float", 1.0, "Matsubara frequency of the 1/N sweep"),
    "dmft_mu": Key("float", 0.2, "chemical potential of the dmft checks"),
    "n_points": Key("int", 50, "points of the reciprocal round-trip check"),
    "exponent_tol": Key("float", 0.1, "allowed deviation of the fitted exponents from -1"),
    "roundtrip_tol": Key("float", 1e-8, "allowed relative round-trip error"),
    # oracle-compare
    "U_list": Key("floats", (0.1, 0.05, 0.025), "interactions of the ED comparison"),
}

_ALLOWED = {
    "disorder_model": ("independent", "circulant"),
    "sigma_convention": ("sqrtL", "L"),
    "tier": ("auto", "exact", "averaged"),
    "observable": ("double_occupancy", "kinetic"),
}

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}


class ConfigError(ValueError):
    pass


def _eval_number(text: str) -> float:
    """Numbers, pi, + - * / ** and parentheses; nothing else."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"not a number: {text!r}")

    return ev(ast.parse(text.strip(), mode="eval"))


def _convert(kind: str, raw):
    if not isinstance(raw, str):  # values from a JSON sidecar
        if kind in ("ints", "floats"):
            return tuple(_convert(kind[:-1], v) for v in raw)
        raw = str(raw).lower() if isinstance(raw, bool) else str(raw)
    if kind == "bool":
        v = raw.strip().lower()
        if v in ("true", "yes", "on", "1"):
            return True
        if v in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind == "int":
        v = _eval_number(raw)
        if float(v) != int(v):
            raise ValueError(f"not an integer: {raw!r}")
        return int(v)
    if kind == "float":
        return float(_eval_number(raw))
    if kind == "str":
        return raw.strip()
    if kind in ("ints", "floats"):
        items = [s for s in raw.split(",") if s.strip()]
        return tuple(_convert(kind[:-1], s) for s in items)
    raise AssertionError(kind)


def parse_config_text(text: str) -> dict:
    raw, errors = {}, []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        k, v = (s.strip() for s in line.split("=", 1))
        if k in raw:
            errors.append(f"{k}: given twice")
        raw[k] = v
    return _resolve(raw, errors)


def load_config(path) -> dict:
    p = Path(path)
    text = p.read_text()
    if p.suffix == ".json":
        data = json.loads(text)
        return _resolve(dict(data.get("config", data)), [])
    return parse_config_text(text)


def _resolve(raw: dict, errors: list) -> dict:
    cfg = {k: spec.default for k, spec in KEYS.items()}
    for k, v in raw.items():
        if k not in KEYS:
            errors.append(f"{k}: unknown key")
            continue
        try:
            cfg[k] = _convert(KEYS[k].kind, v)
        except (ValueError, SyntaxError) as exc:
            errors.append(f"{k}: {exc}")
    errors += validate(cfg)
    if errors:
        raise ConfigError("invalid config:\n  " + "\n  ".join(errors))
    return cfg


def validate(cfg: dict) -> list:
    """Every offending key, not just the first."""
    errs = []
    sizes = list(cfg["L_list"]) or [cfg["L"]]
    for L in sizes:
        if L < 2 or L % 2:
            errs.append(f"L: {L} must be an even integer >= 2")
    if cfg["alpha"] < 0:
        errs.append("alpha: must be >= 0")
    if cfg["kac"] and cfg["alpha"] >= 1:
        errs.append("kac: Kac rescaling requires alpha < 1")
    if cfg["J"] <= 0:
        errs.append("J: must be > 0")
    if cfg["sigma"] < 0:
        errs.append("sigma: must be >= 0")
    if not 0 <= cfg["seed"] < 2 ** 64:
        errs.append("seed: must fit in an unsigned 64-bit integer")
    if cfg["n_realizations"] < 1:
        errs.append("n_realizations: must be >= 1")
    if cfg["workers"] < 0:
        errs.append("workers: must be >= 0")
    if cfg["t_max"] <= 0:
        errs.append("t_max: must be > 0")
    if cfg["n_times"] < 2:
        errs.append("n_times: must be >= 2")
    if cfg["n_points"] < 1:
        errs.append("n_points: must be >= 1")
    if any(N < 2 for N in cfg["N_list"]) or len(cfg["N_list"]) < 2:
        errs.append("N_list: needs at least two sizes >= 2")
    for k, allowed in _ALLOWED.items():
        if cfg[k] not in allowed:
            errs.append(f"{k}: {cfg[k]!r} not in {allowed}")
    return errs


def model_params(cfg: dict, L: int | None = None) -> ModelParams:
    return ModelParams(L=cfg["L"] if L is None else L, alpha=cfg["alpha"], M_alpha=cfg["M_alpha"],
                       J=cfg["J"], sigma=cfg["sigma"], U=cfg["U"], mu=cfg["mu"], kac=cfg["kac"],
                       seed=cfg["seed"])


def sizes(cfg: dict) -> list:
    return list(cfg["L_list"]) or [cfg["L"]]


def workers(cfg: dict) -> int:
    return cfg["workers"] or os.cpu_count() or 1


# output ----------------------------------------------------------------------

def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def csv_text(header, rows) -> str:
    lines = [",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write(out: Path, name: str, text: str) -> Path:
    path = out / name
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def _jsonable(o):
    if isinstance(o, tuple):
        return list(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def sidecar(cfg: dict, command: str, **extra) -> str:
    meta = dict(command=command, version=__version__, config=cfg, **extra)
    return json.dumps(meta, indent=2, sort_keys=True, default=_jsonable) + "\n"


def svg_plot(series, title="", xlabel="", ylabel="", bars=None, vlines=(), logxy=False,
             width=640, height=400) -> str:
    """Minimal SVG: polylines, optional histogram bars and vertical markers."""
    pad_l, pad_r, pad_t, pad_b = 64, 16, 28, 44
    xs, ys = [], []
    tr = (lambda v: np.log10(np.abs(v))) if logxy else (lambda v: np.asarray(v, float))
    for x, y, _, _ in series:
        xs.append(tr(x))
        ys.append(tr(y))
    if bars is not None:
        counts, edges = bars
        xs.append(np.asarray(edges, float))
        ys.append(np.concatenate(([0.0], counts)))
    if vlines:
        xs.append(np.asarray(vlines, float))
    allx = np.concatenate([np.ravel(a) for a in xs]) if xs else np.zeros(1)
    ally = np.concatenate([np.ravel(a) for a in ys]) if ys else np.zeros(1)
    allx, ally = allx[np.isfinite(allx)], ally[np.isfinite(ally)]
    x0, x1 = (allx.min(), allx.max()) if allx.size else (0.0, 1.0)
    y0, y1 = (ally.min(), ally.max()) if ally.size else (0.0, 1.0)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def px(x):
        return pad_l + (x - x0) / (x1 - x0) * pw

    def py(y):
        return pad_t + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{width / 2}" y="18" text-anchor="middle">{title}</text>',
           f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle">{xlabel}</text>',
           f'<text x="14" y="{height / 2}" text-anchor="middle" '
           f'transform="rotate(-90 14 {height / 2})">{ylabel}</text>']
    for v, anchor in ((x0, "start"), (x1, "end")):
        out.append(f'<text x="{px(v):.1f}" y="{pad_t + ph + 16}" text-anchor="{anchor}">{v:.3g}</text>')
    for v in (y0, y1):
        out.append(f'<text x="{pad_l - 4}" y="{py(v) + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    if bars is not None:
        counts, edges = bars
        for c, a, b in zip(counts, edges[:-1], edges[1:]):
            out.append(f'<rect x="{px(a):.2f}" y="{py(c):.2f}" width="{max(px(b) - px(a), 0.1):.2f}" '
                       f'height="{py(0.0) - py(c):.2f}" fill="#bbbbbb"/>')
    for v in vlines:
        out.append(f'<line x1="{px(v):.2f}" x2="{px(v):.2f}" y1="{pad_t}" y2="{pad_t + ph}" '
                   f'stroke="#1f77b4" stroke-dasharray="3,3"/>')
    palette = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    for k, ((_, _, label, colour), x, y) in enumerate(zip(series, xs, ys)):
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        col = colour or palette[k % len(palette)]
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.2" points="{pts}"/>')
        out.append(f'<text x="{pad_l + 8}" y="{pad_t + 16 + 14 * k}" fill="{col}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# commands --------------------------------------------------------------------

class CheckFailed(RuntimeError):
    pass


def cmd_dos(cfg: dict, out: Path) -> list:
    failures, summary = [], []
    for L in sizes(cfg):
        params = model_params(cfg, L)
        if params.sigma == 0 or params.alpha >= 1 or params.M_alpha == 0:
            predicted = spectral.PredictedDOS(params.J_eff, [], float("nan"))
        else:
            predicted = spectral.predicted_dos(params, dispersion(params))
        for k in range(cfg["n_realizations"]):
            tag = f"L{L}_r{k}"
            spec = make_spec(params, cfg["disorder_model"], k, cfg["sigma_convention"])
            res = spectral.eigensolve(sample(params, spec), want_vectors=False,
                                      meta=dict(seed=params.seed, realization_index=k))
            if res.eigenvalues.size != L or not np.all(np.isfinite(res.eigenvalues)):
                failures.append(f"{tag}: eigenvalue count or finiteness")
            if params.sigma == 0:
                report = _degenerate_report(res, predicted)
            else:
                margin = None if cfg["margin"] < 0 else cfg["margin"]
                report = spectral.compare_spectrum(res, predicted, margin)
            write(out, f"eigenvalues_{tag}.csv",
                  csv_text(("index", "lambda"), enumerate(res.eigenvalues)))
            write(out, f"report_{tag}.txt", report.to_text())
            write(out, f"outliers_{tag}.csv", report.to_csv())
            summary.append((L, k, report.ks, report.predicted.size, report.unmatched_predicted,
                            report.max_rel_error))
            if cfg["svg"]:
                write(out, f"dos_{tag}.svg", _dos_svg(res.eigenvalues, params, predicted))
    write(out, "dos_summary.csv", csv_text(("L", "realization", "ks_bulk", "n_predicted",
                                            "unmatched_predicted", "max_rel_error"), summary))
    for row in summary:
        print(f"L={row[0]} r={row[1]} ks={row[2]:.4g} outliers={row[3]} "
              f"unmatched={row[4]} max_rel_error={row[5]:.4g}")
    return failures


def _degenerate_report(res, predicted):
    warnings.warn("sigma = 0: degenerate bulk, no semicircle comparison", RuntimeWarning)
    ev = np.asarray(res.eigenvalues)
    return spectral.ComparisonReport(0.0, 0.0, ev.size, 0, float("nan"), np.zeros(0), np.zeros(0),
                                     np.zeros(0), 0, 0, 0, ["degenerate bulk (sigma = 0)"])


def _dos_svg(ev, params, predicted) -> str:
    counts, edges = spectral.histogram(ev)
    J = params.J_eff
    series = []
    if J > 0:
        x = np.linspace(-2 * J, 2 * J, 401)
        series.append((x, spectral.semicircle_density(x, J), "semicircle", "#d62728"))
    return svg_plot(series, title=f"DOS L={params.L} alpha={params.alpha:g}", xlabel="lambda",
                    ylabel="density", bars=(counts, edges), vlines=tuple(predicted.lambdas))


def cmd_quench(cfg: dict, out: Path) -> list:
    failures, series, rows = [], [], []
    times = np.linspace(0.0, cfg["t_max"], cfg["n_times"])
    for L in sizes(cfg):
        params = model_params(cfg, L)
        try:
            res = quench.ensemble_quench(params, cfg["n_realizations"], times, cfg["tier"],
                                         cfg["disorder_model"], workers(cfg), cfg["observable"])
        except RuntimeError as exc:
            failures.append(str(exc))
            continue
        if not np.all(np.isfinite(res.values)):
            failures.append(f"L={L}: non-finite values")
        if params.U == 0 and np.ptp(res.values) != 0:
            failures.append(f"L={L}: U = 0 curve is not flat")
        late = quench.late_window_std(res, 0.5 * cfg["t_max"], cfg["t_max"])
        write(out, f"quench_L{L}.csv", res.to_csv())
        write(out, f"quench_L{L}.json", sidecar(cfg, "quench", L=L, plateau=res.plateau,
                                                late_window_std=late, seeds=res.seeds))
        rows.append((L, res.values[0], res.plateau if res.plateau is not None else float("nan"), late))
        series.append((res.times, res.values, f"L={L}", None))
    write(out, "quench_summary.csv", csv_text(("L", "initial", "plateau", "late_window_std"), rows))
    for r in rows:
        print(f"L={r[0]} initial={r[1]:.6g} plateau={r[2]:.6g} late_window_std={r[3]:.4g}")
    if cfg["svg"] and series:
        write(out, "quench.svg", svg_plot(series, title=f"{cfg['observable']} U={cfg['U']:g}",
                                          xlabel="t", ylabel=cfg["observable"]))
    return failures


def cmd_fidelity(cfg: dict, out: Path) -> list:
    failures, series, rows = [], [], []
    times = np.linspace(0.0, cfg["t_max"], cfg["n_times"])
    coeffs = {"auto": "auto", "exact": "exact", "averaged": "averaged"}[cfg["tier"]]
    for L in sizes(cfg):
        params = model_params(cfg, L)
        Fs = []
        for k in range(cfg["n_realizations"]):
            try:
                res = fidelity_realization(params, k, times, coeffs)
            except Exception as exc:
                failures.append(f"L={L} realization {k} (seed {params.seed}) failed: {exc}")
                continue
            if res.F[0] != 1.0 or np.any((res.F < 0) | (res.F > 1)):
                failures.append(f"L={L} r={k}: F(0) != 1 or F outside [0, 1]")
            Fs.append(res.F)
            write(out, f"fidelity_L{L}_r{k}.csv", res.to_csv())
            write(out, f"fidelity_L{L}_r{k}.json", sidecar(cfg, "fidelity", L=L, seeds=res.seeds,
                                                          max_one_minus_F=float(np.max(1 - res.F))))
            rows.append((L, k, res.seeds["n_modified"], float(np.max(1 - res.F))))
            series.append((times, res.F, f"L={L} r={k}", None))
        if Fs:
            mean = np.mean(Fs, axis=0)
            write(out, f"fidelity_L{L}_mean.csv", csv_text(("t", "F"), zip(times, mean)))
    write(out, "fidelity_summary.csv",
          csv_text(("L", "realization", "n_modified", "max_one_minus_F"), rows))
    for r in rows:
        print(f"L={r[0]} r={r[1]} modified={r[2]} max(1-F)={r[3]:.6g}")
    if cfg["svg"] and series:
        write(out, "fidelity.svg", svg_plot(series, title="fidelity", xlabel="t", ylabel="F"))
    return failures


def cmd_dmft_check(cfg: dict, out: Path) -> list:
    failures = []
    Ns = np.asarray(cfg["N_list"])
    mu, w = cfg["dmft_mu"], cfg["omega"]
    sc = dmft.DOSModel.semicircle(cfg["J"])
    G = complex(dmft.hilbert_transform(sc, 1j * w + mu))
    tol = cfg["exponent_tol"]
    rows, series = [], []
    sweeps = [("flat_kac_on", dmft.flat_corrections(G, cfg["eps0"], Ns, mu, w, kac=True)),
              ("flat_kac_off", dmft.flat_corrections(G, cfg["eps0"], Ns, mu, w, kac=False)),
              ("mixed", dmft.mixed_corrections(G, cfg["J"], cfg["mixed_outliers"], Ns, mu, w))]
    corr_rows = []
    for name, c in sweeps:
        p = dmft.power_law_exponent(Ns, c)
        ok = abs(p + 1.0) <= tol
        rows.append((name, p, ok))
        if not ok:
            failures.append(f"{name}: exponent {p:.4f} outside -1 +- {tol}")
        corr_rows += [(name, N, abs(v)) for N, v in zip(Ns, c)]
        series.append((Ns, np.abs(c), name, None))
    write(out, "dmft_exponents.csv", csv_text(("model", "exponent", "within_tol"), rows))
    write(out, "dmft_corrections.csv", csv_text(("model", "N", "abs_correction"), corr_rows))
    # reciprocal round trip on Matsubara-like points
    omegas = np.linspace(0.1, 100.0, cfg["n_points"])
    xs = 1j * omegas + mu
    mixed = dmft.DOSModel.mixed(cfg["J"], cfg["mixed_outliers"], int(Ns[-1]))
    rt = []
    for x in xs:
        e_sc = abs(dmft.reciprocal_semicircle(dmft.hilbert_transform(sc, x), cfg["J"]) - x) / abs(x)
        e_mx = abs(dmft.invert_hilbert(mixed, dmft.hilbert_transform(mixed, x)) - x) / abs(x)
        rt.append((x.imag, e_sc, e_mx))
    worst = max(max(r[1], r[2]) for r in rt)
    if worst > cfg["roundtrip_tol"]:
        failures.append(f"round trip error {worst:.3g} above {cfg['roundtrip_tol']:g}")
    write(out, "dmft_roundtrip.csv", csv_text(("omega", "semicircle_rel_error", "mixed_rel_error"), rt))
    print("model,exponent")
    for r in rows:
        print(f"{r[0]},{r[1]:.4f}")
    print(f"max round-trip relative error = {worst:.3g}")
    if cfg["svg"]:
        write(out, "dmft.svg", svg_plot(series, title="Weiss-field correction", xlabel="log10 N",
                                        ylabel="log10 |correction|", logxy=True))
    return failures


def oracle_table(cfg: dict):
    """Max |d_UPT - d_ED| on [0, t_max] for each U of U_list (clean ring, L = cfg L)."""
    params = model_params(cfg).with_(sigma=0.0)
    if params.L > ed_oracle.L_MAX:
        raise ConfigError(f"L: oracle comparison is limited to L <= {ed_oracle.L_MAX}")
    T = build_clean_hopping_matrix(params)
    basis = quench.plane_wave_basis(params)
    e = basis.eigenvalues
    order = np.sort(e)
    if order[params.L // 2 - 1] == order[params.L // 2]:
        raise ConfigError("degenerate Fermi level: the half-filled sea is not unique for these parameters")
    spec = quench.jomega_double_occupancy(quench.build_fermi_sea(basis, params.L // 2))
    times = np.linspace(0.0, cfg["t_max"], cfg["n_times"])
    rows = []
    for U in cfg["U_list"]:
        d_ed = ed_oracle.quench_double_occupancy(T, basis.eigenvectors, e, U, times)
        d_upt = quench.evolve_observable(spec, U, times).values
        rows.append([U, float(np.max(np.abs(d_ed - d_upt))), float(np.max(np.abs(d_ed - d_ed[0])))])
    for a, b in zip(rows, rows[1:]):
        b.append(a[1] / b[1])
    rows[0].append(float("nan"))
    return rows, spec.reference_value, times


def cmd_oracle_compare(cfg: dict, out: Path) -> list:
    failures = []
    rows, d0, _ = oracle_table(cfg)
    if not np.isfinite([r[1] for r in rows]).all():
        failures.append("non-finite ED or UPT values")
    table = [(r[0], r[1], r[2], r[3] if len(r) > 3 else float("nan")) for r in rows]
    write(out, "oracle_compare.csv", csv_text(("U", "max_abs_error", "max_abs_change", "error_ratio"), table))
    print(f"L={cfg['L']} d(0)={d0:.6g}")
    print("U,max_abs_error,max_abs_change,error_ratio")
    for r in table:
        print(f"{r[0]:g},{r[1]:.6g},{r[2]:.6g},{r[3]:.4g}")
    return failures


HANDLERS = {"dos": cmd_dos, "quench": cmd_quench, "fidelity": cmd_fidelity,
            "dmft-check": cmd_dmft_check, "oracle-compare": cmd_oracle_compare}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lrquench", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="flat key = value file or a JSON sidecar")
    ap.add_argument("--out", default="out", help="output directory (LRQUENCH_OUT overrides)")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--workers", type=int, default=None, help="override the config worker count")
    ap.add_argument("--version", action="version", version=f"lrquench {__version__}")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.workers is not None:
            cfg["workers"] = args.workers
        errs = validate(cfg)
        if errs:
            raise ConfigError("invalid config:\n  " + "\n  ".join(errs))
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"lrquench: {exc}", file=sys.stderr)
        return 2
    out = Path(os.environ.get("LRQUENCH_OUT") or args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        failures = HANDLERS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"lrquench: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        failures = [f"{type(exc).__name__}: {exc}"]
    write(out, "meta.json", sidecar(cfg, args.command, failures=failures))
    for f in failures:
        print(f"check failed: {f}", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
