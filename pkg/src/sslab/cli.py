"""Command-line experiment driver.

``sslab <experiment> --config <path> [--output <dir>] [--seed <u64>] [--threads N]``

Configs are flat ``key: value`` text files. Every experiment writes one CSV
per result table and a JSON sidecar with the config echo and scalar results.
Exit codes: 0 success, 2 invalid config, 3 numerical failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import os
import subprocess
import sys
from pathlib import Path

# numpy and the solver modules are imported lazily so that ``--threads`` can
# reach the BLAS thread pools before they start.

EXPERIMENTS = ("spectrum", "gap-sweep", "meanfield", "perturbation-check", "hydro", "correlators", "timecrystal")
MODELS = ("I", "II", "III", "eff-n0", "eff-nhalf")
EQUATIONS = ("kpz", "ew", "phase", "conserved", "cgle")
CHECKS = {
    "spectrum": ("eigenvalues", "dark-state", "dispersion", "symmetry"),
    "perturbation-check": ("single-site", "gap", "second-order", "heisenberg"),
    "meanfield": ("fixed-point", "threshold", "bose-surface"),
}
ALIASES = {"Γ": "Gamma", "Γ_z": "Gamma_z", "μ": "mu", "Δ": "Delta", "λ": "lam", "lambda": "lam", "Jz": "J_z"}
NONNEGATIVE = ("Gamma", "Gamma_z", "Delta", "sigma_n", "gamma", "K_d", "g_d")
POSITIVE = ("dt", "T", "D")
INTEGER = ("L", "Lx", "Ly", "d", "n_max", "realizations", "N", "samples", "stride", "seed")
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


# --------------------------------------------------------------------------
# config


def _scalar(tok: str):
    low = tok.lower()
    if low in ("true", "yes"):
        return True
    if low in ("false", "no"):
        return False
    for cast in (int, float):
        try:
            return cast(tok)
        except ValueError:
            pass
    # multiples of pi such as "pi", "2pi/3", "-pi/2"
    if "pi" in low:
        num, _, den = low.partition("/")
        coef = num.replace("*", "").replace("pi", "")
        try:
            c = {"": 1.0, "-": -1.0, "+": 1.0}.get(coef, None)
            c = float(coef) if c is None else c
            return c * math.pi / (float(den) if den else 1.0)
        except ValueError:
            pass
    return tok


def parse_value(raw: str):
    raw = raw.strip()
    if "," in raw:
        return [_scalar(t.strip()) for t in raw.split(",") if t.strip()]
    return _scalar(raw)


def parse_config(text: str) -> dict:
    """Parse ``key: value`` lines; ``#`` starts a comment, commas make lists."""
    cfg = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition(":")
        if not sep or not key.strip():
            raise ConfigError([f"line {lineno}: expected 'key: value'"])
        key = ALIASES.get(key.strip(), key.strip())
        if key in cfg:
            raise ConfigError([f"line {lineno}: duplicate key {key!r}"])
        cfg[key] = parse_value(val)
    return cfg


def load_config(path) -> dict:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _required(cfg) -> list[str]:
    exp, model = cfg.get("experiment"), cfg.get("model")
    if exp == "hydro":
        eq = cfg.get("equation")
        keys = ["equation", "L", "d", "dt", "T"]
        if eq == "cgle":
            keys += ["K_c", "K_d", "r_c", "r_d", "g_c", "g_d", "gamma"]
        else:
            keys += ["D"]
        return keys
    if exp == "perturbation-check" and cfg.get("check") == "single-site":
        return ["Gamma"]
    keys = ["model"]
    if model == "III":
        keys += ["L", "S", "J_xy", "Gamma"]
    elif model in MODELS:
        keys += ["J", "Gamma"]
        if exp != "meanfield" and not ("Lx" in cfg and "Ly" in cfg):
            keys += ["L"]
    if exp == "meanfield":
        keys += ["d"]
        if model == "II" and cfg.get("check", "fixed-point") == "fixed-point":
            keys += ["n"]
    if exp == "gap-sweep":
        keys += ["sweep", "values", "sector"]
    if exp == "correlators":
        keys += ["N"]
    if exp == "timecrystal":
        keys += ["mu", "dt", "T"]
    if exp == "perturbation-check" and cfg.get("check") == "gap":
        keys += ["values"]
    return keys


def _as_list(v):
    return v if isinstance(v, list) else [v]


def validate(config: dict) -> list[str]:
    """Return every violation in ``config``; an empty list means it is runnable."""
    out = []
    exp = config.get("experiment")
    if exp not in EXPERIMENTS:
        out.append(f"experiment: must be one of {', '.join(EXPERIMENTS)} (got {exp!r})")
    model = config.get("model")
    if model is not None and model not in MODELS:
        out.append(f"model: must be one of {', '.join(MODELS)} (got {model!r})")
    if exp == "meanfield" and model not in (None, "I", "II"):
        out.append("model: meanfield supports models I and II")
    if exp in ("correlators", "timecrystal") and model not in (None, "III"):
        out.append(f"model: {exp} is implemented for model III")
    if exp == "hydro" and config.get("equation") not in EQUATIONS:
        out.append(f"equation: must be one of {', '.join(EQUATIONS)}")
    if exp in CHECKS and "check" in config and config["check"] not in CHECKS[exp]:
        out.append(f"check: must be one of {', '.join(CHECKS[exp])}")
    if exp in EXPERIMENTS:
        for key in _required(config):
            if key not in config:
                out.append(f"{key}: required for {exp}" + (f" with model {model}" if model else ""))
    for key in NONNEGATIVE:
        for v in _as_list(config.get(key, [])):
            if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0:
                out.append(f"{key}: must be a nonnegative number (got {v!r})")
    for key in POSITIVE:
        for v in _as_list(config.get(key, [])):
            if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
                out.append(f"{key}: must be positive (got {v!r})")
    for key in INTEGER:
        if key in config:
            v = config[key]
            if not isinstance(v, int) or isinstance(v, bool):
                out.append(f"{key}: must be an integer (got {v!r})")
            elif key == "seed" and not 0 <= v < 2**64:
                out.append("seed: must be an unsigned 64-bit integer")
            elif key != "seed" and v < (0 if key == "N" else 1):
                out.append(f"{key}: must be positive (got {v})")
    for v in _as_list(config.get("n", [])):
        if not isinstance(v, (int, float)) or not 0 <= v <= 1:
            out.append(f"n: filling must lie in [0, 1] (got {v!r})")
    if "S" in config:
        S = config["S"]
        if not isinstance(S, (int, float)) or S <= 0 or abs(2 * S - round(2 * S)) > 1e-12:
            out.append(f"S: must be a positive half-integer (got {S!r})")
    if "d" in config and config["d"] not in (1, 2, 3):
        out.append("d: must be 1, 2 or 3")
    return out


# --------------------------------------------------------------------------
# output


def _cell(v) -> list[str]:
    if isinstance(v, complex):
        return [repr(float(v.real)), repr(float(v.imag))]
    if isinstance(v, float):
        return [repr(v)]
    return [str(v)]


def _flatten(value):
    """Convert numpy scalars and containers into JSON-ready Python objects."""
    import numpy as np

    if isinstance(value, dict):
        return {str(k): _flatten(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_flatten(v) for v in value]
    if isinstance(value, np.ndarray):
        return _flatten(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(np.real(value)), "im": float(np.imag(value))}
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def _normalize(v):
    import numpy as np

    if isinstance(v, np.generic):
        v = v.item()
    return v


class Table:
    """Named columns; complex columns become ``<name>_re`` and ``<name>_im``."""

    def __init__(self, columns):
        self.columns = list(columns)
        self.rows = []

    def add(self, *row):
        if len(row) != len(self.columns):
            raise ValueError("row length does not match the columns")
        self.rows.append([_normalize(v) for v in row])

    def to_csv(self) -> str:
        complex_cols = {
            i for i in range(len(self.columns)) if any(isinstance(r[i], complex) for r in self.rows)
        }
        header = []
        for i, c in enumerate(self.columns):
            header += [f"{c}_re", f"{c}_im"] if i in complex_cols else [c]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in self.rows:
            cells = []
            for i, v in enumerate(r):
                if i in complex_cols:
                    v = complex(v)
                cells += _cell(v)
            w.writerow(cells)
        return buf.getvalue()


def version_string() -> str:
    try:
        from importlib.metadata import version

        base = version("artifact")
    except Exception:
        base = "0.1.0"
    try:
        sha = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"], cwd=Path(__file__).parent,
            capture_output=True, text=True, timeout=5,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        sha = ""
    return f"{base}+g{sha}" if sha else base


def write_results(outdir, experiment: str, config: dict, tables: dict, scalars: dict, seed) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, table in tables.items():
        p = outdir / f"{experiment}_{name}.csv"
        p.write_text(table.to_csv(), encoding="utf-8")
        paths.append(p)
    meta = {
        "experiment": experiment,
        "config": _flatten(config),
        "version": version_string(),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "seed": seed,
        "tables": {name: f"{experiment}_{name}.csv" for name in tables},
        "results": _flatten(scalars),
    }
    p = outdir / f"{experiment}.json"
    p.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    paths.append(p)
    return paths


# --------------------------------------------------------------------------
# experiments


def _lattice(cfg):
    from .lattice import build_chain, build_square

    if "Lx" in cfg:
        return build_square(cfg["Lx"], cfg["Ly"])
    return build_chain(cfg["L"])


def build_model(cfg):
    from . import lindblad as lb

    m = cfg["model"]
    J_z = cfg.get("J_z", 0.0)
    if m == "III":
        spec = lb.model_III(cfg["L"], cfg["S"], cfg["J_xy"], J_z, cfg["Gamma"])
    elif m == "I":
        spec = lb.model_I(_lattice(cfg), cfg["J"], J_z, cfg["Gamma"])
    elif m == "II":
        spec = lb.model_II(_lattice(cfg), cfg["J"], J_z, cfg["Gamma"], cfg.get("Gamma_z", 0.0))
    elif m == "eff-n0":
        spec = lb.model_eff_n0(_lattice(cfg), cfg["J"], cfg["Gamma"], cfg.get("n_max", 3), cfg.get("Gamma_z", 0.0))
    else:
        spec = lb.model_eff_nhalf(_lattice(cfg), cfg["J"], cfg["Gamma"], cfg.get("n_max", 3))
    if cfg.get("mu"):
        spec = lb.add_chemical_shift(spec, cfg["mu"])
    return spec


def _sector(v):
    if v is None:
        return None
    if isinstance(v, list):
        return tuple(int(x) for x in v)
    return int(v)


def _spectrum(cfg, seed):
    import numpy as np

    from . import lindblad as lb
    from . import spectral

    spec = build_model(cfg)
    check = cfg.get("check", "eigenvalues")
    tables, scalars = {}, {}
    if check == "dark-state":
        lat = spec.lattice
        k = np.atleast_1d(np.asarray(cfg.get("k", np.pi), dtype=float))
        ket = lb.bose_surface_state(lat, k, cfg.get("n_max", 3))
        t = Table(["Gamma_z", "residual", "decay_rate"])
        for gz in _as_list(cfg.get("Gamma_z_values", [0.0, cfg.get("Gamma_z", 0.0)])):
            s = lb.model_eff_n0(lat, cfg["J"], cfg["Gamma"], cfg.get("n_max", 3), float(gz))
            t.add(float(gz), lb.pure_state_residual(s, ket), lb.pure_state_decay_rate(s, ket))
        tables["dark_state"] = t
        return tables, scalars
    scalars["symmetry"] = lb.symmetry_check(spec)
    if check == "symmetry":
        sup = lb.vectorize(spec)
        mode = "pair" if scalars["symmetry"] == lb.STRONG else "difference"
        scalars["offblock_residual"] = lb.offblock_residual(sup, mode) if scalars["symmetry"] != lb.NONE else None
        return tables, scalars
    sector = _sector(cfg.get("sector"))
    if check == "dispersion":
        t = Table(["k", "slowest", "charge"])
        slow = spectral.dispersion(spec, sector, branch="slowest")
        charge = spectral.dispersion(spec, sector, branch="charge")
        for (k, a), (_, b) in sorted(zip(slow, charge)):
            t.add(k, a, b)
        tables["dispersion"] = t
        return tables, scalars
    if sector is None:
        sup = lb.vectorize(spec)
        block = lb.SectorBlock(0, np.arange(spec.dim**2), sup.matrix, spec.dim)
    else:
        block = lb.sector_block(spec, sector)
    res = spectral.spectrum(block, cfg.get("count"))
    t = Table(["index", "eigenvalue"])
    for i, v in enumerate(res.eigenvalues):
        t.add(i, complex(v))
    tables["eigenvalues"] = t
    scalars.update(kernel_dim=res.kernel_dim, gap=res.gap, residual=res.residual, sector=sector)
    return tables, scalars


def _gap_sweep(cfg, seed):
    from . import spectral

    key = cfg["sweep"]
    t = Table([key, "gap"])
    for v in _as_list(cfg["values"]):
        spec = build_model(dict(cfg, **{key: v}))
        t.add(v, spectral.gap_in_sector(spec, _sector(cfg["sector"])))
    return {"gap": t}, {"sweep": key}


def _meanfield(cfg, seed):
    import numpy as np

    from . import meanfield as mf

    check = cfg.get("check", "fixed-point")
    d = cfg["d"]
    rng = np.random.default_rng(seed)
    tables, scalars = {}, {}
    if cfg["model"] == "I":
        p = mf.MFParams(cfg["J"], cfg["Gamma"], 0.0, d)
        exact = mf.fixed_point_model_I(p)
        t = Table(["sample", "sA_z", "sB_z", "abs_sA_plus_sq", "phase_difference", "residual", "distance"])
        for s in range(cfg.get("samples", 8)):
            z = rng.uniform(-1, 1, 2)
            r = np.sqrt((1 - z**2) / 4) * rng.uniform(0, 1, 2)
            ph = rng.uniform(0, 2 * np.pi, 2)
            init = mf.MeanFieldState(r[0] * np.exp(1j * ph[0]), r[1] * np.exp(1j * ph[1]), z[0], z[1])
            tr = mf.integrate(mf.rhs_model_I, init, cfg.get("T", 400.0), cfg.get("dt", 0.01), p, stride=1000)
            fin = tr.final
            dist = np.linalg.norm(
                [fin.sA_z - exact.sA_z, fin.sB_z - exact.sB_z, abs(fin.sA_plus) - abs(exact.sA_plus)]
            )
            t.add(s, fin.sA_z, fin.sB_z, abs(fin.sA_plus) ** 2, fin.phase_difference,
                  mf.residual(mf.rhs_model_I, fin, p), float(dist))
        tables["trajectories"] = t
        scalars.update(sA_z=exact.sA_z, abs_sA_plus_sq=abs(exact.sA_plus) ** 2,
                       phase_difference=exact.phase_difference, ordered=abs(exact.sA_plus) > 0)
        return tables, scalars
    gz = cfg.get("Gamma_z", 0.0)
    if check == "threshold":
        scalars["threshold"] = mf.symmetric_instability_threshold(cfg["J"], cfg["Gamma"], d, cfg.get("tol", 1e-4))
        return tables, scalars
    if check == "bose-surface":
        from .lattice import build_square

        lat = build_square(cfg.get("Lx", 8), cfg.get("Ly", cfg.get("Lx", 8))) if d == 2 else _lattice(cfg)
        p = mf.MFParams(cfg["J"], cfg["Gamma"], gz, d)
        from .lattice import b_momenta, on_bose_surface

        t = Table(["k1"] + (["k2"] if d == 2 else []) + ["on_surface", "steady", "residual", "dephasing_residual"])
        for k in b_momenta(lat):
            r = mf.bose_surface_family(p, k, lat)
            t.add(*[float(x) for x in k], on_bose_surface(k, 1e-9), r.valid, r.residual,
                  float("nan") if r.dephasing_residual is None else r.dephasing_residual)
        tables["bose_surface"] = t
        scalars["agreement"] = mf.bose_surface_agreement(p, lat)
        return tables, scalars
    t = Table(["n", "sA_z", "sB_z", "sA_plus", "sB_plus", "residual", "relation_residual", "leading"])
    for n in _as_list(cfg["n"]):
        p = mf.MFParams(cfg["J"], cfg["Gamma"], gz, d, float(n))
        fp = mf.fixed_point_model_II(p, cfg.get("tol", 1e-10))
        st = mf.stability(mf.rhs_model_II, fp, p)
        t.add(float(n), fp.sA_z, fp.sB_z, complex(fp.sA_plus), complex(fp.sB_plus),
              mf.residual(mf.rhs_model_II, fp, p),
              float(np.max(np.abs(mf.ssb_relations_model_II(fp, p)))), st.leading)
    tables["fixed_points"] = t
    return tables, scalars


def _perturbation(cfg, seed):
    import numpy as np

    from . import perturbation as pt
    from . import spectral

    check = cfg.get("check", "second-order" if cfg.get("model") == "III" else "gap")
    tables, scalars = {}, {}
    if check == "single-site":
        triples = pt.single_site_loss_spectrum(cfg["Gamma"])
        t = Table(["index", "eigenvalue"])
        for i, tr in enumerate(triples):
            t.add(i, tr.eigenvalue)
        tables["eigenvalues"] = t
        B = pt.biorthonormality_matrix(triples)
        scalars["biorthonormality_error"] = float(np.abs(B - np.eye(len(triples))).max())
        return tables, scalars
    if check == "gap":
        t = Table(["J", "gap", "first_order_gap", "deviation", "spectrum_deviation"])
        lat = _lattice(cfg)
        for J in _as_list(cfg["values"]):
            spec = build_model(dict(cfg, J=J))
            gap = spectral.gap_in_sector(spec, 1)
            pred = cfg["Gamma"] - 2 * J * lat.d
            t.add(J, gap, pred, abs(gap - pred), pt.compare_perturbative_I(lat, J, cfg["Gamma"]))
        tables["gap"] = t
        return tables, scalars
    if check == "heisenberg":
        t = Table(["N", "m", "level", "energy"])
        spec_ = pt.effective_momentum_spectrum(cfg["L"], cfg["J_xy"], cfg["Gamma"], cfg["S"])
        for (N, m), vals in sorted(spec_.items()):
            for i, v in enumerate(vals):
                t.add(N, m, i, float(v))
        tables["heisenberg"] = t
        mins = [float(v[0]) for v in spec_.values()]
        scalars["min_energy"] = min(mins)
        return tables, scalars
    rep = pt.validate_III_second_order(cfg["L"], cfg["J_xy"], cfg["Gamma"], cfg["S"], cfg.get("J_z", 0.0),
                                       _as_list(cfg["sectors"]) if "sectors" in cfg else None)
    t = Table(["N", "k", "exact", "effective", "abs_dev", "rel_dev"])
    for r in rep.rows:
        t.add(*r)
    tables["second_order"] = t
    scalars.update(max_abs=rep.max_abs, max_rel=rep.max_rel())
    return tables, scalars


def _correlators(cfg, seed):
    from . import hilbert
    from . import observables as ob

    spec = build_model(cfg)
    alg = hilbert.spin_algebra(cfg["S"])
    w = ob.swssb_witness(spec, cfg["N"], 0, 1, alg)
    L = cfg["L"]
    t = Table(["i", "j", "renyi2", "two_point"])
    for i in range(L):
        for j in range(L):
            if i != j:
                t.add(i, j, ob.renyi2_correlator(w.state, i, j, alg), ob.two_point(w.state, i, j, alg))
    return {"correlators": t}, {"kernel_dim": w.kernel_dim, "purity": ob.purity(w.state)}


def _timecrystal(cfg, seed):
    import numpy as np
    from scipy.optimize import linear_sum_assignment

    from . import hilbert
    from . import lindblad as lb
    from . import spectral

    mu = cfg["mu"]
    base = build_model(dict(cfg, mu=0.0))
    shifted = lb.add_chemical_shift(base, mu)
    sectors = hilbert.charge_sectors(base.charge)
    t = Table(["N_L", "N_R", "dN", "max_shift_error"])
    worst = 0.0
    for NL in sectors:
        for NR in sectors:
            label = (int(NL), int(NR))
            a = np.linalg.eigvals(lb.sector_block(base, label).matrix.toarray())
            b = np.linalg.eigvals(lb.sector_block(shifted, label).matrix.toarray())
            target = a - 1j * mu * (NL - NR)
            cost = np.abs(target[:, None] - b[None, :])
            r, c = linear_sum_assignment(cost)
            err = float(cost[r, c].max())
            worst = max(worst, err)
            t.add(label[0], label[1], label[0] - label[1], err)
    # product of spin coherent states along +x carries coherences in every dN
    alg = hilbert.spin_algebra(cfg["S"])
    w, v = np.linalg.eigh(alg.raising + alg.lowering)
    x = v[:, -1]
    psi = x
    for _ in range(cfg["L"] - 1):
        psi = np.kron(psi, x)
    rho0 = np.outer(psi, psi.conj())
    splus = sum(hilbert.embed(alg.raising, i, cfg["L"], alg) for i in range(cfg["L"]))
    traj = spectral.evolve(rho0, shifted, cfg["T"], cfg["dt"], {"S_plus": splus},
                           stride=cfg.get("stride", 1), store_states=False)
    omega = spectral.detect_oscillation(traj, "S_plus")
    series = Table(["t", "S_plus"])
    for tt, s in zip(traj.times, traj["S_plus"]):
        series.add(float(tt), complex(s))
    return {"shifts": t, "coherence": series}, {
        "max_shift_error": worst, "omega": omega, "resolution": 2 * np.pi * cfg["T"] ** -1,
    }


def _hydro(cfg, seed):
    import numpy as np

    from . import hydro as hy

    grid = hy.FieldGrid(cfg["d"], cfg["L"], cfg.get("dx", 1.0))
    eq = cfg["equation"]
    R = cfg.get("realizations", 1)
    T = float(cfg["T"])
    window = (cfg["window_start"], cfg["window_end"]) if "window_start" in cfg else None
    samples = np.geomspace(1, T, cfg["samples"]) if "samples" in cfg else None
    tables, scalars = {}, {}
    if eq in ("kpz", "ew"):
        lam = cfg.get("lam", 0.0) if eq == "kpz" else 0.0
        p = hy.HydroParams(cfg["D"], cfg["dt"], lam, cfg.get("Delta", 1.0))
        tr = hy.kpz_run(p, grid, T, seed, R, sample_times=samples, stride=cfg.get("stride", 1))
        wg = hy.width_growth(tr, window)
        t = Table(["t", "W2"])
        for a, b in zip(wg.times, wg.W2):
            t.add(float(a), float(b))
        tables["width"] = t
        scalars["beta"] = wg.beta
        if eq == "ew" and window is not None:
            tt = np.geomspace(window[0], window[1], 64)
            ew = hy.ew_width_squared(grid, cfg["D"], cfg.get("Delta", 1.0), tt)
            scalars["beta_theory"] = float(np.polyfit(np.log(tt), np.log(ew), 1)[0] / 2)
        if eq == "kpz":
            scalars["velocity"] = hy.growth_velocity(tr, window)
    elif eq == "phase":
        p = hy.HydroParams(cfg["D"], cfg["dt"], 0.0, cfg.get("Delta", 1.0))
        tr = hy.phase_diffusion_run(p, grid, T, seed, R, stride=cfg.get("stride", 1))
        sf = hy.structure_factor(tr, window)
        k2 = sf.khat2.ravel()
        S, err = sf.S.ravel(), sf.err.ravel()
        t = Table(["khat2", "S", "err", "continuum", "discrete"])
        nz = k2 > 1e-14
        cont = np.full_like(k2, np.nan)
        cont[nz] = cfg.get("Delta", 1.0) / (cfg["D"] * k2[nz])
        disc = np.full_like(k2, np.nan)
        disc[nz] = hy.ou_stationary_variance(cfg["D"] * k2[nz], 2 * cfg.get("Delta", 1.0), cfg["dt"])
        for row in zip(k2, S, err, cont, disc):
            t.add(*map(float, row))
        tables["structure_factor"] = t
        scalars["samples"] = sf.samples
    elif eq == "conserved":
        p = hy.HydroParams(cfg["D"], cfg["dt"], sigma_n=cfg.get("sigma_n", 0.0))
        u0 = np.zeros(grid.shape)
        u0[tuple(s // 2 for s in grid.shape)] = 1.0 / grid.dx**grid.d
        tr = hy.conserved_density_run(p, grid, T, seed, R, init=u0, stride=cfg.get("stride", 1))
        u = tr.final.mean(axis=0)
        K = np.roll(hy.heat_kernel(grid, cfg["D"], T), [s // 2 for s in grid.shape], axis=tuple(range(grid.d)))
        scalars["l2_error"] = float(np.linalg.norm(u - K) / np.linalg.norm(K))
        scalars["mass_drift"] = float(np.abs(tr.fields.sum(axis=tuple(range(2, 2 + grid.d))) - 1).max())
    else:
        p = hy.CGLEParams(cfg["K_c"], cfg["K_d"], cfg["r_c"], cfg["r_d"], cfg["g_c"], cfg["g_d"], cfg["gamma"], cfg["dt"])
        rho0 = cfg.get("rho0", 1.0)
        tr = hy.cgle_run(p, grid, T, seed, R, init=np.full(grid.shape, np.sqrt(rho0), complex),
                         stride=cfg.get("stride", 1))
        dens = (np.abs(tr.fields) ** 2).mean(axis=tuple(range(1, 2 + grid.d)))
        ode = hy.amplitude_ode_solution(rho0, cfg["r_d"], cfg["g_d"], tr.times)
        t = Table(["t", "density", "noise_free"])
        for row in zip(tr.times, dens, ode):
            t.add(*map(float, row))
        tables["density"] = t
    return tables, scalars


RUNNERS = {
    "spectrum": _spectrum,
    "gap-sweep": _gap_sweep,
    "meanfield": _meanfield,
    "perturbation-check": _perturbation,
    "hydro": _hydro,
    "correlators": _correlators,
    "timecrystal": _timecrystal,
}


def run(config: dict, outdir=None, seed=None):
    """Validate and execute ``config``; returns ``(tables, scalars)`` and writes files if ``outdir``."""
    problems = validate(config)
    if problems:
        raise ConfigError(problems)
    seed = config.get("seed", 0) if seed is None else seed
    tables, scalars = RUNNERS[config["experiment"]](config, seed)
    if outdir is not None:
        write_results(outdir, config["experiment"], config, tables, scalars, seed)
    return tables, scalars


def _numeric_errors():
    import numpy as np

    from .hydro import InstabilityError, NonStationaryError
    from .meanfield import FixedPointError
    from .spectral import ConvergenceError, StepSizeError

    return (ConvergenceError, StepSizeError, FixedPointError, InstabilityError, NonStationaryError,
            np.linalg.LinAlgError, ArithmeticError, FloatingPointError)


def _fail(code: int, kind: str, message: str, outdir, details=None) -> int:
    err = {"error": kind, "message": message, "exit_code": code}
    if details:
        err["violations"] = details
    text = json.dumps(err, sort_keys=True)
    print(text, file=sys.stderr)
    if outdir is not None:
        try:
            Path(outdir).mkdir(parents=True, exist_ok=True)
            (Path(outdir) / "error.json").write_text(text + "\n", encoding="utf-8")
        except OSError:
            pass
    return code


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="sslab", description=__doc__.splitlines()[0])
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--output", default="results")
    ap.add_argument("--seed", type=_seed, default=None)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args(argv)

    threads = args.threads or os.environ.get("SSLAB_THREADS") or os.cpu_count() or 1
    for var in THREAD_VARS:
        os.environ[var] = str(threads)

    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        return _fail(EXIT_CONFIG, "validation", str(e), args.output, e.violations)
    except (OSError, UnicodeDecodeError) as e:
        return _fail(EXIT_IO, "io", str(e), args.output)
    cfg.setdefault("experiment", args.experiment)
    if cfg["experiment"] != args.experiment:
        msg = f"config is for {cfg['experiment']!r}, not {args.experiment!r}"
        return _fail(EXIT_CONFIG, "validation", msg, args.output, [f"experiment: {msg}"])
    problems = validate(cfg)
    if problems:
        return _fail(EXIT_CONFIG, "validation", "invalid config", args.output, problems)
    try:
        numeric = _numeric_errors()
        run(cfg, args.output, args.seed)
    except OSError as e:
        return _fail(EXIT_IO, "io", str(e), args.output)
    except numeric as e:
        return _fail(EXIT_NUMERIC, "numerical", f"{type(e).__name__}: {e}", args.output)
    except (ValueError, KeyError, TypeError) as e:
        return _fail(EXIT_CONFIG, "validation", f"{type(e).__name__}: {e}", args.output)
    print(json.dumps({"status": "ok", "output": str(args.output)}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
