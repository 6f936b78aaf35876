"""Command-line driver: ``ral <command> [options]``.

Exit codes: 0 success, 1 verification failure, 2 usage error,
3 numerical non-convergence.
"""

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .additivity import (
    CERT_FAILED,
    NOT_A_MAX,
    classify,
    hessian_form,
    maximize_q,
    verify_tensor_local_min,
)
from .derivcalc import (
    SecondDerivativeForm,
    curve_point,
    first_derivative,
    g_alpha,
    holder_exponent,
    trace_function,
    trace_taylor_coeffs,
)
from .entropy import channel_to_subspace, check_alpha, check_channel, e_alpha, q_alpha
from .errors import ConvergenceError, RalError
from .hadamard import (
    check_phi_le_psi,
    h_second,
    proposition_terms,
    spectra_grid,
    write_scan_csv,
)
from .matspace import orthonormalize, random_subspace, random_unit_matrix

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_NONCONV = 3

COMMANDS = (
    "minimize",
    "hessian",
    "verify-tensor",
    "check-phi-psi",
    "scan-proposition",
    "taylor-probe",
    "channel-min-entropy",
    "scan-alpha",
)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    alpha: float = 2.0
    seed: int = 0
    restarts: int = 16
    tol_eig: float = 1e-7
    tol_grad: float = 1e-9
    max_iters: int = 5000
    grid: float = 0.1
    samples: int = 10000
    n: int = 3
    dim: int = 2
    alpha_range: list = field(default_factory=list)
    alpha_step: float = 0.05
    inner: str = "check-phi-psi"
    input: str = None
    output: str = None
    csv: str = None
    threads: int = 1


# ---------------------------------------------------------------- JSON I/O


def _fmt_float(v):
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return f"{v:.17g}"


def dumps(obj, indent=2, _level=0):
    """JSON with every float written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return dumps([obj.real, obj.imag], indent, _level)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def matrix_to_json(a):
    a = np.asarray(a, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in a]


def matrix_from_json(obj):
    try:
        rows = []
        for row in obj:
            vals = []
            for v in row:
                if isinstance(v, (list, tuple)):
                    if len(v) != 2:
                        raise ValueError("complex entries must be [re, im]")
                    vals.append(complex(float(v[0]), float(v[1])))
                else:
                    vals.append(complex(float(v)))
            rows.append(vals)
        a = np.array(rows, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"malformed matrix: {exc}") from exc
    if a.ndim != 2 or a.size == 0 or not np.all(np.isfinite(a)):
        raise UsageError("malformed matrix: expected a non-empty rectangular array of finite numbers")
    return a


def subspace_from_json(obj):
    try:
        basis = [matrix_from_json(b) for b in obj["basis"]]
        n, m = int(obj["n"]), int(obj["m"])
    except (KeyError, TypeError) as exc:
        raise UsageError(f"malformed subspace object: {exc}") from exc
    if any(b.shape != (n, m) for b in basis):
        raise UsageError(f"basis matrices must be {n} x {m}")
    return orthonormalize(basis)


def subspace_to_json(K):
    n, m = K.shape
    return {"n": n, "m": m, "basis": [matrix_to_json(b) for b in K]}


def _load_input(path):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"input is not valid JSON: {exc}") from exc


# ---------------------------------------------------------------- config


def build_parser():
    ap = argparse.ArgumentParser(prog="ral", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON file with option values; flags override it")
    ap.add_argument("--alpha", type=float, help="Renyi parameter, > 0 and != 1 (default 2)")
    ap.add_argument("--seed", type=int, help="base random seed (default 0)")
    ap.add_argument("--restarts", type=int, help="optimizer restarts (default 16)")
    ap.add_argument("--tol-eig", type=float, help="Hessian degeneracy threshold (default 1e-7)")
    ap.add_argument("--tol-grad", type=float, help="criticality tolerance (default 1e-9)")
    ap.add_argument("--max-iters", type=int, help="optimizer iterations per restart (default 5000)")
    ap.add_argument("--grid", type=float, help="grid step for check-phi-psi (default 0.1)")
    ap.add_argument("--samples", type=int, help="samples for scan-proposition (default 10000)")
    ap.add_argument("--n", type=int, help="matrix size for random subspaces (default 3)")
    ap.add_argument("--dim", type=int, help="dimension of random subspaces (default 2)")
    ap.add_argument("--alpha-range", type=float, nargs=2, metavar=("LO", "HI"), help="scan-alpha range")
    ap.add_argument("--alpha-step", type=float, help="scan-alpha step (default 0.05)")
    ap.add_argument("--inner", choices=("check-phi-psi", "convexity", "scan-proposition"), help="scan-alpha inner check")
    ap.add_argument("-i", "--input", help="input JSON (subspace, tensor pair or channel)")
    ap.add_argument("-o", "--output", help="report path (default stdout)")
    ap.add_argument("--csv", help="also write scan rows as CSV")
    ap.add_argument("--threads", type=int, help="worker threads (default: $RAL_THREADS or 1)")
    return ap


def parse_config(argv):
    """Resolve a RunConfig from flags, an optional --config file and defaults."""
    ap = build_parser()
    args = ap.parse_args(argv)
    values = {}
    if args.config:
        cfg = _load_input(args.config)
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        known = set(RunConfig.__dataclass_fields__)
        for k, v in cfg.items():
            key = k.replace("-", "_")
            if key not in known or key == "command":
                raise UsageError(f"unknown config key {k!r}")
            values[key] = v
    for key, v in vars(args).items():
        if key in ("command", "config") or v is None:
            continue
        values[key] = v
    if "threads" not in values:
        env = os.environ.get("RAL_THREADS")
        if env:
            try:
                values["threads"] = int(env)
            except ValueError as exc:
                raise UsageError(f"RAL_THREADS must be an integer, got {env!r}") from exc
    cfg = RunConfig(command=args.command, **values)
    _validate(cfg)
    return cfg


def _validate(cfg):
    try:
        cfg.alpha = check_alpha(cfg.alpha)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if cfg.input is not None and not Path(cfg.input).is_file():
        raise UsageError(f"input file not found: {cfg.input}")
    if cfg.threads < 1 or cfg.restarts < 1 or cfg.samples < 1 or cfg.max_iters < 1:
        raise UsageError("threads, restarts, samples and max-iters must be positive")
    if not 0 < cfg.grid <= 1 or abs(round(1 / cfg.grid) * cfg.grid - 1) > 1e-9:
        raise UsageError("grid step must divide 1")
    if cfg.command == "scan-alpha":
        if len(cfg.alpha_range) != 2:
            raise UsageError("scan-alpha needs --alpha-range LO HI")
        lo, hi = cfg.alpha_range
        if not (0 < lo <= hi) or cfg.alpha_step <= 0:
            raise UsageError("empty or invalid alpha range")
        if not _alpha_values(cfg):
            raise UsageError("alpha range contains no admissible values")
    if cfg.command in ("minimize", "hessian", "verify-tensor", "channel-min-entropy") and cfg.alpha <= 1:
        raise UsageError(f"{cfg.command} requires alpha > 1")
    if cfg.command == "channel-min-entropy" and cfg.input is None:
        raise UsageError("channel-min-entropy needs --input with a channel object")


def _alpha_values(cfg):
    lo, hi = cfg.alpha_range
    k = int(math.floor((hi - lo) / cfg.alpha_step + 1e-9))
    vals = [round(lo + i * cfg.alpha_step, 12) for i in range(k + 1)]
    return [a for a in vals if a > 0 and a != 1]


# ---------------------------------------------------------------- commands


def _subspace_input(cfg, data=None):
    if data is not None:
        K = subspace_from_json(data)
        x = None
        if "x" in data:
            x = matrix_from_json(data["x"])
            x = x / np.linalg.norm(x)
        return K, x
    return random_subspace(cfg.n, cfg.n, cfg.dim, cfg.seed), None


def _optimize(K, cfg, seed):
    return maximize_q(K, cfg.alpha, seed=seed, restarts=cfg.restarts, max_iters=cfg.max_iters, grad_tol=cfg.tol_grad)


def cmd_minimize(cfg):
    K, _ = _subspace_input(cfg, _load_input(cfg.input) if cfg.input else None)
    cp = _optimize(K, cfg, cfg.seed)
    spectrum = hessian_form(cp.x, K, cfg.alpha)
    res = {
        "x": matrix_to_json(cp.x),
        "q_alpha": cp.q_value,
        "e_alpha": e_alpha(cp.x, cfg.alpha),
        "residual": cp.residual,
        "hessian_eigenvalues": spectrum.eigenvalues.tolist(),
        "classification": classify(spectrum, cfg.tol_eig),
    }
    return res, EXIT_OK


def cmd_hessian(cfg):
    K, x = _subspace_input(cfg, _load_input(cfg.input) if cfg.input else None)
    if x is None:
        x = _optimize(K, cfg, cfg.seed).x
    spectrum = hessian_form(x, K, cfg.alpha)
    verdict = classify(spectrum, cfg.tol_eig)
    res = {
        "eigenvalues": spectrum.eigenvalues.tolist(),
        "basis_labels": spectrum.basis_labels,
        "classification": verdict,
        "q_alpha": q_alpha(x, cfg.alpha),
    }
    # the command verifies that x is a local maximum of Q
    return res, EXIT_FAIL if verdict == NOT_A_MAX else EXIT_OK


def cmd_verify_tensor(cfg):
    if cfg.input:
        data = _load_input(cfg.input)
        if not isinstance(data, dict) or "A" not in data or "B" not in data:
            raise UsageError("tensor-pair input needs objects 'A' and 'B'")
        KA, xA = _subspace_input(cfg, data["A"])
        KB, xB = _subspace_input(cfg, data["B"])
    else:
        KA = random_subspace(cfg.n, cfg.n, cfg.dim, cfg.seed)
        KB = random_subspace(cfg.n, cfg.n, cfg.dim, cfg.seed + 1)
        xA = xB = None
    if xA is None:
        xA = _optimize(KA, cfg, cfg.seed).x
    if xB is None:
        xB = _optimize(KB, cfg, cfg.seed + 1).x
    cert = verify_tensor_local_min(xA, KA, xB, KB, cfg.alpha, tol_eig=cfg.tol_eig, seed=cfg.seed)
    res = cert.to_dict()
    res["xA"] = matrix_to_json(xA)
    res["xB"] = matrix_to_json(xB)
    return res, EXIT_FAIL if cert.verdict == CERT_FAILED else EXIT_OK


def _phi_psi_scan(alpha, step, threads):
    grid = spectra_grid(step)
    pairs = [(p, q) for p in grid for q in grid]

    def one(pq):
        return check_phi_le_psi(pq[0], pq[1], alpha)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            reports = list(ex.map(one, pairs))
    else:
        reports = [one(pq) for pq in pairs]
    total = None
    for (p, q), r in zip(pairs, reports):
        r.worst_case = dict(r.worst_case, p=p.tolist(), q=q.tolist())
        total = r if total is None else total.merge(r)
    total.description = f"phi<=psi grid step={step} alpha={alpha}"
    return total


def cmd_check_phi_psi(cfg):
    rep = _phi_psi_scan(cfg.alpha, cfg.grid, cfg.threads)
    res = rep.to_dict()
    res["regime"] = "main" if cfg.alpha > 1 else "exploratory"
    if cfg.csv:
        write_scan_csv(cfg.csv, [(cfg.alpha, cfg.grid, rep.checked, 0.0, rep.min_slack, rep.min_slack)])
    fail = cfg.alpha > 1 and rep.violation_count > 0
    return res, EXIT_FAIL if fail else EXIT_OK


def _sobol_points(n, seed, scale=10.0):
    from scipy.stats import qmc

    sob = qmc.Sobol(d=2, scramble=True, seed=seed)
    m = int(math.ceil(math.log2(max(n, 2))))
    return sob.random_base2(m)[:n] * scale


def _xi_samples():
    return np.concatenate([np.geomspace(1e-4, 1, 200, endpoint=False), np.linspace(1, 20, 400)])


def proposition_scan(alpha, samples, seed):
    pts = _sobol_points(samples, seed)
    s, t = pts[:, 0], pts[:, 1]
    lhs, rhs = proposition_terms(s, t, alpha)
    slack = rhs - lhs
    xi = _xi_samples()
    hs = h_second(xi, alpha)
    out = {
        "alpha": alpha,
        "samples": int(len(s)),
        "min_slack": float(slack.min()),
        "violations": int(np.count_nonzero(slack < 0)),
        "non_strict": int(np.count_nonzero(slack <= 0)),
        "h_second_min": float(hs.min()),
        "h_second_max": float(hs.max()),
        "h_second_positive_everywhere": bool(np.all(hs > 0)),
        "h_second_nonpositive_everywhere": bool(np.all(hs <= 0)),
    }
    rows = np.column_stack([np.full(len(s), alpha), s, t, lhs, rhs, slack])
    return out, rows


def cmd_scan_proposition(cfg):
    res, rows = proposition_scan(cfg.alpha, cfg.samples, cfg.seed)
    res["regime"] = "main" if cfg.alpha > 1 else "exploratory"
    if cfg.csv:
        write_scan_csv(cfg.csv, rows)
    if cfg.alpha > 1:
        fail = res["non_strict"] > 0 or not res["h_second_positive_everywhere"]
        return res, EXIT_FAIL if fail else EXIT_OK
    return res, EXIT_OK


def remainder_slope(F, coeffs, ts):
    """Least-squares slope of log|F(t) - Taylor_2(t)| against log t."""
    rem = np.array([abs(F(t) - coeffs(t)) for t in ts])
    A = np.column_stack([np.log(ts), np.ones(len(ts))])
    slope, _ = np.linalg.lstsq(A, np.log(rem), rcond=None)[0]
    return float(slope), rem


def taylor_probe(alpha, seed, n=4):
    """Remainder orders of the trace Taylor expansion and of Q along the curve.

    A = diag(0, 1/(n-1), ..., 1) and x has singular values proportional to
    (1, ..., 1/(n-1), 0), so a zero eigenvalue is always present; B and y are
    random unit directions drawn from ``seed``.
    """
    rng = np.random.default_rng(seed)
    A = np.diag(np.linspace(0.0, 1.0, n))
    Bc = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    B = (Bc + Bc.conj().T) / 2
    B /= np.linalg.norm(B)
    f, fp, fpp = g_alpha(alpha)
    eps = holder_exponent(alpha)
    coeffs = trace_taylor_coeffs(A, B, f, fp, fpp, holder_eps=eps)
    ts = np.geomspace(1e-3, 1e-1, 15)
    slope, _ = remainder_slope(lambda t: trace_function(A, B, t, f), coeffs, ts)

    sig = np.linspace(1.0, 0.0, n)
    x = np.diag(sig / np.linalg.norm(sig)).astype(complex)
    y = random_unit_matrix((n, n), rng)
    y = y - np.vdot(x, y) * x
    y /= np.linalg.norm(y)
    form = SecondDerivativeForm.at(x, alpha)
    d1 = first_derivative(x, y, alpha)
    d2 = form.value(y)
    curve = lambda t: q_alpha(curve_point(x, y, t), alpha)  # noqa: E731
    poly = lambda t: form.q + d1 * t + 0.5 * d2 * t * t  # noqa: E731
    slope_q, _ = remainder_slope(curve, poly, ts)
    threshold = 2.9 if alpha >= 2 else 2 + eps - 0.2
    return {
        "alpha": alpha,
        "holder_eps": eps,
        "trace_remainder_slope": slope,
        "curve_remainder_slope": slope_q,
        "threshold": threshold,
        "coefficients": [coeffs.c0, coeffs.c1, coeffs.c2],
    }


def cmd_taylor_probe(cfg):
    res = taylor_probe(cfg.alpha, cfg.seed)
    if cfg.alpha <= 1:
        return res, EXIT_OK
    ok = res["trace_remainder_slope"] >= res["threshold"] and res["curve_remainder_slope"] >= res["threshold"]
    return res, EXIT_OK if ok else EXIT_FAIL


def cmd_channel_min_entropy(cfg):
    data = _load_input(cfg.input)
    try:
        kraus = [matrix_from_json(k) for k in data["kraus"]]
    except (KeyError, TypeError) as exc:
        raise UsageError(f"malformed channel object: {exc}") from exc
    try:
        check_channel(kraus)
    except RalError as exc:
        raise UsageError(str(exc)) from exc
    K = channel_to_subspace(kraus)
    cp = _optimize(K, cfg, cfg.seed)
    return {
        "upper_bound": e_alpha(cp.x, cfg.alpha),
        "note": "upper bound on the minimum output Renyi entropy (local optimum)",
        "argmin": matrix_to_json(cp.x),
        "residual": cp.residual,
        "subspace_dim": K.dim,
    }, EXIT_OK


def scan_alpha(cfg):
    alphas = _alpha_values(cfg)
    rows = []
    per = []

    def one(alpha):
        if cfg.inner == "check-phi-psi":
            rep = _phi_psi_scan(alpha, cfg.grid, 1)
            return {"alpha": alpha, "min_slack": rep.min_slack, "violations": rep.violation_count}
        if cfg.inner == "scan-proposition":
            r, _ = proposition_scan(alpha, cfg.samples, cfg.seed)
            return {"alpha": alpha, "min_slack": r["min_slack"], "violations": r["violations"]}
        xi = _xi_samples()
        hs = h_second(xi, alpha)
        return {
            "alpha": alpha,
            "min_slack": float(hs.min()),
            "max_h_second": float(hs.max()),
            "h_second_nonpositive": bool(np.all(hs <= 0)),
            "h_second_positive": bool(np.all(hs > 0)),
        }

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            per = list(ex.map(one, alphas))
    else:
        per = [one(a) for a in alphas]
    for r in per:
        rows.append((r["alpha"], cfg.grid, 0.0, 0.0, r["min_slack"], r["min_slack"]))
    if cfg.csv:
        write_scan_csv(cfg.csv, rows)
    fail = False
    if cfg.inner in ("check-phi-psi", "scan-proposition"):
        fail = any(r["violations"] > 0 for r in per if r["alpha"] > 1)
    elif cfg.inner == "convexity":
        fail = any(not r["h_second_positive"] for r in per if r["alpha"] > 1)
    return {"inner": cfg.inner, "per_alpha": per}, EXIT_FAIL if fail else EXIT_OK


DISPATCH = {
    "minimize": cmd_minimize,
    "hessian": cmd_hessian,
    "verify-tensor": cmd_verify_tensor,
    "check-phi-psi": cmd_check_phi_psi,
    "scan-proposition": cmd_scan_proposition,
    "taylor-probe": cmd_taylor_probe,
    "channel-min-entropy": cmd_channel_min_entropy,
    "scan-alpha": scan_alpha,
}


def run(cfg):
    """Execute a config; returns ``(report, exit_code)``."""
    start = time.perf_counter()
    try:
        results, code = DISPATCH[cfg.command](cfg)
    except ConvergenceError as exc:
        results, code = {"error": "non-convergence", "message": str(exc), "best_residual": exc.best_residual}, EXIT_NONCONV
    except UsageError as exc:
        results, code = {"error": "usage", "message": str(exc)}, EXIT_USAGE
    except RalError as exc:
        results, code = {"error": type(exc).__name__, "message": str(exc)}, EXIT_USAGE
    report = {
        "command": cfg.command,
        "config": asdict(cfg),
        "results": results,
        "exit_code": code,
        "version": __version__,
        "wall_time": time.perf_counter() - start,
    }
    return report, code


def main(argv=None):
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"ral: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    report, code = run(cfg)
    text = dumps(report) + "\n"
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
