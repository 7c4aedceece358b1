"""
Command-line front door: ``construct``, ``verify``, ``search`` and ``replay``.

Every run writes exactly one JSON result file that echoes the full run
configuration. Exit codes: 0 success, 1 verification failed (or replay
mismatch), 2 usage / I/O / format error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import combinatorics as comb
from . import constellations as cons
from . import entanglement as ent
from .codec import FormatError, decode_array, decode_state, encode_array, encode_state
from .linalg import CheckReport, partial_transpose, hermitian_eigvals

SCHEMA_ID = "qconstell-result/1"
PROBLEMS = ("sic", "mub", "hadamard", "latin", "oqls", "two-unitary", "perfect-tensor",
            "ame", "werner", "dichotomic", "distill", "ksum")
SEARCHABLE = ("sic", "mub", "two-unitary", "distill", "ksum")
CACHE_ENV = "QCONSTELL_CACHE_DIR"


class UsageError(Exception):
    """Bad arguments, unreadable files or malformed payloads (exit 2)."""


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qconstell", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("construct", "verify", "search", "replay"):
        p = sub.add_parser(name)
        if name != "replay":
            p.add_argument("--problem", required=True, choices=PROBLEMS)
        p.add_argument("--dim", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--copies", type=int, default=1)
        p.add_argument("--bases", type=int, help="number of bases for MUB search")
        p.add_argument("--mode", choices=ent.KS_MODES, default="general")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--restarts", type=int)
        p.add_argument("--budget", type=int, help="iteration cap per restart")
        p.add_argument("--tol", type=float)
        p.add_argument("--input")
        p.add_argument("--out")
        p.add_argument("--threads", type=int, default=1)
    return parser


# --------------------------------------------------------------------------
# file handling
# --------------------------------------------------------------------------


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _result_path(config: dict, out) -> Path:
    if out and str(out).endswith(".json"):
        return Path(out)
    base = Path(out) if out else Path(os.environ.get(CACHE_ENV, "qconstell-results"))
    key = {k: config[k] for k in ("command", "problem", "seed", "input_sha256", "params", "tolerances")}
    digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:16]
    return base / f"{config['command']}-{config['problem']}-s{config['seed']}-{digest}.json"


def write_atomic(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh, indent=1, allow_nan=False)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(obj):
    """Make ``obj`` strict-JSON: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


# --------------------------------------------------------------------------
# payload extraction
# --------------------------------------------------------------------------


def _object_from_result(data: dict, problem: str) -> dict:
    """Accept construct results, search results, or bare payloads."""
    if "object" in data and isinstance(data["object"], dict):
        return data["object"]
    cert = data.get("certificate")
    if isinstance(cert, dict):
        extra, params = cert.get("extra", {}), cert.get("params", {})
        if problem == "sic" and "fiducial" in extra:
            return {"dim": params.get("dim"), "fiducial": extra["fiducial"], "from_search": True}
        if problem == "mub" and "bases" in extra:
            return {"bases": extra["bases"], "from_search": True}
        if problem in ("two-unitary", "perfect-tensor") and "unitary" in extra:
            return {"dim": params.get("dim"), "matrix": extra["unitary"], "from_search": True}
        if problem == "distill" and "probe" in extra:
            obj = {"copies": params.get("copies", 1), "P": extra["probe"]["P"], "Q": extra["probe"]["Q"],
                   "dim": params.get("dim"), "from_search": True}
            if "alpha" in params:
                obj["alpha"] = params["alpha"]
            if "rho" in params:
                obj["rho"] = params["rho"]
            return obj
        if problem == "ksum" and "A" in extra:
            return {"A": extra["A"], "B": extra["B"], "from_search": True}
        raise UsageError(f"certificate for problem {cert.get('problem')!r} carries no {problem} object")
    return data


def _rho_from(obj: dict, dim):
    if "rho" in obj:
        m = decode_array(obj["rho"])
    elif "alpha" in obj:
        d = obj.get("dim", dim)
        if d is None:
            raise UsageError("werner payload needs a dimension")
        m = ent.werner(int(d), float(obj["alpha"])).matrix
    elif "rows" in obj:
        m = decode_array(obj)
    else:
        raise UsageError("payload holds no density matrix")
    d = int(round(math.sqrt(m.shape[0])))
    if m.shape[0] != m.shape[1] or d * d != m.shape[0]:
        raise UsageError(f"density matrix shape {m.shape} is not d^2 x d^2")
    return m, d


# --------------------------------------------------------------------------
# construct
# --------------------------------------------------------------------------


def _need_dim(args):
    if args.dim is None:
        raise UsageError(f"--dim is required for problem {args.problem}")
    return args.dim


def do_construct(args):
    p = args.problem
    if p == "sic":
        n = _need_dim(args)
        if n not in cons.KNOWN_FIDUCIALS:
            raise UsageError(f"no built-in fiducial for dimension {n}; run `search --problem sic`")
        f = cons.KNOWN_FIDUCIALS[n]()
        orbit = cons.sic_orbit(f)
        obj = {"dim": n, "fiducial": encode_state(f, [n]), "vectors": [encode_state(v, [n]) for v in orbit]}
        report = cons.verify_sic(orbit, _tol(args, 1e-10))
    elif p == "mub":
        n = _need_dim(args)
        try:
            bases = cons.mub_prime(n)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        obj = {"dim": n, "bases": [encode_array(b) for b in bases]}
        report = cons.verify_mub(bases, _tol(args, 1e-10))
    elif p == "hadamard":
        n = _need_dim(args)
        f = cons.fourier_matrix(n)
        obj = {"dim": n, "matrix": encode_array(f)}
        report = cons.verify_complex_hadamard(f, _tol(args, 1e-10))
    elif p in ("latin", "oqls", "two-unitary", "perfect-tensor", "ame"):
        n = _need_dim(args)
        try:
            a, b = comb.graeco_latin(n)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        tol = _tol(args, 1e-12)
        u = comb.permutation_unitary(a, b)
        if p == "latin":
            obj = {"dim": n, "squares": [a.tolist(), b.tolist()]}
            report = comb.verify_graeco_latin(a, b)
        elif p == "oqls":
            table = comb.product_table(a, b)
            obj = {"dim": n, "table": [[encode_state(v, [n, n]) for v in row] for row in table]}
            report = comb.verify_oqls(table, tol)
        elif p == "two-unitary":
            obj = {"dim": n, "matrix": encode_array(u)}
            report = comb.verify_two_unitary(u, n, tol)
        elif p == "perfect-tensor":
            obj = {"dim": n, "matrix": encode_array(u, dims=[n] * 4)}
            report = comb.verify_perfect_tensor(comb.tensor_from_unitary(u, n), tol)
        else:
            c = comb.ame4_from_two_unitary(u, n)
            obj = {"parties": 4, "local_dim": n, "state": encode_state(c.state, [n] * 4)}
            report = comb.verify_ame(c, _tol(args, 1e-10))
    elif p in ("werner", "dichotomic"):
        d = _need_dim(args)
        if args.alpha is None:
            raise UsageError("--alpha is required for Werner states")
        try:
            w = ent.werner(d, args.alpha)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        obj = {"dim": d, "alpha": args.alpha, "rho": encode_array(w.matrix, dims=[d, d]),
               "labels": sorted(ent.classify_werner(d, args.alpha))}
        report = _werner_report(w.matrix, d, args.alpha, _tol(args, 1e-12))
    elif p == "ksum":
        a = np.diag([1, -1, 0, 0]).astype(complex) / 4
        inst = ent.KsInstance(a, a)
        obj = {"A": encode_array(inst.a), "B": encode_array(inst.b)}
        report = _ks_report(inst, _tol(args, 1e-10))
    else:  # distill
        d = _need_dim(args)
        if args.alpha is None:
            raise UsageError("--alpha is required for distill")
        probe = ent.werner_probe_example(d)
        obj = {"dim": d, "alpha": args.alpha, "copies": 1, "P": encode_array(probe.p), "Q": encode_array(probe.q)}
        report = _probe_example_report(ent.werner(d, args.alpha).matrix, d, args.alpha, probe, _tol(args, 1e-12))
    return obj, report


def _tol(args, default):
    return args.tol if args.tol is not None else default


# --------------------------------------------------------------------------
# verify
# --------------------------------------------------------------------------


def _werner_report(m, d, alpha, tol):
    numeric = hermitian_eigvals(partial_transpose(m, d, d))
    analytic = ent.expand_spectrum(ent.werner_pt_spectrum(d, alpha)[1])
    dev = np.abs(numeric - analytic)
    k = int(np.argmax(dev))
    return CheckReport.from_residual(dev[k], tol, [(k,)], {"lambda_min": float(numeric[0])})


def _ks_report(inst, tol):
    value = ent.ks_objective(inst)
    excess = max(0.0, value - ent.KS_BOUND)
    return CheckReport.from_residual(excess, tol, [], {"value": value})


def _distill_report(m, n, probe, tol):
    """A probe passes when it is a distillability witness: value at or below ``-margin``.

    The residual is ``max(0, value + margin)``; ``margin`` defaults to ``10 tol_eig``
    with ``tol_eig = 1e-12 ||X||`` and is replaced by ``--tol`` when given.
    """
    value = ent.distill_value(m, n, probe)
    x = ent.pt_power(m, probe.d, n)
    tol_eig = 1e-12 * float(np.linalg.norm(x, 2))
    margin = 10 * tol_eig if tol is None else tol
    return CheckReport.from_residual(max(0.0, value + margin), 0.0, [],
                                     {"value": value, "tol_eig": tol_eig, "margin": margin})


def _probe_example_report(m, d, alpha, probe, tol):
    # With P = Q = span{|0>, |1>} the compressed block is (I + alpha |phi><phi|) / (d^2 + alpha d),
    # |phi> = |00> + |11>, whose smallest eigenvalue is min(1 + 2 alpha, 1) / (d^2 + alpha d).
    value = ent.distill_value(m, 1, probe)
    expected = min(1 + 2 * alpha, 1.0) / (d * d + alpha * d)
    return CheckReport.from_residual(abs(value - expected), tol, [],
                                     {"value": value, "closed_form": expected})


def do_verify(args, data):
    p = args.problem
    obj = _object_from_result(data, p)
    default = 1e-8 if obj.get("from_search") else 1e-10
    tol = _tol(args, default)
    if p == "sic":
        if "vectors" in obj:
            vecs = np.array([decode_state(v)[0] for v in obj["vectors"]])
        else:
            fid = obj.get("fiducial", obj)
            amps, _ = decode_state(fid)
            amps = amps / np.linalg.norm(amps)
            vecs = cons.sic_orbit(amps)
        if args.dim is not None and vecs.shape[1] != args.dim:
            raise UsageError(f"input vectors have dimension {vecs.shape[1]}, expected {args.dim}")
        try:
            return cons.verify_sic(vecs, tol)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if p == "mub":
        bases = [decode_array(b) for b in obj["bases"]]
        try:
            return cons.verify_mub(bases, tol)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if p == "hadamard":
        return cons.verify_complex_hadamard(decode_array(obj.get("matrix", obj)), tol)
    if p == "latin":
        squares = obj["squares"] if "squares" in obj else [obj]
        try:
            if len(squares) == 1:
                return comb.verify_latin(np.array(squares[0]))
            return comb.verify_graeco_latin(np.array(squares[0]), np.array(squares[1]))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if p == "oqls":
        table = np.array([[decode_state(c)[0] for c in row] for row in obj["table"]])
        try:
            if table.shape[2] == table.shape[0]:
                return comb.verify_quantum_latin(table, tol)
            return comb.verify_oqls(table, tol)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if p in ("two-unitary", "perfect-tensor"):
        payload = obj.get("matrix", obj)
        u = decode_array(payload)
        d = args.dim or obj.get("dim") or int(round(math.sqrt(u.shape[0])))
        if u.shape != (d * d, d * d):
            raise UsageError(f"matrix shape {u.shape} does not match dimension {d}")
        if p == "two-unitary":
            return comb.verify_two_unitary(u, d, tol)
        return comb.verify_perfect_tensor(comb.tensor_from_unitary(u, d), tol)
    if p == "ame":
        amps, dims = decode_state(obj.get("state", obj))
        n = int(obj.get("parties", len(dims)))
        d = int(obj.get("local_dim", dims[0]))
        try:
            return comb.verify_ame(comb.AmeCandidate(n, d, amps), tol)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if p == "werner":
        m, d = _rho_from(obj, args.dim)
        alpha = obj.get("alpha", args.alpha)
        if alpha is None:
            raise UsageError("werner verification needs alpha (in the payload or --alpha)")
        expected = ent.werner(d, alpha).matrix
        dev = float(np.max(np.abs(m - expected)))
        spectral = _werner_report(m, d, alpha, tol)
        worst = max(dev, spectral.max_residual)
        return CheckReport.from_residual(worst, tol, spectral.witness,
                                         {"entrywise": dev, "spectrum": spectral.max_residual,
                                          "labels": sorted(ent.classify_werner(d, alpha))})
    if p == "dichotomic":
        m, d = _rho_from(obj, args.dim)
        return ent.dichotomic_check(m, d, tol if args.tol is not None else 1e-10)
    if p == "ksum":
        try:
            inst = ent.KsInstance(decode_array(obj["A"]), decode_array(obj["B"]))
        except (KeyError, ValueError) as exc:
            raise UsageError(f"invalid Kronecker-sum instance: {exc}") from exc
        return _ks_report(inst, tol)
    # distill
    m, d = _rho_from(obj, args.dim)
    n = int(obj.get("copies", args.copies))
    try:
        probe = ent.DistillProbe(d, n, decode_array(obj["P"]), decode_array(obj["Q"]))
    except (KeyError, ValueError) as exc:
        raise UsageError(f"invalid probe: {exc}") from exc
    return _distill_report(m, n, probe, args.tol)


# --------------------------------------------------------------------------
# search / replay
# --------------------------------------------------------------------------

DEFAULT_RESTARTS = {"sic": 200, "mub": 20, "two-unitary": 100, "distill": 4, "ksum": 100}


def search_params(args) -> dict:
    p = args.problem
    if p in ("sic", "mub", "two-unitary"):
        params = {"dim": _need_dim(args)}
        if p == "mub":
            params["bases"] = args.bases or 3
        return params
    if p == "distill":
        if args.alpha is None:
            raise UsageError("--alpha is required for distill")
        return {"dim": _need_dim(args), "alpha": args.alpha, "copies": args.copies}
    return {"mode": args.mode}


def run_search(problem: str, params: dict, seed: int, restarts: int, max_iters, workers: int):
    """Dispatch a search; shared by ``search`` and ``replay``."""
    kw = {"seed": seed, "workers": workers}
    if max_iters is not None:
        kw["max_iters"] = max_iters
    try:
        if problem == "sic":
            return cons.sic_search(params["dim"], restarts=restarts, **kw)
        if problem == "mub":
            return cons.mub_search(params["dim"], params.get("bases", 3), restarts=restarts, **kw)
        if problem == "two-unitary":
            return comb.two_unitary_search(params["dim"], restarts=restarts, **kw)
        if problem == "distill":
            if "rho" in params:
                rho = decode_array(params["rho"])
            else:
                rho = ent.werner(params["dim"], params["alpha"])
            return ent.search_distillable(rho, params["copies"], restarts, **kw)
        if problem == "ksum":
            return ent.ks_search_violation(restarts, mode=params.get("mode", "general"), **kw)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc
    raise UsageError(f"problem {problem!r} has no search")


def _cert_summary(cert) -> str:
    extra = cert.extra
    bits = [f"best value {cert.best_value:.6e} over {cert.restarts} restarts"]
    for key in ("residual", "max_value", "verdict"):
        if key in extra:
            v = extra[key]
            bits.append(f"{key} {v:.6e}" if isinstance(v, float) else f"{key} {v}")
    if "report" in extra:
        bits.append(f"verifier residual {extra['report']['max_residual']:.3e}")
    return "; ".join(bits)


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _write_usage_error(argv) -> None:
    """Record an unparseable command line; argparse has already printed the message."""
    out = None
    if "--out" in argv and argv.index("--out") + 1 < len(argv):
        out = argv[argv.index("--out") + 1]
    config = {"command": "usage-error", "problem": None, "params": {"argv": argv}, "seed": None,
              "tolerances": {}, "input_sha256": None}
    result = {"schema": SCHEMA_ID, "config": config, "exit_code": 2,
              "summary": "error: unparseable arguments", "error": "unparseable arguments"}
    path = _result_path(config, out)
    try:
        write_atomic(path, result)
    except OSError:
        return
    print(f"result: {path}", file=sys.stderr)


def run(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = int(exc.code or 0)
        if code == 2:
            _write_usage_error(argv)
        return code

    problem = getattr(args, "problem", None)
    config = {
        "command": args.command,
        "problem": problem,
        "params": {k: getattr(args, k) for k in ("dim", "alpha", "copies", "bases", "mode")},
        "seed": args.seed,
        "restarts": args.restarts,
        "budget": args.budget,
        "threads": args.threads,
        "tolerances": {"tol": args.tol},
        "input": args.input,
        "input_sha256": None,
        "out": args.out,
    }
    result = {"schema": SCHEMA_ID, "config": config}
    code = 0
    try:
        data = None
        if args.input is not None:
            data = _read_json(args.input)
            config["input_sha256"] = _sha256_file(args.input)
        if args.command == "construct":
            obj, report = do_construct(args)
            result["object"] = obj
            result["report"] = report.to_dict()
            code = 0 if report.passed else 1
            summary = f"constructed {problem}; self-check residual {report.max_residual:.3e}"
        elif args.command == "verify":
            if data is None:
                raise UsageError("verify needs --input")
            report = do_verify(args, data)
            result["report"] = report.to_dict()
            code = 0 if report.passed else 1
            summary = (f"{problem}: {'PASS' if report.passed else 'FAIL'} residual {report.max_residual:.3e} "
                       f"(tol {report.tolerance_used:.1e})")
        elif args.command == "search":
            if problem not in SEARCHABLE:
                raise UsageError(f"problem {problem!r} has no search; choose from {SEARCHABLE}")
            params = search_params(args)
            config["params"] = params
            restarts = args.restarts or DEFAULT_RESTARTS[problem]
            cert = run_search(problem, params, args.seed, restarts, args.budget, args.threads)
            result["certificate"] = cert.to_dict()
            summary = f"{problem} search: {_cert_summary(cert)}"
        else:  # replay
            if data is None:
                raise UsageError("replay needs --input")
            cert_in = data.get("certificate") if isinstance(data, dict) else None
            if not isinstance(cert_in, dict):
                raise UsageError("input holds no certificate")
            problem = config["problem"] = cert_in["problem"]
            cfg = cert_in["config"]
            cert = run_search(problem, cert_in["params"], cfg["seed"], cfg["restarts"],
                              cfg["max_iters"], cfg.get("workers", 1))
            config["seed"] = cfg["seed"]
            config["params"] = cert_in["params"]
            original = cert_in["best_value"]
            replayed = cert.to_dict()["best_value"]
            identical = original == replayed
            result["certificate"] = cert.to_dict()
            result["replay"] = {"original_best_value": original, "replayed_best_value": replayed,
                                "identical": identical}
            code = 0 if identical else 1
            summary = f"replay {problem}: {'identical' if identical else 'MISMATCH'} best value {replayed!r}"
    except (UsageError, FormatError) as exc:
        code = 2
        summary = f"error: {exc}"
        result["error"] = str(exc)
    except (KeyError, TypeError) as exc:
        code = 2
        summary = f"error: malformed input ({exc!r})"
        result["error"] = summary
    result["exit_code"] = code
    result["summary"] = summary
    path = _result_path(config, args.out)
    try:
        write_atomic(path, _clean(result))
    except OSError as exc:
        print(f"error: cannot write result file {path}: {exc.strerror}", file=sys.stderr)
        return 2
    stream = sys.stderr if code == 2 else sys.stdout
    print(summary, file=stream)
    print(f"result: {path}", file=stream)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
