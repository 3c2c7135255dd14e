"""Run orchestration and the JSON report / CSV side files."""

import json
import os
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .lyapunov import StageError, verify_theorem
from .measures import MeasureCache

__all__ = [
    "EXIT_OK",
    "EXIT_VERDICT",
    "EXIT_USAGE",
    "EXIT_STAGE",
    "run",
    "report_body_bytes",
    "write_report",
    "write_dilation_csv",
    "write_limit_csv",
]

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_USAGE = 2
EXIT_STAGE = 3


def _jsonable(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable, allow_nan=False)


def report_body_bytes(report):
    """Canonical bytes of the deterministic part of a report."""
    return _dumps(report["body"]).encode()


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report, path):
    atomic_write(path, _dumps(report) + "\n")


def write_dilation_csv(records, path):
    lines = ["n,best_log_ratio,best_disk_id"]
    lines += [f"{n},{v:.17g},{disk_id}" for n, v, disk_id in records]
    atomic_write(path, "\n".join(lines) + "\n")


def write_limit_csv(values, path):
    lines = ["m,value"] + [f"{m},{v:.17g}" for m, v in values]
    atomic_write(path, "\n".join(lines) + "\n")


def _side_path(output, k, kind):
    out = Path(output)
    return out.with_name(f"{out.stem}.k{k}.{kind}.csv")


def run(config, write=True):
    """Run :func:`verify_theorem` for every k of a :class:`RunConfig`.

    Returns ``(report, exit_code)``.  The report has a deterministic ``body``
    and a separate ``timing`` section holding wall-clock data.  A failing
    stage yields exit code 3 and a report whose body records the stage tag.
    """
    system = config.system()
    theorem_config = config.theorem_config()
    cache = MeasureCache(config.cache) if config.cache else None
    started = time.time()
    results, timing, failure = [], {}, None
    for k in config.k_list:
        stages = {}
        try:
            result = verify_theorem(system, k, theorem_config, cache=cache, timings=stages)
        except StageError as exc:
            failure = {"k": k, "stage": exc.stage, "error": str(exc.cause)}
            timing[f"k={k}"] = stages
            break
        timing[f"k={k}"] = stages
        results.append(result)

    body = {
        "tool": {"name": "kdilation", "version": __version__},
        "config": config.echo(),
        "config_hash": config.hash(),
        "system": {
            "id": system.id,
            "d": system.d,
            "domain": system.domain.describe(),
            "params": dict(system.params),
            "ground_truth_exponents": None
            if system.ground_truth is None
            else list(system.ground_truth),
        },
        "results": [r.to_dict() for r in results],
        "all_verdicts": failure is None and all(r.verdict for r in results),
        "failure": failure,
    }
    report = {
        "body": body,
        "timing": {
            "started_unix": started,
            "total_seconds": time.time() - started,
            "stages_seconds": timing,
        },
    }
    if write:
        write_report(report, config.output)
        for r in results:
            write_dilation_csv(r.dilation.records, _side_path(config.output, r.k, "dilation"))
            write_limit_csv(r.limit_diagnostic, _side_path(config.output, r.k, "limit"))
    if failure is not None:
        return report, EXIT_STAGE
    return report, EXIT_OK if body["all_verdicts"] else EXIT_VERDICT
