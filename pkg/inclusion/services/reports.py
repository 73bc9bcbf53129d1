"""
Result files of one run: solution.json, field.csv, summary.txt, manifest.json
and, when the oracle ran, oracle.json.

Every file is rendered in memory first so a failure leaves no partial output.
"""
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
import pydantic
import scipy

import inclusion
from inclusion.exceptions import ReportError
from inclusion.models import RunConfig, pairs
from inclusion.services.field import FieldSample
from inclusion.services.oracle import ComparisonReport
from inclusion.services.system import DensitySolution

logger = logging.getLogger(__name__)

FIELD_COLUMNS = ["re_w", "im_w", "re_z", "im_z", "region", "re_u", "im_u", "flagged"]


@dataclass
class RunResults:
    config: RunConfig
    solution: DensitySolution
    truncation: int
    guard: int
    samples: Optional[List[FieldSample]] = None
    comparison: Optional[ComparisonReport] = None
    residuals: Dict[str, float] = field(default_factory=dict)


def _finite(value: float):
    return value if np.isfinite(value) else None


def solution_payload(results: RunResults) -> dict:
    s = results.solution
    coefficients = {
        "xe_plus": [p.model_dump() for p in pairs(s.xe_plus)],
        "xe_minus": [p.model_dump() for p in pairs(s.xe_minus)],
    }
    if s.mode == "transmission":
        coefficients["xi_plus"] = [p.model_dump() for p in pairs(s.xi_plus)]
        coefficients["xi_minus"] = [p.model_dump() for p in pairs(s.xi_minus)]
    return {
        "name": results.config.name,
        "mode": s.mode,
        "truncation": results.truncation,
        "guard": results.guard,
        "coefficients": coefficients,
        "diagnostics": {
            "residual": s.residual,
            "relative_residual": s.relative_residual,
            "rank": s.rank,
            "n_unknowns": s.n_unknowns,
            "singular_gap": _finite(s.singular_gap),
            "condition": _finite(s.condition),
            "rotation_moment": s.rotation_moment,
            "converged": s.converged,
            **results.residuals,
        },
    }


def field_frame(samples: List[FieldSample]) -> pd.DataFrame:
    rows = []
    for sample in samples:
        w = sample.w if sample.w is not None else complex(np.nan, np.nan)
        rows.append(
            {
                "re_w": w.real,
                "im_w": w.imag,
                "re_z": sample.z.real,
                "im_z": sample.z.imag,
                "region": sample.region,
                "re_u": sample.u.real,
                "im_u": sample.u.imag,
                "flagged": sample.flagged,
            }
        )
    return pd.DataFrame(rows, columns=FIELD_COLUMNS)


def summary_text(results: RunResults) -> str:
    s = results.solution
    lines = [
        f"run: {results.config.name}",
        f"mode: {s.mode}",
        f"truncation: {results.truncation} (guard {results.guard})",
        f"residual: {s.residual:.3e} (relative {s.relative_residual:.3e})",
        f"rank: {s.rank}/{s.n_unknowns}",
        f"condition: {s.condition:.3e}",
        f"rotation moment: {s.rotation_moment:.3e}",
        f"converged: {'yes' if s.converged else 'no'}",
    ]
    for name, value in results.residuals.items():
        lines.append(f"{name.replace('_', ' ')}: {value:.3e}")
    if results.samples is not None:
        flagged = sum(sample.flagged for sample in results.samples)
        lines.append(f"field samples: {len(results.samples)} ({flagged} flagged)")
    if results.comparison is not None:
        c = results.comparison
        lines.append(
            f"oracle (q={c.q}): boundary max {c.boundary_max:.3e}, far max {c.far_max:.3e} "
            f"(relative {c.relative_boundary:.3e}, {c.relative_far:.3e})"
        )
    return "\n".join(lines) + "\n"


def manifest_payload(results: RunResults, files: List[str]) -> dict:
    return {
        "config": results.config.model_dump(mode="json", by_alias=True),
        "files": files,
        "versions": {
            "inclusion": inclusion.__version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
            "pydantic": pydantic.VERSION,
        },
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def emit_reports(results: RunResults, out_dir) -> List[Path]:
    """Write every report into out_dir and return the written paths."""
    out_dir = Path(out_dir)
    rendered: Dict[str, str] = {
        "solution.json": json.dumps(solution_payload(results), indent=2),
        "summary.txt": summary_text(results),
    }
    if results.samples is not None:
        rendered["field.csv"] = field_frame(results.samples).to_csv(index=False)
    if results.comparison is not None:
        rendered["oracle.json"] = results.comparison.model_dump_json(indent=2)
    rendered["manifest.json"] = json.dumps(manifest_payload(results, sorted(rendered)), indent=2)

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportError(out_dir, str(e)) from e

    written = []
    for name, text in rendered.items():
        path = out_dir / name
        try:
            path.write_text(text)
        except OSError as e:
            raise ReportError(path, str(e)) from e
        written.append(path)
    logger.info(f"Wrote {len(written)} report files to {out_dir}")
    return written
