"""Convergence study harness: meshes x degrees x N, energy errors and rates.

The default configuration solves the layer benchmark with epsilon = 1e-6,
beta = 1 and sigma = p + 1 for p = 1, 2, 3 on N in {64, 128, 256, 512} for
all five mesh families, and reports the energy-norm error together with
the observed order log2(e_N / e_2N) attached to the finer row.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from .fem import energy_error, solve_bvp
from .meshes import (
    AssumptionViolated,
    GeneratingFunction,
    LayerCells,
    Mesh,
    MeshParams,
    bakhvalov_s_function,
    decay_at_transition,
    exp_graded_function,
    exp_graded_function_for,
    generate_exp_graded_mesh,
    generate_s_type_mesh,
    max_abs_psi_derivative,
)
from .problems import benchmark_problem

__all__ = [
    "VERSION",
    "FAMILIES",
    "StudyConfig",
    "StudyRow",
    "ConvergenceTable",
    "ComparisonEntry",
    "ComparisonReport",
    "MeshReportData",
    "family_mesh",
    "family_phi",
    "run_study",
    "compare_reference",
    "mesh_report",
    "reference_table_path",
]

VERSION = "0.1.0"

# Family name -> (generating function for the given params, layer-cell variant).
# "exp" is the original exponentially graded construction; the "-star"
# variants put N/2 - 1 cells in the layer region.
FAMILIES = ("bs", "exp-s", "exp", "bs-star", "exp-s-star")

_FORMATS = ("markdown", "csv", "json")


def family_phi(family: str, params: MeshParams) -> GeneratingFunction:
    """The mesh-generating function behind a named family."""
    if family in ("bs", "bs-star"):
        return bakhvalov_s_function(params.n_cells)
    if family in ("exp-s", "exp-s-star"):
        return exp_graded_function(params.n_cells)
    if family == "exp":
        return exp_graded_function_for(params)
    raise ValueError(f"unknown mesh family {family!r}; expected one of {FAMILIES}")


def family_mesh(family: str, params: MeshParams) -> Mesh:
    """Generate the mesh for a named family."""
    if family == "exp":
        return generate_exp_graded_mesh(params)
    layer = LayerCells.HALF_MINUS_ONE if family.endswith("-star") else LayerCells.HALF
    return generate_s_type_mesh(params, family_phi(family, params), layer)


@dataclass(frozen=True)
class StudyConfig:
    """What to run: families, polynomial degrees, mesh sizes, parameters."""

    families: tuple[str, ...] = FAMILIES
    degrees: tuple[int, ...] = (1, 2, 3)
    n_values: tuple[int, ...] = (64, 128, 256, 512)
    epsilon: float = 1e-6
    beta: float = 1.0
    sigma_rule: str | float = "p+1"
    output_format: str = "markdown"

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "degrees", tuple(int(p) for p in self.degrees))
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        for family in self.families:
            if family not in FAMILIES:
                raise ValueError(f"unknown mesh family {family!r}; expected one of {FAMILIES}")
        if any(p < 1 for p in self.degrees):
            raise ValueError("degrees must be >= 1")
        if list(self.n_values) != sorted(self.n_values):
            raise ValueError("n_values must be sorted ascending")
        if any(n % 2 or n < 8 for n in self.n_values):
            raise ValueError("every N must be even and >= 8")
        if not (self.epsilon > 0.0 and self.beta > 0.0):
            raise ValueError("epsilon and beta must be positive")
        if self.sigma_rule != "p+1":
            sigma = float(self.sigma_rule)
            if not sigma > 0.0:
                raise ValueError("explicit sigma must be positive")
            object.__setattr__(self, "sigma_rule", sigma)
        if self.output_format not in _FORMATS:
            raise ValueError(f"output_format must be one of {_FORMATS}")

    def sigma_for(self, degree: int) -> float:
        return float(degree + 1) if self.sigma_rule == "p+1" else float(self.sigma_rule)

    def to_dict(self) -> dict:
        return {
            "families": list(self.families),
            "degrees": list(self.degrees),
            "n_values": list(self.n_values),
            "epsilon": self.epsilon,
            "beta": self.beta,
            "sigma_rule": self.sigma_rule,
            "output_format": self.output_format,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "StudyConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class StudyRow:
    """One (family, degree, N) cell of the convergence table."""

    family: str
    degree: int
    n_cells: int
    error: float | None
    rate: float | None = None
    residual: float | None = None
    note: str | None = None


def _fmt_error(value: float) -> str:
    return f"{value:.3e}"


def _fmt_rate(value: float) -> str:
    return f"{value:.2f}"


@dataclass
class ConvergenceTable:
    """Study results plus the configuration and provenance metadata."""

    rows: list[StudyRow]
    config: StudyConfig
    created: str
    version: str = VERSION

    def cell(self, family: str, degree: int, n_cells: int) -> StudyRow | None:
        for row in self.rows:
            if (row.family, row.degree, row.n_cells) == (family, degree, n_cells):
                return row
        return None

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["family", "p", "N", "error", "rate"])
        for row in self.rows:
            error = "---" if row.error is None else _fmt_error(row.error)
            rate = "" if row.rate is None else _fmt_rate(row.rate)
            writer.writerow([row.family, row.degree, row.n_cells, error, rate])
        return out.getvalue()

    def to_markdown(self) -> str:
        lines = []
        families = list(self.config.families)
        header = "| N | " + " | ".join(f"{f} | rate" for f in families) + " |"
        divider = "|--:|" + "|".join(["--:", "--:"] * len(families)) + "|"
        for degree in self.config.degrees:
            lines.append(f"### degree p = {degree}")
            lines.append("")
            lines.append(header)
            lines.append(divider)
            for n in self.config.n_values:
                cells = []
                for family in families:
                    row = self.cell(family, degree, n)
                    if row is None or row.error is None:
                        cells.extend(["---", ""])
                    else:
                        cells.append(_fmt_error(row.error))
                        cells.append("" if row.rate is None else _fmt_rate(row.rate))
                lines.append("| " + str(n) + " | " + " | ".join(cells) + " |")
            lines.append("")
        return "\n".join(lines)

    def to_json(self) -> str:
        payload = {
            "metadata": {
                "config": self.config.to_dict(),
                "created": self.created,
                "version": self.version,
            },
            "rows": [
                {
                    "family": row.family,
                    "p": row.degree,
                    "N": row.n_cells,
                    "error": row.error,
                    "rate": row.rate,
                    "residual": row.residual,
                    "note": row.note,
                }
                for row in self.rows
            ],
        }
        return json.dumps(payload, indent=2)

    def render(self, output_format: str | None = None) -> str:
        fmt = output_format or self.config.output_format
        if fmt == "markdown":
            return self.to_markdown()
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"output_format must be one of {_FORMATS}")


def _worker_count(n_cells: int) -> int:
    env = os.environ.get("LAYERMESH_THREADS", "").strip()
    if env:
        cap = max(1, int(env))
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_cells))


def _run_cell(config: StudyConfig, bvp, exact, family: str, degree: int, n: int) -> StudyRow:
    params = MeshParams(
        epsilon=config.epsilon,
        sigma=config.sigma_for(degree),
        beta=config.beta,
        n_cells=n,
    )
    try:
        mesh = family_mesh(family, params)
    except AssumptionViolated as exc:
        return StudyRow(family=family, degree=degree, n_cells=n, error=None, note=str(exc))
    solution = solve_bvp(bvp, mesh, degree)
    err = energy_error(solution, exact, config.epsilon)
    return StudyRow(
        family=family,
        degree=degree,
        n_cells=n,
        error=err.total,
        residual=solution.residual,
    )


def run_study(config: StudyConfig | None = None) -> ConvergenceTable:
    """Run every (family, degree, N) cell and attach convergence rates.

    Cells are independent; they may run on a small thread pool whose size
    is capped by the LAYERMESH_THREADS environment variable.  A cell whose
    transition point is inadmissible is recorded as failed instead of
    aborting the study, and results are always emitted in (family, degree,
    N) order, so output is deterministic for a fixed configuration.
    """
    config = config or StudyConfig()
    bvp, exact = benchmark_problem(config.epsilon)
    cells = [
        (family, degree, n)
        for family in config.families
        for degree in config.degrees
        for n in config.n_values
    ]
    workers = _worker_count(len(cells))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(
                pool.map(lambda c: _run_cell(config, bvp, exact, *c), cells)
            )
    else:
        rows = [_run_cell(config, bvp, exact, *cell) for cell in cells]

    by_key = {(r.family, r.degree, r.n_cells): r for r in rows}
    for family in config.families:
        for degree in config.degrees:
            previous = None
            for n in config.n_values:
                row = by_key[(family, degree, n)]
                if (
                    previous is not None
                    and previous.error is not None
                    and row.error is not None
                ):
                    row.rate = math.log(previous.error / row.error) / math.log(
                        n / previous.n_cells
                    )
                previous = row
    created = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return ConvergenceTable(rows=rows, config=config, created=created)


def reference_table_path() -> Path:
    """Path of the bundled reference convergence table."""
    return Path(str(resources.files("layermesh").joinpath("data/table1_reference.csv")))


def _load_reference(path) -> dict[tuple[str, int, int], tuple[float | None, float | None]]:
    cells = {}
    with open(path, newline="") as handle:
        filtered = (line for line in handle if line.strip() and not line.startswith("#"))
        reader = csv.DictReader(filtered)
        required = {"family", "p", "N", "error", "rate"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"reference file needs columns {sorted(required)}")
        for record in reader:
            key = (record["family"], int(record["p"]), int(record["N"]))
            error = None if record["error"] in ("", "---") else float(record["error"])
            rate = None if record["rate"] in ("", None) else float(record["rate"])
            cells[key] = (error, rate)
    if not cells:
        raise ValueError(f"reference file {path} contains no data rows")
    return cells


@dataclass
class ComparisonEntry:
    family: str
    degree: int
    n_cells: int
    error_deviation: float | None
    rate_deviation: float | None
    ok: bool
    note: str = ""


@dataclass
class ComparisonReport:
    """Per-cell deviations of a study against reference data."""

    entries: list[ComparisonEntry]
    tol_error: float
    tol_rate: float

    @property
    def passed(self) -> bool:
        return all(entry.ok for entry in self.entries)

    @property
    def max_error_deviation(self) -> float:
        devs = [e.error_deviation for e in self.entries if e.error_deviation is not None]
        return max(devs, default=0.0)

    @property
    def max_rate_deviation(self) -> float:
        devs = [e.rate_deviation for e in self.entries if e.rate_deviation is not None]
        return max(devs, default=0.0)

    def render_text(self) -> str:
        lines = []
        for entry in self.entries:
            if not entry.ok:
                lines.append(
                    f"FAIL ({entry.family}, p={entry.degree}, N={entry.n_cells}): {entry.note}"
                )
        n_ok = sum(entry.ok for entry in self.entries)
        lines.append(
            f"{'PASS' if self.passed else 'FAIL'}: {n_ok}/{len(self.entries)} cells within "
            f"tolerances (error <= {self.tol_error:.2%} relative, rate +- {self.tol_rate}); "
            f"max deviations: error {self.max_error_deviation:.3e}, "
            f"rate {self.max_rate_deviation:.3f}"
        )
        return "\n".join(lines)


def compare_reference(
    table: ConvergenceTable,
    reference_path,
    tol_error: float = 0.02,
    tol_rate: float = 0.05,
) -> ComparisonReport:
    """Compare a study table cell by cell against a reference CSV.

    Errors are compared after rounding to the table's printed precision
    (so a table written out and read back matches itself exactly), with
    relative tolerance ``tol_error``; rates with absolute tolerance
    ``tol_rate``.  Reference cells missing from the table are mismatches.
    """
    reference = _load_reference(reference_path)
    entries = []
    for (family, degree, n), (ref_error, ref_rate) in sorted(reference.items()):
        row = table.cell(family, degree, n)
        if row is None:
            entries.append(
                ComparisonEntry(family, degree, n, None, None, False, "missing from study")
            )
            continue
        if row.error is None:
            entries.append(
                ComparisonEntry(
                    family, degree, n, None, None, False, f"study cell failed: {row.note}"
                )
            )
            continue
        ok = True
        note = []
        error_dev = None
        if ref_error is not None:
            error_dev = abs(float(_fmt_error(row.error)) - ref_error) / abs(ref_error)
            if error_dev > tol_error:
                ok = False
                note.append(
                    f"error {_fmt_error(row.error)} vs {_fmt_error(ref_error)} "
                    f"({error_dev:.2%} off)"
                )
        rate_dev = None
        if ref_rate is not None:
            if row.rate is None:
                ok = False
                note.append(f"rate missing, reference has {ref_rate}")
            else:
                rate_dev = abs(float(_fmt_rate(row.rate)) - ref_rate)
                if rate_dev > tol_rate:
                    ok = False
                    note.append(f"rate {_fmt_rate(row.rate)} vs {ref_rate}")
        entries.append(
            ComparisonEntry(family, degree, n, error_dev, rate_dev, ok, "; ".join(note))
        )
    return ComparisonReport(entries=entries, tol_error=tol_error, tol_rate=tol_rate)


@dataclass
class MeshReportData:
    """Mesh-quality quantities for one family at fixed parameters."""

    family: str
    n_cells: int
    epsilon: float
    sigma: float
    beta: float
    transition: float
    layer_cells: int
    min_cell_width: float
    max_cell_width: float
    measured_alpha: float
    max_abs_psi_derivative: float
    transition_decay: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def to_text(self) -> str:
        return "\n".join(
            [
                f"family:                {self.family}",
                f"N:                     {self.n_cells}",
                f"epsilon:               {self.epsilon!r}",
                f"sigma:                 {self.sigma!r}",
                f"beta:                  {self.beta!r}",
                f"transition lambda:     {self.transition!r}",
                f"layer cells:           {self.layer_cells}",
                f"min cell width:        {self.min_cell_width!r}",
                f"max cell width:        {self.max_cell_width!r}",
                f"measured alpha:        {self.measured_alpha!r}",
                f"max |psi'|:            {self.max_abs_psi_derivative!r}",
                f"decay at transition:   {self.transition_decay!r}",
            ]
        )


def mesh_report(params: MeshParams, family: str) -> MeshReportData:
    """Transition point, cell widths and optimality quantities for one mesh."""
    mesh = family_mesh(family, params)
    phi = family_phi(family, params)
    widths = mesh.cell_widths
    return MeshReportData(
        family=family,
        n_cells=params.n_cells,
        epsilon=params.epsilon,
        sigma=params.sigma,
        beta=params.beta,
        transition=mesh.transition,
        layer_cells=mesh.layer_cells,
        min_cell_width=float(widths.min()),
        max_cell_width=float(widths.max()),
        measured_alpha=math.exp(float(phi.eval(0.5))) / params.n_cells,
        max_abs_psi_derivative=max_abs_psi_derivative(phi),
        transition_decay=decay_at_transition(params, phi),
    )
