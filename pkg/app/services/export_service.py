"""
Result artifacts: graphs, trajectories, ensembles and experiment reports as CSV or JSON.

CSV files start with ``# key=value`` lines carrying the configuration that reproduces them.
"""
import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

from app.models.experiment_models import OutputFormat
from app.models.graph_models import ContinuousTimeGraph, DiscreteTimeGraph
from app.models.lattice_models import InitialData
from app.models.report_models import ConvergenceReport
from app.models.trajectory_models import AsepTrajectory, OffsetState, PathEnsemble
import logging

logger = logging.getLogger(__name__)

REPORT_SECTIONS = ("convergence_rows", "tail_rows", "bad_event_rows", "agreement_rows", "stat_rows", "criteria")


def _provenance_lines(provenance: Optional[Dict[str, Any]]) -> List[str]:
    return [f"# {key}={json.dumps(value, sort_keys=True)}" for key, value in sorted((provenance or {}).items())]


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]],
               provenance: Optional[Dict[str, Any]] = None) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            for line in _provenance_lines(provenance):
                f.write(line + "\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        logger.info(f"Wrote {path}")
        return path
    except Exception as e:
        logger.error(f"Error writing {path}: {e}")
        raise


def _write_json(path: Path, payload: Any) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
        logger.info(f"Wrote {path}")
        return path
    except Exception as e:
        logger.error(f"Error writing {path}: {e}")
        raise


class ExportService:
    @staticmethod
    def write_graph(graph: Union[ContinuousTimeGraph, DiscreteTimeGraph], path: Union[str, Path],
                    provenance: Optional[Dict[str, Any]] = None) -> Path:
        rows = ((event.t, event.i, event.j) for event in graph.events)
        return _write_csv(Path(path), ("t", "i", "j"), rows, provenance)

    @staticmethod
    def write_trajectories(trajectories: Sequence[AsepTrajectory], path: Union[str, Path],
                           provenance: Optional[Dict[str, Any]] = None) -> Path:
        """One row per (replica, query time, particle), the initial configuration at time 0"""
        rows = []
        for replica, trajectory in enumerate(trajectories):
            for t, config in [(0.0, trajectory.initial)] + [(t, trajectory.at(t)) for t in trajectory.times]:
                for site, tag, color in zip(config.positions, config.tags, config.colors):
                    rows.append((replica, t, tag, site, color.value))
        return _write_csv(Path(path), ("replica_id", "time", "tag", "position", "color"), rows, provenance)

    @staticmethod
    def write_offset_trajectories(trajectories: Sequence[Sequence[OffsetState]], path: Union[str, Path],
                                  provenance: Optional[Dict[str, Any]] = None) -> Path:
        rows = []
        for replica, states in enumerate(trajectories):
            for state in states:
                config = state.config
                for site, tag, color in zip(config.positions, config.tags, config.colors):
                    rows.append((replica, state.time, tag, site, color.value))
        return _write_csv(Path(path), ("replica", "t", "tag", "q", "color"), rows, provenance)

    @staticmethod
    def write_ensemble(ensemble: PathEnsemble, path: Union[str, Path],
                       provenance: Optional[Dict[str, Any]] = None) -> Path:
        rows = (
            (x, y, arrows.in_left, arrows.in_bottom, arrows.out_right, arrows.out_top)
            for (x, y), arrows in sorted(ensemble.arrows.items())
        )
        return _write_csv(
            Path(path), ("x", "y", "in_left", "in_bottom", "out_right", "out_top"), rows, provenance
        )

    @staticmethod
    def write_initial_data(phi: InitialData, path: Union[str, Path]) -> Path:
        return _write_json(Path(path), phi.to_json_dict())

    @staticmethod
    def read_initial_data(path: Union[str, Path]) -> InitialData:
        try:
            with open(Path(path)) as f:
                return InitialData.from_json_dict(json.load(f))
        except Exception as e:
            logger.error(f"Error reading initial data from {path}: {e}")
            raise

    @staticmethod
    def report_rows(report: ConvergenceReport) -> List[tuple]:
        """Long format (section, index, field, value) over every row of every section"""
        rows = []
        for section in REPORT_SECTIONS:
            for index, row in enumerate(getattr(report, section)):
                for field, value in row.model_dump(mode="json").items():
                    rows.append((section, index, field, "" if value is None else value))
        return rows

    @staticmethod
    def write_report(report: ConvergenceReport, out_dir: Union[str, Path], name: str,
                     fmt: OutputFormat = OutputFormat.CSV) -> Path:
        out = Path(out_dir)
        if fmt == OutputFormat.JSON:
            payload = {
                "config": report.config,
                "rows": {section: [row.model_dump(mode="json") for row in getattr(report, section)]
                         for section in REPORT_SECTIONS if section != "criteria"},
                "criteria": [criterion.model_dump(mode="json") for criterion in report.criteria],
                "passed": report.passed,
            }
            return _write_json(out / f"{name}.json", payload)
        return _write_csv(
            out / f"{name}.csv", ("section", "index", "field", "value"), ExportService.report_rows(report),
            report.config,
        )

    @staticmethod
    def read_report_csv(path: Union[str, Path]) -> Dict[str, Any]:
        """Provenance and long-format rows of a CSV report"""
        provenance: Dict[str, Any] = {}
        rows: List[Dict[str, str]] = []
        try:
            with open(Path(path), newline="") as f:
                lines = f.read().splitlines()
        except Exception as e:
            logger.error(f"Error reading report {path}: {e}")
            raise
        body = []
        for line in lines:
            if line.startswith("# "):
                key, _, value = line[2:].partition("=")
                provenance[key] = json.loads(value)
            else:
                body.append(line)
        for row in csv.DictReader(body):
            rows.append(row)
        return {"config": provenance, "rows": rows}


export_service = ExportService()
