"""
Script to view an experiment report written as CSV or JSON
"""
import sys
from pathlib import Path

# Add project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import json
from collections import defaultdict

from app.services.export_service import export_service


def _load(path: Path):
    if path.suffix == ".json":
        payload = json.loads(path.read_text())
        return payload["config"], payload["rows"], payload["criteria"]

    parsed = export_service.read_report_csv(path)
    grouped = defaultdict(dict)
    for row in parsed["rows"]:
        grouped[(row["section"], int(row["index"]))][row["field"]] = row["value"]
    rows = defaultdict(list)
    criteria = []
    for (section, _), fields in sorted(grouped.items()):
        if section == "criteria":
            criteria.append({**fields, "passed": fields["passed"] == "True"})
        else:
            rows[section].append(fields)
    return parsed["config"], rows, criteria


def view_report(path: Path):
    """Print provenance, row tables and criteria of one report"""
    config, rows, criteria = _load(path)

    print("\n" + "=" * 60)
    print(f"REPORT - {path.name}")
    print("=" * 60)

    print("\n⚙️  CONFIGURATION:")
    print("-" * 60)
    for key in ("command", "seed", "replicas", "L", "R", "epsilons", "M", "N", "phi"):
        if key in config:
            print(f"{key}: {config[key]}")

    for section, entries in rows.items():
        if not entries:
            continue
        print(f"\n📊 {section.upper()} ({len(entries)} rows):")
        print("-" * 60)
        columns = list(entries[0].keys())
        print("  ".join(f"{column[:12]:>12}" for column in columns))
        for entry in entries[:40]:
            print("  ".join(f"{str(entry[column])[:12]:>12}" for column in columns))
        if len(entries) > 40:
            print(f"... {len(entries) - 40} more")

    print("\n✅ CRITERIA:")
    print("-" * 60)
    for criterion in criteria:
        print(f"{'PASS' if criterion['passed'] else 'FAIL'} {criterion['name']}: {criterion.get('detail', '')}")
    print("=" * 60 + "\n")


if __name__ == "__main__":
    if len(sys.argv) != 2:
        print("Usage: python scripts/view_report.py <report.csv|report.json>")
        sys.exit(2)
    view_report(Path(sys.argv[1]))
