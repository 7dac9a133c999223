#!/usr/bin/env python3
"""
Reproduce the pump-depletion figure: three eight-pass runs at kappa0 = 1,
mean loss 0.03, pump depletion 0.01 and loss imbalance 0, 0.001, 0.002.

Writes the CSVs and SVGs into the directory given as the first argument
(default: ./fig2) and prints a short summary of the final values.
"""

import sys
from pathlib import Path

# Add parent directory to path (where src/ is located)
script_dir = Path(__file__).parent
project_root = script_dir.parent
sys.path.insert(0, str(project_root))

from src.core.exceptions import EntLaserException  # noqa: E402
from src.core.services.logging import configure_logging  # noqa: E402
from src.core.services.scenario_service import (  # noqa: E402
    FIG2_DELTA_LAMBDAS,
    ScenarioService,
)


def reproduce_fig2(out_dir: Path) -> int:
    """Run the preset and report <N> and the ratio at t = 8 for each curve."""
    print(f"Reproducing the pump-depletion figure into {out_dir} ...")
    configure_logging(level="WARNING")
    service = ScenarioService()

    try:
        written = service.write_fig2(out_dir)
    except EntLaserException as e:
        print(f"[FAIL] {type(e).__name__}: {e}")
        return 1

    for path in written:
        print(f"  wrote {path}")

    for delta_lambda in FIG2_DELTA_LAMBDAS:
        csv_path = out_dir / f"fig2_dlambda_{delta_lambda:g}.csv"
        last = csv_path.read_text(encoding="utf-8").rstrip("\n").rsplit("\n", 1)[-1]
        t, n, j2, ratio = last.split(",")
        print(
            f"  dlambda={delta_lambda:g}: t={float(t):g} "
            f"<N>={float(n):.4g} ratio={float(ratio):.4g}"
        )

    print("[OK] Done.")
    return 0


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("fig2")
    sys.exit(reproduce_fig2(target))
