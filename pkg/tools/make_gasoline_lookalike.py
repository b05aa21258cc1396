"""Regenerate src/ivstream/data/gasoline.csv, a SYNTHETIC stand-in for the
1970-1999 gasoline-consumption panel.

The values are simulated, not historical. They share the column schema and
rough magnitudes of the public series (log real consumption, log real prices,
log real income) and contain an unobserved "supply shock" that moves both the
gasoline price and consumption, so PG is endogenous while RI, RPT, RPN and RPU
are not.

    python3 tools/make_gasoline_lookalike.py
"""
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "ivstream" / "data" / "gasoline.csv"


def main(seed: int = 1970) -> None:
    rng = np.random.default_rng(seed)
    years = np.arange(1970, 2000)
    tau = (years - 1970) / 29.0
    shock = np.zeros(years.size)
    for y, size in ((1974, 0.25), (1975, 0.15), (1979, 0.2), (1980, 0.35), (1981, 0.3),
                    (1982, 0.15), (1990, 0.15), (1991, 0.05)):
        shock[years == y] = size
    shock += 0.04 * rng.standard_normal(years.size)

    RI = 9.55 + 0.42 * tau + 0.02 * np.cumsum(rng.standard_normal(years.size)) / 3
    RPT = 4.35 + 0.30 * tau + 0.03 * rng.standard_normal(years.size)
    RPN = 4.75 - 0.12 * tau + 0.025 * rng.standard_normal(years.size)
    RPU = 4.10 + 0.45 * tau + 0.04 * rng.standard_normal(years.size)
    PG = (0.05 + 0.50 * (RPT - 4.35) - 0.6 * (RPN - 4.75) + 0.35 * (RPU - 4.10)
          - 0.3 * (RI - 9.55) + shock + 0.02 * rng.standard_normal(years.size))
    GC = (5.00 - 0.22 * PG + 0.75 * (RI - 9.55) - 0.15 * shock
          + 0.015 * rng.standard_normal(years.size))

    lines = [
        "# SYNTHETIC LOOKALIKE: simulated values, not historical statistics.",
        "# Regenerate with tools/make_gasoline_lookalike.py (seed %d)." % seed,
        "year,GC,PG,RI,RPN,RPT,RPU",
    ]
    for row in zip(years, GC, PG, RI, RPN, RPT, RPU):
        lines.append(str(row[0]) + "," + ",".join(f"{v:.5f}" for v in row[1:]))
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
