"""Regenerate the connection containers under tests/fixtures.

    python3 scripts/make_fixtures.py [--out tests/fixtures]

local_s21.rfc      non-constant MC-flat data, SpaceForm(2, 1), 33x33, h = 0.05
defect_bracket.rfc same data with a smooth bump added to b in direction 1
defect_degree.rfc  same data with a so(n) + so(k) component leaked into c
"""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from reflow import GridChart, build_space_form_pair, local_solution, save_connection
from reflow.liecore import random_element


def build(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    spec = build_space_form_pair(2, 1)
    field = local_solution(spec, GridChart.uniform(2, 33, 0.05), seed=0)
    field = field.replace(sampler=None)
    save_connection(field, out / "local_s21.rfc")

    rng = np.random.default_rng(7)
    x = field.chart.points()
    bump = np.exp(-np.sum(x ** 2, axis=-1) / 0.1)[..., None, None]
    b = field.b.copy()
    b[..., 1, :, :] += 1e-2 * bump * random_element(spec, "pm", rng)
    save_connection(field.replace(b=b), out / "defect_bracket.rfc")

    c = field.c.copy()
    c[..., 0, :, :] += 1e-3 * random_element(spec, "pp", rng)
    save_connection(field.replace(c=c), out / "defect_degree.rfc")


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "tests" / "fixtures")
    build(p.parse_args().out)


if __name__ == "__main__":
    main()
